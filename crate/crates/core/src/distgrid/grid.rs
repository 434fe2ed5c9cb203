use crate::error::{GlsError, Result};

/// A virtual r×c process grid. Ranks are laid out row-major, so rank
/// `row·c + col` sits at `(row, col)`; the same ordering doubles as the 1D
/// "concatenation of grid rows" used for full-column distributions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GridLayout {
    np: usize,
    rows: usize,
    cols: usize,
}

impl GridLayout {
    /// The grid closest to square: `r` is the largest divisor of `np` with
    /// `r ≤ √np`, and `c = np / r`.
    pub fn new(np: usize) -> Result<Self> {
        if np == 0 {
            return Err(GlsError::Config("process count must be at least 1".into()));
        }
        let mut r = 1;
        let mut d = 1;
        while d * d <= np {
            if np.is_multiple_of(d) {
                r = d;
            }
            d += 1;
        }
        Ok(GridLayout {
            np,
            rows: r,
            cols: np / r,
        })
    }

    pub fn with_shape(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(GlsError::Config("grid dimensions must be positive".into()));
        }
        Ok(GridLayout {
            np: rows * cols,
            rows,
            cols,
        })
    }

    pub fn np(&self) -> usize {
        self.np
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn coords(&self, rank: usize) -> (usize, usize) {
        (rank / self.cols, rank % self.cols)
    }

    pub fn rank_of(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }
}

pub fn grid_create(np: usize) -> Result<GridLayout> {
    GridLayout::new(np)
}

/// Owner of element (i, j) under the element-cyclic 2D distribution, with
/// its local (row, col) on that rank.
pub fn owner_2d(i: usize, j: usize, grid: &GridLayout) -> (usize, usize, usize) {
    let (r, c) = (grid.rows(), grid.cols());
    (grid.rank_of(i % r, j % c), i / r, j / c)
}

/// Inverse of [`owner_2d`].
pub fn global_2d(rank: usize, local_i: usize, local_j: usize, grid: &GridLayout) -> (usize, usize) {
    let (row, col) = grid.coords(rank);
    (local_i * grid.rows() + row, local_j * grid.cols() + col)
}

/// Owner of full column `j` under the 1D cyclic distribution, with its local
/// column index.
pub fn owner_1d(j: usize, grid: &GridLayout) -> (usize, usize) {
    (j % grid.np(), j / grid.np())
}

/// Inverse of [`owner_1d`].
pub fn global_1d(rank: usize, local_col: usize, grid: &GridLayout) -> usize {
    local_col * grid.np() + rank
}

/// How many of `0..global` are congruent to `offset` modulo `stride`.
pub fn local_count(global: usize, stride: usize, offset: usize) -> usize {
    if global > offset {
        (global - offset).div_ceil(stride)
    } else {
        0
    }
}

/// Indices in `start..end` congruent to `offset` modulo `stride`, ascending.
pub(crate) fn owned_range(
    start: usize,
    end: usize,
    stride: usize,
    offset: usize,
) -> impl Iterator<Item = usize> {
    let first = start + (offset + stride - start % stride) % stride;
    (first..end.max(first)).step_by(stride)
}
