use super::grid::{local_count, owned_range, GridLayout};
use super::transport::{pack_f64s, unpack_f64s, Transport};
use crate::error::{GlsError, Result};
use crate::kernel::Matrix;

/// This rank's share of a matrix under the element-cyclic 2D distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct DistMatrix2D {
    rows: usize,
    cols: usize,
    grid: GridLayout,
    rank: usize,
    local: Matrix,
}

/// This rank's share of a matrix whose full columns are dealt cyclically
/// over all ranks.
#[derive(Clone, Debug, PartialEq)]
pub struct DistMatrix1D {
    rows: usize,
    cols: usize,
    grid: GridLayout,
    rank: usize,
    local: Matrix,
}

impl DistMatrix2D {
    pub fn zeros(rows: usize, cols: usize, grid: GridLayout, rank: usize) -> Self {
        let (gr, gc) = grid.coords(rank);
        DistMatrix2D {
            rows,
            cols,
            grid,
            rank,
            local: Matrix::zeros(
                local_count(rows, grid.rows(), gr),
                local_count(cols, grid.cols(), gc),
            ),
        }
    }

    /// Fills the owned entries from a function of the global index.
    pub fn from_fn(
        rows: usize,
        cols: usize,
        grid: GridLayout,
        rank: usize,
        f: impl Fn(usize, usize) -> f64,
    ) -> Self {
        let mut d = Self::zeros(rows, cols, grid, rank);
        let (gr, gc) = grid.coords(rank);
        for (lj, j) in owned_range(0, cols, grid.cols(), gc).enumerate() {
            for (li, i) in owned_range(0, rows, grid.rows(), gr).enumerate() {
                d.local.set(li, lj, f(i, j));
            }
        }
        d
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn grid(&self) -> &GridLayout {
        &self.grid
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn local(&self) -> &Matrix {
        &self.local
    }

    pub fn local_mut(&mut self) -> &mut Matrix {
        &mut self.local
    }

    /// The value at global (i, j) if this rank owns it.
    pub fn get_global(&self, i: usize, j: usize) -> Option<f64> {
        let (gr, gc) = self.grid.coords(self.rank);
        (i < self.rows && j < self.cols && i % self.grid.rows() == gr && j % self.grid.cols() == gc)
            .then(|| self.local.get(i / self.grid.rows(), j / self.grid.cols()))
    }

    pub(crate) fn set_owned(&mut self, i: usize, j: usize, v: f64) {
        self.local
            .set(i / self.grid.rows(), j / self.grid.cols(), v);
    }

    pub(crate) fn owned(&self, i: usize, j: usize) -> f64 {
        self.local.get(i / self.grid.rows(), j / self.grid.cols())
    }

    fn check_world<T: Transport + ?Sized>(&self, t: &T) -> Result<()> {
        check_world(&self.grid, self.rank, t)
    }
}

impl DistMatrix1D {
    /// Adopts `local` as this rank's columns without copying. `local` must
    /// hold exactly the columns `rank, rank + np, ...` below `cols`.
    pub fn from_local(
        rows: usize,
        cols: usize,
        grid: GridLayout,
        rank: usize,
        local: Matrix,
    ) -> Result<Self> {
        let want = local_count(cols, grid.np(), rank);
        if local.rows() != rows || local.cols() != want {
            return Err(GlsError::dims(format!(
                "rank {rank} holds a {}x{} local part, expected {rows}x{want}",
                local.rows(),
                local.cols()
            )));
        }
        Ok(DistMatrix1D {
            rows,
            cols,
            grid,
            rank,
            local,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn local(&self) -> &Matrix {
        &self.local
    }

    /// Releases the local columns without copying.
    pub fn into_local(self) -> Matrix {
        self.local
    }
}

fn check_world<T: Transport + ?Sized>(grid: &GridLayout, rank: usize, t: &T) -> Result<()> {
    if t.size() != grid.np() || t.rank() != rank {
        return Err(GlsError::Config(format!(
            "transport is rank {} of {}, matrix expects rank {rank} of {}",
            t.rank(),
            t.size(),
            grid.np()
        )));
    }
    Ok(())
}

fn decode(bytes: &[u8], expected: usize) -> Result<Vec<f64>> {
    let v = unpack_f64s(bytes)?;
    if v.len() != expected {
        return Err(GlsError::SizeMismatch {
            expected,
            actual: v.len(),
        });
    }
    Ok(v)
}

/// Column panel `q` of `np` near-equal contiguous panels.
pub(crate) fn panel_range(cols: usize, np: usize, q: usize) -> (usize, usize) {
    (q * cols / np, (q + 1) * cols / np)
}

/// Rows of `0..rows` owned by grid row `gr`, ascending.
fn my_rows(rows: usize, grid: &GridLayout, gr: usize) -> impl Iterator<Item = usize> {
    owned_range(0, rows, grid.rows(), gr)
}

/// Moves contiguous full-column panels into the 2D layout. `panel` holds
/// global columns `panel_range(cols, np, rank)`.
fn panels_to_2d<T: Transport + ?Sized>(
    panel: &Matrix,
    rows: usize,
    cols: usize,
    grid: GridLayout,
    t: &T,
) -> Result<DistMatrix2D> {
    let me = t.rank();
    let np = grid.np();
    let (c0, c1) = panel_range(cols, np, me);
    let parts = (0..np)
        .map(|d| {
            let (dr, dc) = grid.coords(d);
            let mut buf = Vec::new();
            for j in owned_range(c0, c1, grid.cols(), dc) {
                let col = panel.col(j - c0);
                buf.extend(my_rows(rows, &grid, dr).map(|i| col[i]));
            }
            pack_f64s(&buf)
        })
        .collect();
    let got = t.alltoall(parts)?;
    let mut out = DistMatrix2D::zeros(rows, cols, grid, me);
    let (gr, gc) = grid.coords(me);
    for (s, bytes) in got.iter().enumerate() {
        let (s0, s1) = panel_range(cols, np, s);
        let ncols = owned_range(s0, s1, grid.cols(), gc).count();
        let nrows = out.local.rows();
        let vals = decode(bytes, ncols * nrows)?;
        let mut it = vals.into_iter();
        for j in owned_range(s0, s1, grid.cols(), gc) {
            for i in my_rows(rows, &grid, gr) {
                out.set_owned(i, j, it.next().unwrap());
            }
        }
    }
    Ok(out)
}

/// Inverse of [`panels_to_2d`].
fn panels_from_2d<T: Transport + ?Sized>(a: &DistMatrix2D, t: &T) -> Result<Matrix> {
    let (rows, cols, grid) = (a.rows, a.cols, a.grid);
    let np = grid.np();
    let (gr, gc) = grid.coords(a.rank);
    let parts = (0..np)
        .map(|d| {
            let (d0, d1) = panel_range(cols, np, d);
            let mut buf = Vec::new();
            for j in owned_range(d0, d1, grid.cols(), gc) {
                buf.extend(my_rows(rows, &grid, gr).map(|i| a.owned(i, j)));
            }
            pack_f64s(&buf)
        })
        .collect();
    let got = t.alltoall(parts)?;
    let (c0, c1) = panel_range(cols, np, a.rank);
    let mut panel = Matrix::zeros(rows, c1 - c0);
    for (s, bytes) in got.iter().enumerate() {
        let (sr, sc) = grid.coords(s);
        let ncols = owned_range(c0, c1, grid.cols(), sc).count();
        let nrows = local_count(rows, grid.rows(), sr);
        let vals = decode(bytes, ncols * nrows)?;
        let mut it = vals.into_iter();
        for j in owned_range(c0, c1, grid.cols(), sc) {
            let col = panel.col_mut(j - c0);
            for i in my_rows(rows, &grid, sr) {
                col[i] = it.next().unwrap();
            }
        }
    }
    Ok(panel)
}

/// Distributes a matrix that rank 0 produces panel by panel. `source(c0, c1)`
/// is only called on rank 0 and must return the full columns `c0..c1`, so
/// rank 0 never holds more than one panel at a time beyond its own.
pub fn scatter_panels<T: Transport + ?Sized>(
    rows: usize,
    cols: usize,
    grid: GridLayout,
    t: &T,
    source: &mut dyn FnMut(usize, usize) -> Result<Matrix>,
) -> Result<DistMatrix2D> {
    check_world(&grid, t.rank(), t)?;
    let np = grid.np();
    let panel = if t.rank() == 0 {
        for q in 1..np {
            let (c0, c1) = panel_range(cols, np, q);
            let m = source(c0, c1)?;
            if m.rows() != rows || m.cols() != c1 - c0 {
                return Err(GlsError::dims(format!(
                    "panel {q} is {}x{}",
                    m.rows(),
                    m.cols()
                )));
            }
            t.send(q, pack_f64s(m.as_slice()))?;
        }
        let (c0, c1) = panel_range(cols, np, 0);
        source(c0, c1)?
    } else {
        let (c0, c1) = panel_range(cols, np, t.rank());
        Matrix::from_col_major(rows, c1 - c0, decode(&t.recv(0)?, rows * (c1 - c0))?)?
    };
    panels_to_2d(&panel, rows, cols, grid, t)
}

/// Distributes a matrix held on rank 0. Other ranks pass `None` and learn
/// the shape from rank 0.
pub fn scatter_matrix<T: Transport + ?Sized>(
    global: Option<&Matrix>,
    grid: GridLayout,
    t: &T,
) -> Result<DistMatrix2D> {
    check_world(&grid, t.rank(), t)?;
    let shape = match (t.rank(), global) {
        (0, Some(g)) => [g.rows() as u64, g.cols() as u64],
        (0, None) => {
            return Err(GlsError::Config(
                "rank 0 must supply the matrix to scatter".into(),
            ))
        }
        _ => [0, 0],
    };
    let bytes = t.broadcast(0, shape.iter().flat_map(|v| v.to_le_bytes()).collect())?;
    if bytes.len() != 16 {
        return Err(GlsError::SizeMismatch {
            expected: 16,
            actual: bytes.len(),
        });
    }
    let rows = u64::from_le_bytes(bytes[..8].try_into().unwrap()) as usize;
    let cols = u64::from_le_bytes(bytes[8..].try_into().unwrap()) as usize;
    scatter_panels(rows, cols, grid, t, &mut |c0, c1| {
        let g = global.expect("only rank 0 reads panels");
        Ok(g.columns(c0, c1 - c0))
    })
}

/// Collects a distributed matrix on rank 0; other ranks get `None`.
pub fn gather_matrix<T: Transport + ?Sized>(a: &DistMatrix2D, t: &T) -> Result<Option<Matrix>> {
    a.check_world(t)?;
    let panel = panels_from_2d(a, t)?;
    let np = a.grid.np();
    if t.rank() != 0 {
        t.send(0, pack_f64s(panel.as_slice()))?;
        return Ok(None);
    }
    let mut data = Vec::with_capacity(a.rows * a.cols);
    data.extend_from_slice(panel.as_slice());
    for q in 1..np {
        let (c0, c1) = panel_range(a.cols, np, q);
        data.extend(decode(&t.recv(q)?, a.rows * (c1 - c0))?);
    }
    Matrix::from_col_major(a.rows, a.cols, data).map(Some)
}

/// Assembles the full matrix on every rank.
pub fn replicate<T: Transport + ?Sized>(a: &DistMatrix2D, t: &T) -> Result<Matrix> {
    a.check_world(t)?;
    let got = t.allgather(pack_f64s(a.local.as_slice()))?;
    let mut full = Matrix::zeros(a.rows, a.cols);
    for (s, bytes) in got.iter().enumerate() {
        let (sr, sc) = a.grid.coords(s);
        let lr = local_count(a.rows, a.grid.rows(), sr);
        let lc = local_count(a.cols, a.grid.cols(), sc);
        let vals = decode(bytes, lr * lc)?;
        for (lj, j) in owned_range(0, a.cols, a.grid.cols(), sc).enumerate() {
            for (li, i) in owned_range(0, a.rows, a.grid.rows(), sr).enumerate() {
                full.set(i, j, vals[lj * lr + li]);
            }
        }
    }
    Ok(full)
}

/// 1D cyclic columns to the 2D layout in one all-to-all. Every column a rank
/// holds lands in the same process column, because `c` divides `np`.
pub fn redist_1d_to_2d<T: Transport + ?Sized>(a: &DistMatrix1D, t: &T) -> Result<DistMatrix2D> {
    check_world(&a.grid, a.rank, t)?;
    let (grid, rows, cols) = (a.grid, a.rows, a.cols);
    let np = grid.np();
    let my_gc = a.rank % grid.cols();
    let parts = (0..np)
        .map(|d| {
            let (dr, dc) = grid.coords(d);
            if dc != my_gc {
                return Vec::new();
            }
            let mut buf = Vec::with_capacity(a.local.cols() * local_count(rows, grid.rows(), dr));
            for t_col in 0..a.local.cols() {
                let col = a.local.col(t_col);
                buf.extend(my_rows(rows, &grid, dr).map(|i| col[i]));
            }
            pack_f64s(&buf)
        })
        .collect();
    let got = t.alltoall(parts)?;
    let mut out = DistMatrix2D::zeros(rows, cols, grid, a.rank);
    let (gr, gc) = grid.coords(a.rank);
    let nrows = out.local.rows();
    for (s, bytes) in got.iter().enumerate() {
        if s % grid.cols() != gc {
            continue;
        }
        let ncols = local_count(cols, np, s);
        let vals = decode(bytes, ncols * nrows)?;
        let mut it = vals.into_iter();
        for j in owned_range(0, cols, np, s) {
            for i in my_rows(rows, &grid, gr) {
                out.set_owned(i, j, it.next().unwrap());
            }
        }
    }
    Ok(out)
}

/// Inverse of [`redist_1d_to_2d`].
pub fn redist_2d_to_1d<T: Transport + ?Sized>(a: &DistMatrix2D, t: &T) -> Result<DistMatrix1D> {
    a.check_world(t)?;
    let (grid, rows, cols) = (a.grid, a.rows, a.cols);
    let np = grid.np();
    let (gr, gc) = grid.coords(a.rank);
    let parts = (0..np)
        .map(|d| {
            if d % grid.cols() != gc {
                return Vec::new();
            }
            let mut buf = Vec::new();
            for j in owned_range(0, cols, np, d) {
                buf.extend(my_rows(rows, &grid, gr).map(|i| a.owned(i, j)));
            }
            pack_f64s(&buf)
        })
        .collect();
    let got = t.alltoall(parts)?;
    let my_cols = local_count(cols, np, a.rank);
    let mut local = Matrix::zeros(rows, my_cols);
    let my_gc = a.rank % grid.cols();
    for (s, bytes) in got.iter().enumerate() {
        let (sr, sc) = grid.coords(s);
        if sc != my_gc {
            continue;
        }
        let vals = decode(bytes, my_cols * local_count(rows, grid.rows(), sr))?;
        let mut it = vals.into_iter();
        for t_col in 0..my_cols {
            let col = local.col_mut(t_col);
            for i in my_rows(rows, &grid, sr) {
                col[i] = it.next().unwrap();
            }
        }
    }
    DistMatrix1D::from_local(rows, cols, grid, a.rank, local)
}

/// Checks exact symmetry of a distributed square matrix with one
/// all-to-all: each strictly-upper entry is shipped to the owner of its
/// mirror. Every rank reports the same outcome.
pub fn check_symmetric<T: Transport + ?Sized>(a: &DistMatrix2D, t: &T) -> Result<()> {
    a.check_world(t)?;
    if a.rows != a.cols {
        return Err(GlsError::dims(format!(
            "matrix is {}x{}, not square",
            a.rows, a.cols
        )));
    }
    let (grid, n) = (a.grid, a.rows);
    let (r, c) = (grid.rows(), grid.cols());
    let (gr, gc) = grid.coords(a.rank);
    // (i, j) with i < j owned by (sr, sc), mirrored at (j, i) owned by (dr, dc).
    let upper = move |sr: usize, sc: usize, dr: usize, dc: usize| {
        owned_range(0, n, c, sc)
            .filter(move |j| j % r == dr)
            .flat_map(move |j| {
                owned_range(0, j, r, sr)
                    .filter(move |i| i % c == dc)
                    .map(move |i| (i, j))
            })
    };
    let parts = (0..grid.np())
        .map(|d| {
            let (dr, dc) = grid.coords(d);
            let vals: Vec<f64> = upper(gr, gc, dr, dc).map(|(i, j)| a.owned(i, j)).collect();
            pack_f64s(&vals)
        })
        .collect();
    let got = t.alltoall(parts)?;
    let mut first_bad: Option<(usize, usize)> = None;
    for (s, bytes) in got.iter().enumerate() {
        let (sr, sc) = grid.coords(s);
        let vals = decode(bytes, upper(sr, sc, gr, gc).count())?;
        for ((i, j), v) in upper(sr, sc, gr, gc).zip(vals) {
            if v != a.owned(j, i) && first_bad.is_none_or(|b| (i, j) < b) {
                first_bad = Some((i, j));
            }
        }
    }
    let flag = first_bad.map_or([u64::MAX, u64::MAX], |(i, j)| [i as u64, j as u64]);
    let verdicts = t.allgather(flag.iter().flat_map(|v| v.to_le_bytes()).collect())?;
    let worst = verdicts
        .iter()
        .map(|b| {
            (
                u64::from_le_bytes(b[..8].try_into().unwrap()),
                u64::from_le_bytes(b[8..16].try_into().unwrap()),
            )
        })
        .min()
        .unwrap();
    if worst.0 == u64::MAX {
        Ok(())
    } else {
        Err(GlsError::Asymmetric {
            i: worst.0 as usize,
            j: worst.1 as usize,
        })
    }
}
