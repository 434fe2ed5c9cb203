//! Blocked right-looking Cholesky factorization.
//!
//! The factorization walks the matrix in column panels of width `nb`. Each
//! panel (the diagonal block and everything below it) is copied into a
//! row-major scratch buffer, factored left-looking, written back, and then
//! used for a rank-`nb` update of the trailing lower triangle. The distributed
//! factorization in `distgrid` runs exactly the same panel routine and the same
//! per-element update, so both produce identical bits for equal `nb`.

use super::matrix::{dot, Matrix};
use super::types::{CholeskyFactor, CovarianceMatrix};
use crate::error::{GlsError, Result};

pub const DEFAULT_PANEL_WIDTH: usize = 64;

/// Factors a row-major panel of `rows × w` values in place.
///
/// Rows `0..w` hold the diagonal block; rows below hold the sub-diagonal
/// block. `offset` is the global index of the panel's first column and is only
/// used to report the failing pivot.
pub(crate) fn factor_panel(panel: &mut [f64], rows: usize, w: usize, offset: usize) -> Result<()> {
    debug_assert_eq!(panel.len(), rows * w);
    for j in 0..w {
        let (head, tail) = panel.split_at_mut((j + 1) * w);
        let row_j = &mut head[j * w..(j + 1) * w];
        let d = row_j[j] - dot(&row_j[..j], &row_j[..j]);
        if !d.is_finite() || d <= 0.0 {
            return Err(GlsError::NotPositiveDefinite {
                pivot_index: offset + j,
            });
        }
        let ljj = d.sqrt();
        row_j[j] = ljj;
        let row_j = &*row_j;
        for row_i in tail.chunks_exact_mut(w) {
            row_i[j] = (row_i[j] - dot(&row_i[..j], &row_j[..j])) / ljj;
        }
    }
    Ok(())
}

/// In-place blocked factorization of the lower triangle of `a`.
///
/// On success the lower triangle holds `L` and the strict upper triangle is
/// zeroed. On failure `a` is left partially overwritten.
pub fn cholesky_in_place(a: &mut Matrix, nb: usize) -> Result<()> {
    let n = a.rows();
    if a.cols() != n {
        return Err(GlsError::dims("Cholesky needs a square matrix"));
    }
    let nb = nb.max(1);
    let mut panel = Vec::with_capacity(n * nb.min(n));
    let mut k0 = 0;
    while k0 < n {
        let k1 = (k0 + nb).min(n);
        let w = k1 - k0;
        let rows = n - k0;

        panel.clear();
        panel.resize(rows * w, 0.0);
        for c in 0..w {
            let col = a.col(k0 + c);
            for r in c..rows {
                panel[r * w + c] = col[k0 + r];
            }
        }
        factor_panel(&mut panel, rows, w, k0)?;
        for c in 0..w {
            let col = a.col_mut(k0 + c);
            for r in c..rows {
                col[k0 + r] = panel[r * w + c];
            }
        }

        for j in k1..n {
            let pj = &panel[(j - k0) * w..(j - k0 + 1) * w];
            let col = a.col_mut(j);
            for i in j..n {
                let pi = &panel[(i - k0) * w..(i - k0 + 1) * w];
                col[i] -= dot(pi, pj);
            }
        }
        k0 = k1;
    }
    for j in 1..n {
        a.col_mut(j)[..j].fill(0.0);
    }
    Ok(())
}

/// Factors `M = L·Lᵀ`, leaving `M` untouched.
pub fn cholesky_spd(m: &CovarianceMatrix) -> Result<CholeskyFactor> {
    CholeskyFactor::factor(m.clone())
}

impl CholeskyFactor {
    /// Factors `M` in place, consuming it.
    pub fn factor(m: CovarianceMatrix) -> Result<Self> {
        Self::factor_with_panel(m, DEFAULT_PANEL_WIDTH)
    }

    pub fn factor_with_panel(m: CovarianceMatrix, nb: usize) -> Result<Self> {
        let mut a = m.into_matrix();
        cholesky_in_place(&mut a, nb)?;
        Ok(CholeskyFactor::from_lower_unchecked(a))
    }
}

/// Cholesky of a small p×p column-major symmetric matrix (lower triangle read).
///
/// A pivot must exceed `floor`; returns the failing pivot index otherwise.
pub(crate) fn small_cholesky(s: &mut [f64], p: usize, floor: f64) -> Result<(), usize> {
    for j in 0..p {
        let mut d = s[j + j * p];
        for k in 0..j {
            let l = s[j + k * p];
            d -= l * l;
        }
        if !d.is_finite() || d <= floor {
            return Err(j);
        }
        let ljj = d.sqrt();
        s[j + j * p] = ljj;
        for i in j + 1..p {
            let mut v = s[i + j * p];
            for k in 0..j {
                v -= s[i + k * p] * s[j + k * p];
            }
            s[i + j * p] = v / ljj;
        }
    }
    Ok(())
}

/// Solves `L·Lᵀ·x = rhs` in place given a factor from [`small_cholesky`].
pub(crate) fn small_cholesky_solve(l: &[f64], p: usize, x: &mut [f64]) {
    for i in 0..p {
        let mut v = x[i];
        for k in 0..i {
            v -= l[i + k * p] * x[k];
        }
        x[i] = v / l[i + i * p];
    }
    for i in (0..p).rev() {
        let mut v = x[i];
        for k in i + 1..p {
            v -= l[k + i * p] * x[k];
        }
        x[i] = v / l[i + i * p];
    }
}

/// `(L·Lᵀ)⁻¹` packed lower-triangular by columns.
pub(crate) fn small_cholesky_inverse_packed(l: &[f64], p: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(p * (p + 1) / 2);
    let mut col = vec![0.0; p];
    for j in 0..p {
        col.fill(0.0);
        col[j] = 1.0;
        small_cholesky_solve(l, p, &mut col);
        out.extend_from_slice(&col[j..]);
    }
    out
}

/// Largest |entry| of the lower triangle, the scale for pivot floors.
pub(crate) fn lower_max_abs(s: &[f64], p: usize) -> f64 {
    let mut m = 0.0f64;
    for j in 0..p {
        for i in j..p {
            m = m.max(s[i + j * p].abs());
        }
    }
    m
}

/// Solves `S·x = rhs` for a small symmetric positive definite `S`.
///
/// A pivot is accepted only if it exceeds `p·ε·max|S|`.
pub fn solve_small_spd(s: &Matrix, rhs: &[f64]) -> Result<Vec<f64>> {
    let p = s.rows();
    if s.cols() != p || rhs.len() != p {
        return Err(GlsError::dims(format!(
            "solve_small_spd: S is {}x{}, rhs has {}",
            s.rows(),
            s.cols(),
            rhs.len()
        )));
    }
    let mut l = s.as_slice().to_vec();
    let floor = p as f64 * f64::EPSILON * lower_max_abs(&l, p);
    small_cholesky(&mut l, p, floor)
        .map_err(|pivot_index| GlsError::NotPositiveDefinite { pivot_index })?;
    let mut x = rhs.to_vec();
    small_cholesky_solve(&l, p, &mut x);
    Ok(x)
}
