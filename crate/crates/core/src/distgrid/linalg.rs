//! Distributed factorization and triangular solve.
//!
//! Both routines gather one column panel per step onto every rank, run the
//! same scalar code as the single-process kernel on it, and let each rank
//! update the entries it owns with the kernel's per-element operation order.
//! Results are therefore bitwise identical to the kernel for any grid.

use super::dmatrix::DistMatrix2D;
use super::grid::owned_range;
use super::transport::{pack_f64s, unpack_f64s, Transport};
use crate::error::{GlsError, Result};
use crate::kernel::{dot, factor_panel};

/// Lower-triangle entries of the panel `k0..k1` owned by grid cell (gr, gc),
/// in a fixed order every rank can reproduce.
fn panel_entries(
    n: usize,
    k0: usize,
    k1: usize,
    r: usize,
    c: usize,
    gr: usize,
    gc: usize,
) -> impl Iterator<Item = (usize, usize)> {
    owned_range(k0, k1, c, gc).flat_map(move |j| owned_range(j, n, r, gr).map(move |i| (i, j)))
}

/// Gathers the lower part of columns `k0..k1` (rows `k0..n`) onto every rank
/// as a row-major `(n - k0) × w` buffer.
fn gather_panel<T: Transport + ?Sized>(
    a: &DistMatrix2D,
    k0: usize,
    k1: usize,
    t: &T,
    extra: &[f64],
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let grid = *a.grid();
    let (r, c) = (grid.rows(), grid.cols());
    let (gr, gc) = grid.coords(a.rank());
    let n = a.rows();
    let w = k1 - k0;
    let mut mine: Vec<f64> = panel_entries(n, k0, k1, r, c, gr, gc)
        .map(|(i, j)| a.owned(i, j))
        .collect();
    mine.extend_from_slice(extra);
    let got = t.allgather(pack_f64s(&mine))?;
    let mut panel = vec![0.0; (n - k0) * w];
    let mut extras = Vec::with_capacity(got.len());
    for (s, bytes) in got.iter().enumerate() {
        let (sr, sc) = grid.coords(s);
        let vals = unpack_f64s(bytes)?;
        let mut used = 0;
        for (i, j) in panel_entries(n, k0, k1, r, c, sr, sc) {
            let v = *vals.get(used).ok_or(GlsError::SizeMismatch {
                expected: used + 1,
                actual: vals.len(),
            })?;
            panel[(i - k0) * w + (j - k0)] = v;
            used += 1;
        }
        extras.push(vals[used..].to_vec());
    }
    Ok((panel, extras))
}

fn check_same_grid(a: &DistMatrix2D, b: &DistMatrix2D) -> Result<()> {
    if a.grid() != b.grid() || a.rank() != b.rank() {
        return Err(GlsError::Config("operands live on different grids".into()));
    }
    Ok(())
}

/// Distributed Cholesky with panel width `nb`. Only the lower triangle of
/// `m` is read; the strict upper triangle of the result is zero.
pub fn dist_cholesky<T: Transport + ?Sized>(
    mut a: DistMatrix2D,
    t: &T,
    nb: usize,
) -> Result<DistMatrix2D> {
    let n = a.rows();
    if a.cols() != n {
        return Err(GlsError::dims("Cholesky needs a square matrix"));
    }
    let grid = *a.grid();
    let (r, c) = (grid.rows(), grid.cols());
    let (gr, gc) = grid.coords(a.rank());
    let nb = nb.max(1);
    let mut k0 = 0;
    while k0 < n {
        let k1 = (k0 + nb).min(n);
        let w = k1 - k0;
        let (mut panel, _) = gather_panel(&a, k0, k1, t, &[])?;
        // Identical input on every rank, so every rank fails at the same pivot.
        factor_panel(&mut panel, n - k0, w, k0)?;
        for (i, j) in panel_entries(n, k0, k1, r, c, gr, gc) {
            a.set_owned(i, j, panel[(i - k0) * w + (j - k0)]);
        }
        for j in owned_range(k1, n, c, gc) {
            let pj = &panel[(j - k0) * w..(j - k0 + 1) * w];
            for i in owned_range(j, n, r, gr) {
                let pi = &panel[(i - k0) * w..(i - k0 + 1) * w];
                let v = a.owned(i, j) - dot(pi, pj);
                a.set_owned(i, j, v);
            }
        }
        k0 = k1;
    }
    for j in owned_range(0, n, c, gc) {
        for i in owned_range(0, j, r, gr) {
            a.set_owned(i, j, 0.0);
        }
    }
    Ok(a)
}

/// Solves `L·X = B` for a distributed factor and right-hand side, in steps
/// of `nb` rows.
pub fn dist_trsolve<T: Transport + ?Sized>(
    l: &DistMatrix2D,
    b: &DistMatrix2D,
    t: &T,
    nb: usize,
) -> Result<DistMatrix2D> {
    check_same_grid(l, b)?;
    let n = l.rows();
    if l.cols() != n || b.rows() != n {
        return Err(GlsError::dims(format!(
            "triangular solve: factor is {}x{}, right-hand side has {} rows",
            l.rows(),
            l.cols(),
            b.rows()
        )));
    }
    let k = b.cols();
    let grid = *l.grid();
    let (r, c) = (grid.rows(), grid.cols());
    let (gr, gc) = grid.coords(l.rank());
    let mut x = b.clone();
    let nb = nb.max(1);
    let mut k0 = 0;
    while k0 < n {
        let k1 = (k0 + nb).min(n);
        let w = k1 - k0;
        // Owned rows k0..k1 of the right-hand side ride along with the panel.
        let head: Vec<f64> = owned_range(0, k, c, gc)
            .flat_map(|j| owned_range(k0, k1, r, gr).map(move |i| (i, j)))
            .map(|(i, j)| x.owned(i, j))
            .collect();
        let (panel, extras) = gather_panel(l, k0, k1, t, &head)?;

        // Head rows as a w × k column-major block, solved on every rank.
        let mut b1 = vec![0.0; w * k];
        for (s, vals) in extras.iter().enumerate() {
            let (sr, sc) = grid.coords(s);
            let cells = owned_range(0, k, c, sc)
                .flat_map(|j| owned_range(k0, k1, r, sr).map(move |i| (i, j)));
            let mut count = 0;
            for ((i, j), v) in cells.zip(vals) {
                b1[j * w + (i - k0)] = *v;
                count += 1;
            }
            if count != vals.len() {
                return Err(GlsError::SizeMismatch {
                    expected: count,
                    actual: vals.len(),
                });
            }
        }
        for col in b1.chunks_exact_mut(w) {
            for j in 0..w {
                let xj = col[j] / panel[j * w + j];
                col[j] = xj;
                for i in j + 1..w {
                    col[i] -= xj * panel[i * w + j];
                }
            }
        }

        for j in owned_range(0, k, c, gc) {
            let xs = &b1[j * w..(j + 1) * w];
            for i in owned_range(k0, k1, r, gr) {
                x.set_owned(i, j, xs[i - k0]);
            }
            for i in owned_range(k1, n, r, gr) {
                let li = &panel[(i - k0) * w..(i - k0 + 1) * w];
                let mut v = x.owned(i, j);
                for (xl, lil) in xs.iter().zip(li) {
                    v -= xl * lil;
                }
                x.set_owned(i, j, v);
            }
        }
        k0 = k1;
    }
    Ok(x)
}
