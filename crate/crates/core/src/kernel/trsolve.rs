use super::matrix::Matrix;
use super::types::CholeskyFactor;
use crate::error::{GlsError, Result};

/// Right-hand sides processed together so each column of `L` is streamed once
/// per group.
const RHS_GROUP: usize = 8;

/// Forward substitution `L·X = B` on column-major data, overwriting `b`.
///
/// Each column's arithmetic is fixed: for `j = 0..n`, `x_j = b_j / L_jj` and then
/// `b_i -= x_j · L_ij` for `i > j`. Grouping of columns only changes memory
/// traffic, never the result. `distgrid::dist_trsolve` relies on this order.
pub(crate) fn forward_substitute(l: &Matrix, b: &mut [f64], n: usize) {
    debug_assert_eq!(b.len() % n.max(1), 0);
    if n == 0 {
        return;
    }
    for group in b.chunks_mut(n * RHS_GROUP) {
        let mut cols: Vec<&mut [f64]> = group.chunks_exact_mut(n).collect();
        for j in 0..n {
            let lcol = l.col(j);
            let ljj = lcol[j];
            let below = &lcol[j + 1..];
            for col in cols.iter_mut() {
                let (head, tail) = col.split_at_mut(j + 1);
                let x = head[j] / ljj;
                head[j] = x;
                for (bi, li) in tail.iter_mut().zip(below) {
                    *bi -= x * li;
                }
            }
        }
    }
}

/// Solves `L·X̄ = B` and returns `X̄`.
pub fn trsolve_lower(l: &CholeskyFactor, b: &Matrix) -> Result<Matrix> {
    let mut out = b.clone();
    trsolve_lower_in_place(l, &mut out)?;
    Ok(out)
}

pub fn trsolve_lower_in_place(l: &CholeskyFactor, b: &mut Matrix) -> Result<()> {
    let n = l.n();
    if b.rows() != n {
        return Err(GlsError::dims(format!(
            "triangular solve: factor is {n}x{n}, right-hand side has {} rows",
            b.rows()
        )));
    }
    forward_substitute(l.as_matrix(), b.as_mut_slice(), n);
    Ok(())
}

/// `AᵀA`, lower triangle computed and mirrored so the result is exactly symmetric.
pub fn gram(a: &Matrix) -> Matrix {
    let k = a.cols();
    let mut s = Matrix::zeros(k, k);
    for j in 0..k {
        for i in j..k {
            let v = super::matrix::dot(a.col(i), a.col(j));
            s.set(i, j, v);
            s.set(j, i, v);
        }
    }
    s
}

/// `Aᵀ·v`.
pub fn transpose_times_vec(a: &Matrix, v: &[f64]) -> Result<Vec<f64>> {
    if a.rows() != v.len() {
        return Err(GlsError::dims("Aᵀv: length mismatch"));
    }
    Ok((0..a.cols())
        .map(|j| super::matrix::dot(a.col(j), v))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_by_hand() {
        let l = CholeskyFactor::from_lower(Matrix::from_rows(&[&[2.0, 0.0], &[1.0, 2.0]])).unwrap();
        let x = trsolve_lower(&l, &Matrix::column_vector(vec![2.0, 3.0])).unwrap();
        assert_eq!(x.as_slice(), &[1.0, 1.0]);
    }

    #[test]
    fn identity_leaves_rhs() {
        let l = CholeskyFactor::from_lower(Matrix::identity(5)).unwrap();
        let b = Matrix::from_fn(5, 3, |i, j| (i * 7 + j) as f64 - 3.5);
        assert_eq!(trsolve_lower(&l, &b).unwrap(), b);
    }

    #[test]
    fn row_mismatch_rejected() {
        let l = CholeskyFactor::from_lower(Matrix::identity(3)).unwrap();
        assert!(matches!(
            trsolve_lower(&l, &Matrix::zeros(4, 1)),
            Err(GlsError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn gram_small_cases() {
        let ones = Matrix::column_vector(vec![1.0; 3]);
        assert_eq!(gram(&ones).as_slice(), &[3.0]);
        assert_eq!(gram(&Matrix::identity(2)), Matrix::identity(2));
    }

    #[test]
    fn columns_are_independent_of_grouping() {
        let n = 23;
        let l = Matrix::from_fn(n, n, |i, j| {
            if i == j {
                2.0 + i as f64 * 0.1
            } else if i > j {
                ((i * 31 + j * 17) % 13) as f64 / 13.0 - 0.5
            } else {
                0.0
            }
        });
        let l = CholeskyFactor::from_lower(l).unwrap();
        let b = Matrix::from_fn(n, 19, |i, j| ((i * 5 + j * 11) % 9) as f64 - 4.0);
        let all = trsolve_lower(&l, &b).unwrap();
        for j in 0..19 {
            let single = trsolve_lower(&l, &b.columns(j, 1)).unwrap();
            assert_eq!(single.col(0), all.col(j));
        }
    }
}
