//! Literal evaluation of `b = (XᵀM⁻¹X)⁻¹ XᵀM⁻¹y`.
//!
//! Uses LU with partial pivoting and plain loops throughout. It shares no code
//! with the Cholesky-based sweep, which is what makes it useful as a
//! reference.

#![allow(clippy::needless_range_loop)]

use super::matrix::Matrix;
use super::types::{CovarianceMatrix, Phenotype};
use crate::error::{GlsError, Result};

/// Row-pivoted LU factorization `P·A = L·U`.
#[derive(Clone, Debug)]
pub struct LuFactor {
    lu: Matrix,
    perm: Vec<usize>,
}

/// Factors a square matrix. A pivot whose magnitude does not exceed `floor`
/// is reported as [`GlsError::Singular`].
pub fn lu_factor(a: &Matrix, floor: f64) -> Result<LuFactor> {
    let n = a.rows();
    if a.cols() != n {
        return Err(GlsError::dims("LU needs a square matrix"));
    }
    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let mut piv = k;
        let mut best = lu.get(k, k).abs();
        for i in k + 1..n {
            let v = lu.get(i, k).abs();
            if v > best {
                best = v;
                piv = i;
            }
        }
        if !best.is_finite() || best <= floor {
            return Err(GlsError::Singular { pivot_index: k });
        }
        if piv != k {
            perm.swap(k, piv);
            for j in 0..n {
                let t = lu.get(k, j);
                lu.set(k, j, lu.get(piv, j));
                lu.set(piv, j, t);
            }
        }
        let d = lu.get(k, k);
        for i in k + 1..n {
            let f = lu.get(i, k) / d;
            lu.set(i, k, f);
            if f != 0.0 {
                for j in k + 1..n {
                    lu.set(i, j, lu.get(i, j) - f * lu.get(k, j));
                }
            }
        }
    }
    Ok(LuFactor { lu, perm })
}

impl LuFactor {
    pub fn n(&self) -> usize {
        self.lu.rows()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s -= self.lu.get(i, k) * x[k];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self.lu.get(i, k) * x[k];
            }
            x[i] = s / self.lu.get(i, i);
        }
        x
    }
}

/// Reference GLS estimate for one full design `X_i` (n×p).
pub fn gls_oracle(m: &CovarianceMatrix, xi: &Matrix, y: &Phenotype) -> Result<Vec<f64>> {
    let lu = lu_factor(m.as_matrix(), 0.0)?;
    gls_oracle_factored(&lu, xi, y.as_slice())
}

/// As [`gls_oracle`] with `M` already LU-factored. Nothing else is reused
/// between calls: `M⁻¹X_i` and `M⁻¹y` are recomputed every time.
///
/// A numerically singular `X_iᵀM⁻¹X_i` (pivot ≤ n·ε·max|S|) gives `Singular`.
pub fn gls_oracle_factored(m_lu: &LuFactor, xi: &Matrix, y: &[f64]) -> Result<Vec<f64>> {
    let n = m_lu.n();
    if xi.rows() != n || y.len() != n {
        return Err(GlsError::dims(
            "oracle: design or phenotype does not match M",
        ));
    }
    let p = xi.cols();
    let minv_x: Vec<Vec<f64>> = (0..p).map(|j| m_lu.solve(xi.col(j))).collect();
    let minv_y = m_lu.solve(y);

    let mut s = Matrix::zeros(p, p);
    let mut rhs = vec![0.0; p];
    for a in 0..p {
        for b in 0..p {
            let mut acc = 0.0;
            for r in 0..n {
                acc += xi.get(r, a) * minv_x[b][r];
            }
            s.set(a, b, acc);
        }
        let mut acc = 0.0;
        for r in 0..n {
            acc += xi.get(r, a) * minv_y[r];
        }
        rhs[a] = acc;
    }
    let floor = n as f64 * f64::EPSILON * s.max_abs();
    let s_lu = lu_factor(&s, floor)?;
    Ok(s_lu.solve(&rhs))
}

/// Ordinary least squares via normal equations `XᵀX·b = Xᵀy`.
pub fn ols_normal_equations(x: &Matrix, y: &[f64]) -> Result<Vec<f64>> {
    let n = x.rows();
    let p = x.cols();
    let mut s = Matrix::zeros(p, p);
    let mut rhs = vec![0.0; p];
    for a in 0..p {
        for b in 0..p {
            s.set(a, b, (0..n).map(|r| x.get(r, a) * x.get(r, b)).sum());
        }
        rhs[a] = (0..n).map(|r| x.get(r, a) * y[r]).sum();
    }
    let floor = n as f64 * f64::EPSILON * s.max_abs();
    Ok(lu_factor(&s, floor)?.solve(&rhs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ols_case() -> (Matrix, Phenotype) {
        (
            Matrix::from_rows(&[&[1.0, 0.0], &[1.0, 1.0], &[1.0, 2.0]]),
            Phenotype::new(vec![1.0, 2.0, 3.0]).unwrap(),
        )
    }

    #[test]
    fn identity_covariance_is_ols() {
        let (x, y) = ols_case();
        let m = CovarianceMatrix::new(Matrix::identity(3)).unwrap();
        let b = gls_oracle(&m, &x, &y).unwrap();
        assert!((b[0] - 1.0).abs() < 1e-14 && (b[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn scale_of_covariance_cancels() {
        let (x, y) = ols_case();
        let m = CovarianceMatrix::new(Matrix::from_rows(&[
            &[2.0, 0.5, 0.0],
            &[0.5, 3.0, 0.25],
            &[0.0, 0.25, 1.5],
        ]))
        .unwrap();
        let b1 = gls_oracle(&m, &x, &y).unwrap();
        let b2 = gls_oracle(&m.scaled(7.0), &x, &y).unwrap();
        for (u, v) in b1.iter().zip(&b2) {
            assert!((u - v).abs() <= 1e-13 * u.abs().max(1.0));
        }
    }

    #[test]
    fn lu_solves_permuted_system() {
        let a = Matrix::from_rows(&[&[0.0, 2.0], &[3.0, 1.0]]);
        let lu = lu_factor(&a, 0.0).unwrap();
        let x = lu.solve(&[4.0, 5.0]);
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn collinear_design_is_singular() {
        let x = Matrix::from_rows(&[&[1.0, 1.0], &[1.0, 1.0], &[1.0, 1.0]]);
        let m = CovarianceMatrix::new(Matrix::identity(3)).unwrap();
        let y = Phenotype::new(vec![1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(
            gls_oracle(&m, &x, &y),
            Err(GlsError::Singular { .. })
        ));
    }
}
