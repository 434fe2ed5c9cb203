use super::matrix::Matrix;
use crate::error::{GlsError, Result};

/// Symmetric positive definite n×n covariance (kinship) matrix.
///
/// Symmetry is checked with exact equality; an asymmetric input is rejected
/// rather than symmetrized.
#[derive(Clone, Debug)]
pub struct CovarianceMatrix(Matrix);

impl CovarianceMatrix {
    pub fn new(m: Matrix) -> Result<Self> {
        if m.rows() != m.cols() {
            return Err(GlsError::dims(format!(
                "covariance must be square, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        m.check_finite("covariance")?;
        let n = m.rows();
        for j in 0..n {
            for i in j + 1..n {
                if m.get(i, j) != m.get(j, i) {
                    return Err(GlsError::Asymmetric { i, j });
                }
            }
        }
        Ok(CovarianceMatrix(m))
    }

    pub fn n(&self) -> usize {
        self.0.rows()
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    /// `c · M`, used by scale-invariance checks.
    pub fn scaled(&self, c: f64) -> Self {
        let mut m = self.0.clone();
        m.as_mut_slice().iter_mut().for_each(|v| *v *= c);
        CovarianceMatrix(m)
    }
}

/// Lower Cholesky factor `L` with `L·Lᵀ = M`. The strict upper triangle is zero.
#[derive(Clone, Debug)]
pub struct CholeskyFactor(Matrix);

impl CholeskyFactor {
    /// Wraps an already factored lower-triangular matrix.
    pub fn from_lower(l: Matrix) -> Result<Self> {
        if l.rows() != l.cols() {
            return Err(GlsError::dims("factor must be square"));
        }
        for i in 0..l.rows() {
            let d = l.get(i, i);
            if !d.is_finite() || d <= 0.0 {
                return Err(GlsError::NotPositiveDefinite { pivot_index: i });
            }
        }
        Ok(CholeskyFactor(l))
    }

    pub(crate) fn from_lower_unchecked(l: Matrix) -> Self {
        CholeskyFactor(l)
    }

    pub fn n(&self) -> usize {
        self.0.rows()
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    /// `L·Lᵀ`, for residual checks.
    pub fn reconstruct(&self) -> Matrix {
        let n = self.n();
        let l = &self.0;
        let mut out = Matrix::zeros(n, n);
        for j in 0..n {
            for i in j..n {
                let mut s = 0.0;
                for k in 0..=j {
                    s += l.get(i, k) * l.get(j, k);
                }
                out.set(i, j, s);
                out.set(j, i, s);
            }
        }
        out
    }
}

/// The SNP-independent covariate columns `X_L` (intercept included), n×(p−1).
#[derive(Clone, Debug)]
pub struct DesignLeft(Matrix);

pub const MIN_P: usize = 2;
pub const MAX_P: usize = 20;

impl DesignLeft {
    pub fn new(m: Matrix) -> Result<Self> {
        let p = m.cols() + 1;
        if !(MIN_P..=MAX_P).contains(&p) {
            return Err(GlsError::dims(format!(
                "design width p = {p} outside [{MIN_P}, {MAX_P}]"
            )));
        }
        if m.cols() > m.rows() {
            return Err(GlsError::dims(format!(
                "{} covariates exceed {} individuals",
                m.cols(),
                m.rows()
            )));
        }
        m.check_finite("covariates")?;
        Ok(DesignLeft(m))
    }

    pub fn n(&self) -> usize {
        self.0.rows()
    }

    /// Total design width including the SNP column.
    pub fn p(&self) -> usize {
        self.0.cols() + 1
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }
}

#[derive(Clone, Debug)]
pub struct Phenotype(Vec<f64>);

impl Phenotype {
    pub fn new(y: Vec<f64>) -> Result<Self> {
        if let Some(index) = y.iter().position(|v| !v.is_finite()) {
            return Err(GlsError::NonFinite {
                what: "phenotype",
                index,
            });
        }
        Ok(Phenotype(y))
    }

    pub fn n(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// A contiguous run of genotype columns starting at global SNP `first_index`.
#[derive(Clone, Debug)]
pub struct SnpBlock {
    first_index: usize,
    data: Matrix,
}

impl SnpBlock {
    pub fn new(first_index: usize, data: Matrix) -> Result<Self> {
        if data.cols() == 0 {
            return Err(GlsError::dims("SNP block must hold at least one column"));
        }
        data.check_finite("genotypes")?;
        Ok(SnpBlock { first_index, data })
    }

    /// Skips the finiteness scan; for buffers coming straight from a validated file.
    pub(crate) fn from_raw(first_index: usize, data: Matrix) -> Self {
        SnpBlock { first_index, data }
    }

    pub fn first_index(&self) -> usize {
        self.first_index
    }

    pub fn count(&self) -> usize {
        self.data.cols()
    }

    pub fn n(&self) -> usize {
        self.data.rows()
    }

    pub fn data(&self) -> &Matrix {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut Matrix {
        &mut self.data
    }

    /// Releases the backing buffer so it can be reused for the next load.
    pub fn into_buffer(self) -> Vec<f64> {
        self.data.into_vec()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SnpStatus {
    Ok,
    /// The p×p normal-equations matrix was numerically singular.
    Degenerate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SnpResult {
    pub snp_index: usize,
    pub beta: Vec<f64>,
    /// `S⁻¹` packed lower-triangular, column by column: entry (i, j), i ≥ j,
    /// lives at `j·p − j·(j−1)/2 + (i − j)`.
    pub s_inv: Option<Vec<f64>>,
    pub status: SnpStatus,
}

impl SnpResult {
    pub fn degenerate(snp_index: usize, p: usize) -> Self {
        SnpResult {
            snp_index,
            beta: vec![f64::NAN; p],
            s_inv: None,
            status: SnpStatus::Degenerate,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == SnpStatus::Ok
    }
}

/// Index of entry (i, j), i ≥ j, in a packed lower triangle of order p.
#[inline]
pub fn packed_index(p: usize, i: usize, j: usize) -> usize {
    debug_assert!(i >= j && i < p);
    j * p - j * j.saturating_sub(1) / 2 + (i - j)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultBlock {
    pub first_index: usize,
    pub results: Vec<SnpResult>,
}

impl ResultBlock {
    pub fn len(&self) -> usize {
        self.results.len()
    }

    pub fn is_empty(&self) -> bool {
        self.results.is_empty()
    }
}
