//! Structure-exploiting GLS sweep.
//!
//! Everything that does not depend on the SNP (the factor `L`, the whitened
//! covariates `X̄_L = L⁻¹X_L`, `ȳ = L⁻¹y`, `S_TL = X̄_LᵀX̄_L` and
//! `b_T = X̄_Lᵀȳ`) is computed once. Per block of SNPs only the block is
//! whitened, the `S_BL` rows are formed as one stacked product against `X̄_L`,
//! and each SNP then assembles and solves its own p×p system.

use rayon::prelude::*;

use super::cholesky::{
    lower_max_abs, small_cholesky, small_cholesky_inverse_packed, small_cholesky_solve,
};
use super::matrix::{dot, Matrix};
use super::trsolve::{forward_substitute, gram, transpose_times_vec, trsolve_lower};
use super::types::{
    CholeskyFactor, CovarianceMatrix, DesignLeft, Phenotype, ResultBlock, SnpBlock, SnpResult,
    SnpStatus,
};
use crate::error::{GlsError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SolveOptions {
    /// Worker threads for the per-block sweep; 1 runs on the caller's thread.
    pub threads: usize,
    /// Also return the packed `S⁻¹` for every SNP.
    pub emit_s_inv: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            threads: 1,
            emit_s_inv: false,
        }
    }
}

/// The whitened covariates and phenotype plus their SNP-independent products.
#[derive(Clone, Debug)]
pub struct WhitenedCovariates {
    xl_bar: Matrix,
    y_bar: Vec<f64>,
    s_tl: Matrix,
    b_t: Vec<f64>,
}

impl WhitenedCovariates {
    /// Forms `S_TL` and `b_T`; fails if `S_TL` is not numerically positive definite.
    pub fn new(xl_bar: Matrix, y_bar: Vec<f64>) -> Result<Self> {
        if xl_bar.rows() != y_bar.len() {
            return Err(GlsError::dims(
                "whitened covariates and phenotype differ in n",
            ));
        }
        let s_tl = gram(&xl_bar);
        let b_t = transpose_times_vec(&xl_bar, &y_bar)?;
        let q = s_tl.rows();
        let mut scratch = s_tl.as_slice().to_vec();
        let floor = pivot_floor(xl_bar.rows(), &scratch, q);
        if small_cholesky(&mut scratch, q, floor).is_err() {
            return Err(GlsError::RankDeficientCovariates);
        }
        Ok(WhitenedCovariates {
            xl_bar,
            y_bar,
            s_tl,
            b_t,
        })
    }

    pub fn n(&self) -> usize {
        self.xl_bar.rows()
    }

    pub fn p(&self) -> usize {
        self.xl_bar.cols() + 1
    }

    pub fn xl_bar(&self) -> &Matrix {
        &self.xl_bar
    }

    pub fn y_bar(&self) -> &[f64] {
        &self.y_bar
    }

    pub fn s_tl(&self) -> &Matrix {
        &self.s_tl
    }

    pub fn b_t(&self) -> &[f64] {
        &self.b_t
    }

    /// `S_blk = X̄_blkᵀ·X̄_L` as stacked rows, one row of length p−1 per SNP.
    pub fn stacked_cross(&self, xbar: &[f64]) -> Vec<f64> {
        let n = self.n();
        let q = self.xl_bar.cols();
        let mut out = Vec::with_capacity(xbar.len() / n.max(1) * q);
        for col in xbar.chunks_exact(n) {
            for k in 0..q {
                out.push(dot(col, self.xl_bar.col(k)));
            }
        }
        out
    }

    /// Solves every SNP of an already whitened column-major block.
    ///
    /// Column `t` of `xbar` is SNP `first_index + t`.
    pub fn solve_whitened(
        &self,
        xbar: &[f64],
        first_index: usize,
        emit_s_inv: bool,
    ) -> Vec<SnpResult> {
        let n = self.n();
        let q = self.xl_bar.cols();
        let s_blk = self.stacked_cross(xbar);
        xbar.chunks_exact(n)
            .enumerate()
            .map(|(t, col)| {
                let s_bl = &s_blk[t * q..(t + 1) * q];
                let s_br = dot(col, col);
                let b_b = dot(col, &self.y_bar);
                self.solve_one(first_index + t, s_bl, s_br, b_b, emit_s_inv)
            })
            .collect()
    }

    fn solve_one(
        &self,
        snp_index: usize,
        s_bl: &[f64],
        s_br: f64,
        b_b: f64,
        emit_s_inv: bool,
    ) -> SnpResult {
        let q = self.xl_bar.cols();
        let p = q + 1;
        let mut s = vec![0.0; p * p];
        for j in 0..q {
            for i in j..q {
                s[i + j * p] = self.s_tl.get(i, j);
            }
            s[q + j * p] = s_bl[j];
        }
        s[q + q * p] = s_br;

        let floor = pivot_floor(self.n(), &s, p);
        if small_cholesky(&mut s, p, floor).is_err() {
            return SnpResult::degenerate(snp_index, p);
        }
        let mut beta = Vec::with_capacity(p);
        beta.extend_from_slice(&self.b_t);
        beta.push(b_b);
        small_cholesky_solve(&s, p, &mut beta);
        SnpResult {
            snp_index,
            beta,
            s_inv: emit_s_inv.then(|| small_cholesky_inverse_packed(&s, p)),
            status: SnpStatus::Ok,
        }
    }
}

/// Pivot acceptance threshold `n·ε·max|S|` for the small systems.
fn pivot_floor(n: usize, s: &[f64], p: usize) -> f64 {
    n as f64 * f64::EPSILON * lower_max_abs(s, p)
}

/// SNP-independent state of the sweep.
#[derive(Clone, Debug)]
pub struct PreparedContext {
    factor: CholeskyFactor,
    covariates: WhitenedCovariates,
}

impl PreparedContext {
    pub fn from_factor(factor: CholeskyFactor, xl: &DesignLeft, y: &Phenotype) -> Result<Self> {
        let n = factor.n();
        if xl.n() != n || y.n() != n {
            return Err(GlsError::dims(format!(
                "covariance is {n}x{n} but covariates have {} rows and phenotype {} entries",
                xl.n(),
                y.n()
            )));
        }
        let xl_bar = trsolve_lower(&factor, xl.as_matrix())?;
        let y_bar =
            trsolve_lower(&factor, &Matrix::column_vector(y.as_slice().to_vec()))?.into_vec();
        let covariates = WhitenedCovariates::new(xl_bar, y_bar)?;
        Ok(PreparedContext { factor, covariates })
    }

    pub fn factor(&self) -> &CholeskyFactor {
        &self.factor
    }

    pub fn covariates(&self) -> &WhitenedCovariates {
        &self.covariates
    }

    pub fn n(&self) -> usize {
        self.factor.n()
    }

    pub fn p(&self) -> usize {
        self.covariates.p()
    }

    pub fn xl_bar(&self) -> &Matrix {
        self.covariates.xl_bar()
    }

    pub fn y_bar(&self) -> &[f64] {
        self.covariates.y_bar()
    }

    pub fn s_tl(&self) -> &Matrix {
        self.covariates.s_tl()
    }

    pub fn b_t(&self) -> &[f64] {
        self.covariates.b_t()
    }
}

/// Factors `M`, whitens covariates and phenotype, forms `S_TL` and `b_T`.
pub fn gls_prepare(
    m: &CovarianceMatrix,
    xl: &DesignLeft,
    y: &Phenotype,
) -> Result<PreparedContext> {
    if m.n() != xl.n() || m.n() != y.n() {
        return Err(GlsError::dims(format!(
            "covariance is {0}x{0} but covariates have {1} rows and phenotype {2} entries",
            m.n(),
            xl.n(),
            y.n()
        )));
    }
    let factor = CholeskyFactor::factor(m.clone())?;
    PreparedContext::from_factor(factor, xl, y)
}

/// Solves all SNPs of `blk`; the block itself is left untouched.
pub fn gls_solve_block(
    ctx: &PreparedContext,
    blk: &SnpBlock,
    opts: &SolveOptions,
) -> Result<ResultBlock> {
    let mut scratch = blk.clone();
    gls_solve_block_in_place(ctx, &mut scratch, opts)
}

/// Like [`gls_solve_block`] but whitens the block's columns in place, so the
/// caller's buffer holds `X̄_blk` afterwards.
pub fn gls_solve_block_in_place(
    ctx: &PreparedContext,
    blk: &mut SnpBlock,
    opts: &SolveOptions,
) -> Result<ResultBlock> {
    let n = ctx.n();
    if blk.n() != n {
        return Err(GlsError::dims(format!(
            "SNP block has {} rows, context expects {n}",
            blk.n()
        )));
    }
    let first = blk.first_index();
    let count = blk.count();
    let l = ctx.factor().as_matrix();
    let cov = ctx.covariates();
    let data = blk.data_mut().as_mut_slice();

    let results = if opts.threads <= 1 || count < 2 {
        forward_substitute(l, data, n);
        cov.solve_whitened(data, first, opts.emit_s_inv)
    } else {
        let per = count.div_ceil(opts.threads);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.threads)
            .build()
            .map_err(|e| GlsError::Config(format!("thread pool: {e}")))?;
        let parts: Vec<Vec<SnpResult>> = pool.install(|| {
            data.par_chunks_mut(per * n)
                .enumerate()
                .map(|(k, part)| {
                    forward_substitute(l, part, n);
                    cov.solve_whitened(part, first + k * per, opts.emit_s_inv)
                })
                .collect()
        });
        parts.into_iter().flatten().collect()
    };
    Ok(ResultBlock {
        first_index: first,
        results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> (CovarianceMatrix, DesignLeft, Phenotype) {
        (
            CovarianceMatrix::new(Matrix::identity(3)).unwrap(),
            DesignLeft::new(Matrix::column_vector(vec![1.0; 3])).unwrap(),
            Phenotype::new(vec![1.0, 2.0, 3.0]).unwrap(),
        )
    }

    #[test]
    fn prepare_identity_covariance() {
        let (m, xl, y) = tiny();
        let ctx = gls_prepare(&m, &xl, &y).unwrap();
        assert_eq!(ctx.xl_bar().as_slice(), &[1.0, 1.0, 1.0]);
        assert_eq!(ctx.y_bar(), &[1.0, 2.0, 3.0]);
        assert_eq!(ctx.s_tl().as_slice(), &[3.0]);
        assert_eq!(ctx.b_t(), &[6.0]);
    }

    #[test]
    fn prepare_scalar_covariance() {
        let (m, xl, y) = tiny();
        let ctx = gls_prepare(&m.scaled(2.0), &xl, &y).unwrap();
        let r = 1.0 / 2f64.sqrt();
        for &v in ctx.xl_bar().as_slice() {
            assert!((v - r).abs() < 1e-15);
        }
        assert!((ctx.s_tl().get(0, 0) - 1.5).abs() < 1e-14);
        assert!((ctx.b_t()[0] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn hand_checkable_ols() {
        // XᵀX = [[3,3],[3,5]], Xᵀy = [6,8] ⇒ b = [1,1]
        let (m, xl, y) = tiny();
        let ctx = gls_prepare(&m, &xl, &y).unwrap();
        let blk = SnpBlock::new(7, Matrix::column_vector(vec![0.0, 1.0, 2.0])).unwrap();
        let out = gls_solve_block(&ctx, &blk, &SolveOptions::default()).unwrap();
        assert_eq!(out.first_index, 7);
        let r = &out.results[0];
        assert_eq!(r.snp_index, 7);
        assert_eq!(r.status, SnpStatus::Ok);
        assert!((r.beta[0] - 1.0).abs() < 1e-14 && (r.beta[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn intercept_duplicate_and_zero_column_are_degenerate() {
        let (m, xl, y) = tiny();
        let ctx = gls_prepare(&m, &xl, &y).unwrap();
        let blk = SnpBlock::new(
            0,
            Matrix::from_col_major(3, 3, vec![1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 2.0])
                .unwrap(),
        )
        .unwrap();
        let out = gls_solve_block(
            &ctx,
            &blk,
            &SolveOptions {
                threads: 1,
                emit_s_inv: true,
            },
        )
        .unwrap();
        for r in &out.results[..2] {
            assert_eq!(r.status, SnpStatus::Degenerate);
            assert!(r.beta.iter().all(|v| v.is_nan()));
            assert!(r.s_inv.is_none());
        }
        assert!(out.results[2].is_ok());
        assert_eq!(out.results[2].s_inv.as_ref().unwrap().len(), 3);
    }

    #[test]
    fn rank_deficient_covariates_rejected() {
        let m = CovarianceMatrix::new(Matrix::identity(3)).unwrap();
        let xl = DesignLeft::new(
            Matrix::from_col_major(3, 2, vec![1.0, 1.0, 1.0, 2.0, 2.0, 2.0]).unwrap(),
        )
        .unwrap();
        let y = Phenotype::new(vec![1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(
            gls_prepare(&m, &xl, &y),
            Err(GlsError::RankDeficientCovariates)
        ));
    }

    #[test]
    fn wrong_block_height_rejected() {
        let (m, xl, y) = tiny();
        let ctx = gls_prepare(&m, &xl, &y).unwrap();
        let blk = SnpBlock::new(0, Matrix::zeros(4, 1)).unwrap();
        assert!(gls_solve_block(&ctx, &blk, &SolveOptions::default()).is_err());
    }
}
