//! Fixtures shared by the benches.

use gwas_gls::datagen::{normal_matrix, spd_matrix};
use gwas_gls::{CovarianceMatrix, DesignLeft, Phenotype, SnpBlock};

/// A dense GLS problem: covariance, covariates with an intercept, phenotype
/// and one block of `m` SNP columns.
pub struct Problem {
    pub m_cov: CovarianceMatrix,
    pub xl: DesignLeft,
    pub y: Phenotype,
    pub snps: SnpBlock,
}

pub fn problem(n: usize, p: usize, m: usize, seed: u64) -> Problem {
    let mut xl = normal_matrix(n, p - 1, seed);
    xl.col_mut(0).fill(1.0);
    Problem {
        m_cov: spd_matrix(n, seed),
        xl: DesignLeft::new(xl).expect("covariates"),
        y: Phenotype::new(normal_matrix(n, 1, seed + 1).into_vec()).expect("phenotype"),
        snps: SnpBlock::new(0, normal_matrix(n, m, seed + 2)).expect("snps"),
    }
}
