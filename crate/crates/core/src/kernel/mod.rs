//! Dense linear-algebra core: Cholesky, triangular solves, the structured GLS
//! sweep and the unstructured reference solver.

mod cholesky;
mod gls;
mod matrix;
mod oracle;
mod trsolve;
mod types;

pub use cholesky::{cholesky_in_place, cholesky_spd, solve_small_spd, DEFAULT_PANEL_WIDTH};
pub use gls::{
    gls_prepare, gls_solve_block, gls_solve_block_in_place, PreparedContext, SolveOptions,
    WhitenedCovariates,
};
pub use matrix::{max_abs_diff, Matrix};
pub use oracle::{gls_oracle, gls_oracle_factored, lu_factor, ols_normal_equations, LuFactor};
pub use trsolve::{gram, transpose_times_vec, trsolve_lower, trsolve_lower_in_place};
pub use types::{
    packed_index, CholeskyFactor, CovarianceMatrix, DesignLeft, Phenotype, ResultBlock, SnpBlock,
    SnpResult, SnpStatus, MAX_P, MIN_P,
};

pub(crate) use cholesky::factor_panel;
pub(crate) use matrix::dot;
