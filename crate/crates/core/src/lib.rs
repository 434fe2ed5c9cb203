//! Per-SNP generalized least squares for genome-wide association studies.
//!
//! All SNPs share `M`, the covariates `X_L` and the phenotype `y`, so `M` is
//! factored once and each SNP costs one triangular solve of its own column
//! plus a p×p solve. The sweep runs in memory ([`pipeline::run_incore`]),
//! streamed from disk with double-buffered I/O ([`pipeline::run_ooc`]), or
//! over a grid of cooperating ranks ([`distgrid::run_dist_inproc`]).

pub mod datagen;
pub mod distgrid;
pub mod error;
pub mod io;
pub mod kernel;
pub mod pipeline;
pub mod summary;

pub use error::{GlsError, Result};
pub use io::{DatasetPaths, Dimensions};
pub use kernel::{
    CholeskyFactor, CovarianceMatrix, DesignLeft, Matrix, Phenotype, ResultBlock, SnpBlock,
    SnpResult, SnpStatus,
};
pub use pipeline::PipelineConfig;
pub use summary::{Mode, RunSummary};
