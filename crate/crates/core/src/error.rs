use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = GlsError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum GlsError {
    #[error("matrix is not positive definite (pivot {pivot_index})")]
    NotPositiveDefinite { pivot_index: usize },

    #[error("covariate columns are rank deficient after whitening")]
    RankDeficientCovariates,

    #[error("singular system in reference solver (pivot {pivot_index})")]
    Singular { pivot_index: usize },

    #[error("covariance matrix is not symmetric: M[{i},{j}] != M[{j},{i}]")]
    Asymmetric { i: usize, j: usize },

    #[error("non-finite value in {what} at flat index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error(
        "{path}: bad magic (expected {:?}, found {:?})",
        String::from_utf8_lossy(expected),
        String::from_utf8_lossy(found)
    )]
    BadMagic {
        path: PathBuf,
        expected: [u8; 4],
        found: [u8; 4],
    },

    #[error("{path}: unsupported format version {version}")]
    UnsupportedVersion { path: PathBuf, version: u32 },

    #[error("{path}: truncated file (expected {expected} bytes, found {found})")]
    TruncatedFile {
        path: PathBuf,
        expected: u64,
        found: u64,
    },

    #[error("short write at offset {offset}")]
    ShortWrite { offset: u64 },

    #[error("buffer slot {slot} is already owned by an in-flight transfer")]
    OverlappingBuffer { slot: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("transport failure on rank {rank}: {reason}")]
    TransportFailure { rank: usize, reason: String },

    #[error("collective size mismatch: expected {expected}, got {actual}")]
    SizeMismatch { expected: usize, actual: usize },

    #[error("{path}: {source}")]
    Open {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl GlsError {
    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        GlsError::DimensionMismatch(msg.into())
    }

    pub(crate) fn open(path: &std::path::Path, source: std::io::Error) -> Self {
        GlsError::Open {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Short stable identifier used in machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            GlsError::NotPositiveDefinite { .. } => "not_positive_definite",
            GlsError::RankDeficientCovariates => "rank_deficient_covariates",
            GlsError::Singular { .. } => "singular",
            GlsError::Asymmetric { .. } => "asymmetric",
            GlsError::NonFinite { .. } => "non_finite",
            GlsError::DimensionMismatch(_) => "dimension_mismatch",
            GlsError::BadMagic { .. } => "bad_magic",
            GlsError::UnsupportedVersion { .. } => "unsupported_version",
            GlsError::TruncatedFile { .. } => "truncated_file",
            GlsError::ShortWrite { .. } => "short_write",
            GlsError::OverlappingBuffer { .. } => "overlapping_buffer",
            GlsError::Config(_) => "config",
            GlsError::TransportFailure { .. } => "transport_failure",
            GlsError::SizeMismatch { .. } => "size_mismatch",
            GlsError::Open { .. } | GlsError::Io(_) => "io",
        }
    }

    /// Numerical failures, as opposed to bad data or configuration.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            GlsError::NotPositiveDefinite { .. }
                | GlsError::RankDeficientCovariates
                | GlsError::Singular { .. }
        )
    }
}
