//! File formats and synchronous/asynchronous transfer primitives.

mod async_io;
mod format;

pub use async_io::{
    BlockReader, InputBuffer, IoCounters, LoadTicket, LoadedBlock, OutputBuffer, ResultWriter,
    StoreTicket,
};
pub use format::{
    create_result_file, read_columns, read_header, read_matrix, read_result_header, read_results,
    write_matrix, write_results, FileHeader, FileKind, ResultHeader, FLAG_S_INV, FORMAT_VERSION,
};

use std::path::{Path, PathBuf};

use crate::error::{GlsError, Result};
use crate::kernel::{CovarianceMatrix, DesignLeft, Phenotype};

/// Input and output locations of one run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetPaths {
    pub covariance: PathBuf,
    pub covariates: PathBuf,
    pub phenotype: PathBuf,
    pub genotypes: PathBuf,
}

/// Problem dimensions read from the input headers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dimensions {
    pub n: usize,
    pub m: usize,
    pub p: usize,
}

impl DatasetPaths {
    pub fn in_dir(dir: &Path) -> Self {
        DatasetPaths {
            covariance: dir.join("covariance.bin"),
            covariates: dir.join("covariates.bin"),
            phenotype: dir.join("phenotype.bin"),
            genotypes: dir.join("genotypes.bin"),
        }
    }

    /// Reads all four headers and checks they agree on `n`.
    pub fn dimensions(&self) -> Result<Dimensions> {
        let (n_m, _) = read_header(&self.covariance, FileKind::Covariance)?.shape();
        let (n_c, q) = read_header(&self.covariates, FileKind::Covariates)?.shape();
        let (n_y, _) = read_header(&self.phenotype, FileKind::Phenotype)?.shape();
        let (n_x, m) = read_header(&self.genotypes, FileKind::Genotypes)?.shape();
        if n_c != n_m || n_y != n_m || n_x != n_m {
            return Err(GlsError::dims(format!(
                "inputs disagree on n: covariance {n_m}, covariates {n_c}, phenotype {n_y}, genotypes {n_x}"
            )));
        }
        Ok(Dimensions {
            n: n_m,
            m,
            p: q + 1,
        })
    }

    pub fn load_covariance(&self) -> Result<CovarianceMatrix> {
        CovarianceMatrix::new(read_matrix(&self.covariance, FileKind::Covariance)?)
    }

    pub fn load_covariates(&self) -> Result<DesignLeft> {
        DesignLeft::new(read_matrix(&self.covariates, FileKind::Covariates)?)
    }

    pub fn load_phenotype(&self) -> Result<Phenotype> {
        Phenotype::new(read_matrix(&self.phenotype, FileKind::Phenotype)?.into_vec())
    }
}
