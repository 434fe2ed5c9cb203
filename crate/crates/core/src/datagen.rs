//! Deterministic synthetic datasets and the reference harness.
//!
//! Randomness comes from a single xoshiro256++ stream seeded through
//! SplitMix64 (`seed_from_u64`). Uniforms take the top 53 bits of each 64-bit
//! output; normals use the cosine branch of Box–Muller evaluated with the
//! pure-Rust `libm`, so generated bytes do not depend on the platform's math
//! library. Draw order is fixed:
//! planted SNP indices and effects, then genotypes SNP by SNP, then
//! covariates column by column, then phenotype noise.

use std::fs::OpenOptions;
use std::io::{BufWriter, Write};
use std::os::unix::fs::FileExt;
use std::path::Path;
use std::time::Instant;

use rand_core::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{GlsError, Result};
use crate::io::{
    read_columns, read_header, read_results, write_results, DatasetPaths, FileHeader, FileKind,
    ResultHeader,
};
use crate::kernel::{
    dot, gls_oracle_factored, gram, lu_factor, CovarianceMatrix, Matrix, SnpResult, SnpStatus,
    MAX_P, MIN_P,
};
use crate::summary::{Mode, RunSummary};

pub const PLANTED_SNPS: usize = 5;
/// SNPs whose outer products are accumulated together when forming `M`.
const GRAM_BATCH: usize = 256;
pub const ORACLE_MAX_N: usize = 500;
pub const ORACLE_MAX_M: usize = 5000;

#[derive(Clone, Debug, PartialEq)]
pub struct GenSpec {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub seed: u64,
    pub maf_range: (f64, f64),
    pub delta: f64,
}

impl GenSpec {
    pub fn new(n: usize, m: usize, p: usize, seed: u64) -> Self {
        GenSpec {
            n,
            m,
            p,
            seed,
            maf_range: (0.05, 0.5),
            delta: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(GlsError::Config(msg));
        if !(MIN_P..=MAX_P).contains(&self.p) {
            return bad(format!("p = {} outside {MIN_P}..={MAX_P}", self.p));
        }
        if self.n == 0 || self.m == 0 {
            return bad("n and m must be at least 1".into());
        }
        if self.n < self.p - 1 {
            return bad(format!(
                "n = {} is smaller than the {} covariate columns",
                self.n,
                self.p - 1
            ));
        }
        let (lo, hi) = self.maf_range;
        if !(0.05 <= lo && lo <= hi && hi <= 0.5) {
            return bad(format!(
                "allele-frequency range [{lo}, {hi}] not within [0.05, 0.5]"
            ));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return bad(format!("ridge {} must be positive", self.delta));
        }
        Ok(())
    }
}

/// What [`gen_dataset`] produced besides the files.
#[derive(Clone, Debug, PartialEq)]
pub struct GenReport {
    pub paths: DatasetPaths,
    /// Planted SNP indices, ascending, with their effect sizes.
    pub planted: Vec<(usize, f64)>,
}

struct Stream(Xoshiro256PlusPlus);

impl Stream {
    fn new(seed: u64) -> Self {
        Stream(Xoshiro256PlusPlus::seed_from_u64(seed))
    }

    /// Uniform in [0, 1).
    fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    fn below(&mut self, k: usize) -> usize {
        ((self.uniform() * k as f64) as usize).min(k - 1)
    }

    fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * std::f64::consts::PI * u2)
    }
}

fn write_header(w: &mut impl Write, kind: FileKind, dims: Vec<u64>) -> Result<()> {
    w.write_all(&FileHeader::new(kind, dims)?.encode())?;
    Ok(())
}

/// Writes the four input files into `out_dir`.
pub fn gen_dataset(spec: &GenSpec, out_dir: &Path) -> Result<GenReport> {
    spec.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let paths = DatasetPaths::in_dir(out_dir);
    let GenSpec { n, m, p, .. } = *spec;
    let mut rng = Stream::new(spec.seed);

    let mut planted: Vec<(usize, f64)> = Vec::new();
    while planted.len() < PLANTED_SNPS.min(m) {
        let idx = rng.below(m);
        if planted.iter().all(|&(i, _)| i != idx) {
            let sign = if rng.uniform() < 0.5 { -1.0 } else { 1.0 };
            planted.push((idx, sign));
        }
    }
    planted.sort_by_key(|&(i, _)| i);

    let mut signal = vec![0.0; n];
    let mut gram = vec![0.0; n * n];
    let mut geno = BufWriter::with_capacity(1 << 20, std::fs::File::create(&paths.genotypes)?);
    write_header(&mut geno, FileKind::Genotypes, vec![n as u64, m as u64])?;
    // Row-major n × batch so each individual's dosages are contiguous.
    let mut batch = vec![0.0; n * GRAM_BATCH];
    let (lo, hi) = spec.maf_range;
    let mut first = 0;
    while first < m {
        let width = GRAM_BATCH.min(m - first);
        for k in 0..width {
            let f = lo + (hi - lo) * rng.uniform();
            let effect = planted
                .iter()
                .find(|&&(i, _)| i == first + k)
                .map(|&(_, e)| e);
            for i in 0..n {
                let a = (rng.uniform() < f) as u8;
                let b = (rng.uniform() < f) as u8;
                let g = f64::from(a + b);
                geno.write_all(&g.to_le_bytes())?;
                batch[i * width + k] = g;
                if let Some(e) = effect {
                    signal[i] += e * g;
                }
            }
        }
        // Integer-valued products and sums stay exact, so the batching does
        // not affect the bits of M.
        for i in 0..n {
            let gi = &batch[i * width..(i + 1) * width];
            for j in 0..=i {
                gram[i * n + j] += dot(gi, &batch[j * width..(j + 1) * width]);
            }
        }
        first += width;
    }
    geno.flush()?;
    drop(geno);

    let mut cov = BufWriter::new(std::fs::File::create(&paths.covariance)?);
    write_header(&mut cov, FileKind::Covariance, vec![n as u64])?;
    for j in 0..n {
        for i in 0..n {
            let k = if i >= j {
                gram[i * n + j]
            } else {
                gram[j * n + i]
            };
            let v = k / m as f64 + if i == j { spec.delta } else { 0.0 };
            cov.write_all(&v.to_le_bytes())?;
        }
    }
    cov.flush()?;
    drop(gram);

    let mut covariates = vec![1.0; n * (p - 1)];
    for v in covariates[n..].iter_mut() {
        *v = rng.normal();
    }
    let mut xl = BufWriter::new(std::fs::File::create(&paths.covariates)?);
    write_header(
        &mut xl,
        FileKind::Covariates,
        vec![n as u64, (p - 1) as u64],
    )?;
    for v in &covariates {
        xl.write_all(&v.to_le_bytes())?;
    }
    xl.flush()?;

    let mut pheno = BufWriter::new(std::fs::File::create(&paths.phenotype)?);
    write_header(&mut pheno, FileKind::Phenotype, vec![n as u64])?;
    for i in 0..n {
        let fixed: f64 = (0..p - 1).map(|c| covariates[c * n + i]).sum();
        let y = 0.5 * fixed + signal[i] + rng.normal();
        pheno.write_all(&y.to_le_bytes())?;
    }
    pheno.flush()?;

    Ok(GenReport { paths, planted })
}

/// A `rows × cols` matrix of standard normals, drawn column by column.
pub fn normal_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = Stream::new(seed);
    let data = (0..rows * cols).map(|_| rng.normal()).collect();
    Matrix::from_col_major(rows, cols, data).expect("length matches shape")
}

/// A well-conditioned SPD matrix `AᵀA/k + I`, where `A` is `k × n` standard
/// normal with `k = n + 8`. Exactly symmetric.
pub fn spd_matrix(n: usize, seed: u64) -> CovarianceMatrix {
    let k = n + 8;
    let mut m = gram(&normal_matrix(k, n, seed));
    for v in m.as_mut_slice() {
        *v /= k as f64;
    }
    for i in 0..n {
        m.set(i, i, m.get(i, i) + 1.0);
    }
    CovarianceMatrix::new(m).expect("symmetric and finite by construction")
}

/// Overwrites genotype column `index` in place. Used to build datasets with
/// known degenerate SNPs; `M` is left as generated.
pub fn overwrite_snp(paths: &DatasetPaths, index: usize, values: &[f64]) -> Result<()> {
    let header = read_header(&paths.genotypes, FileKind::Genotypes)?;
    let (n, m) = header.shape();
    if values.len() != n || index >= m {
        return Err(GlsError::dims(format!(
            "column {index} of length {} does not fit a {n}x{m} genotype file",
            values.len()
        )));
    }
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    let file = OpenOptions::new().write(true).open(&paths.genotypes)?;
    file.write_all_at(
        &bytes,
        FileKind::Genotypes.header_len() + (index * n * 8) as u64,
    )?;
    Ok(())
}

/// Solves every SNP literally, one at a time, and writes the result file.
/// Nothing computed for one SNP is reused for the next; only the LU factors
/// of `M` are shared.
pub fn oracle_solve_all(paths: &DatasetPaths, out: &Path) -> Result<RunSummary> {
    let started = Instant::now();
    let dims = paths.dimensions()?;
    if dims.n > ORACLE_MAX_N || dims.m > ORACLE_MAX_M {
        return Err(GlsError::Config(format!(
            "the reference solver is limited to n <= {ORACLE_MAX_N} and m <= {ORACLE_MAX_M}, got n = {} and m = {}",
            dims.n, dims.m
        )));
    }
    let (n, m, p) = (dims.n, dims.m, dims.p);
    let mut summary = RunSummary::new(Mode::Oracle);
    summary.n = n;
    summary.m = m;
    summary.p = p;
    summary.m_blk = 1;
    summary.blocks = m;

    let t = Instant::now();
    let cov = paths.load_covariance()?;
    let floor = n as f64 * f64::EPSILON * cov.as_matrix().max_abs();
    let lu = lu_factor(cov.as_matrix(), floor)?;
    drop(cov);
    let xl = paths.load_covariates()?;
    let y = paths.load_phenotype()?;
    summary.prepare_s = t.elapsed().as_secs_f64();

    let mut results = Vec::with_capacity(m);
    let mut design = Matrix::zeros(n, p);
    for c in 0..p - 1 {
        design.col_mut(c).copy_from_slice(xl.as_matrix().col(c));
    }
    for i in 0..m {
        let t = Instant::now();
        let col = read_columns(&paths.genotypes, FileKind::Genotypes, i, 1)?;
        summary.io_wait_s += t.elapsed().as_secs_f64();
        col.check_finite("genotypes")?;
        summary.bytes_read += (n * 8) as u64;
        design.col_mut(p - 1).copy_from_slice(col.col(0));
        let t = Instant::now();
        results.push(match gls_oracle_factored(&lu, &design, y.as_slice()) {
            Ok(beta) => SnpResult {
                snp_index: i,
                beta,
                s_inv: None,
                status: SnpStatus::Ok,
            },
            Err(GlsError::Singular { .. }) => SnpResult::degenerate(i, p),
            Err(e) => return Err(e),
        });
        summary.compute_s += t.elapsed().as_secs_f64();
    }
    let header = ResultHeader::new(m, p, false);
    let t = Instant::now();
    write_results(out, &header, &results)?;
    summary.io_wait_s += t.elapsed().as_secs_f64();
    summary.bytes_written = m as u64 * header.record_size();
    summary.stream_s = summary.compute_s + summary.io_wait_s;
    summary.total_s = started.elapsed().as_secs_f64();
    Ok(summary)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompareReport {
    pub m: usize,
    pub p: usize,
    /// Largest `‖b_a − b_b‖∞ / max(‖b_b‖∞, tiny)` over SNPs that are ok in both.
    pub max_rel_diff: f64,
    /// SNP with the largest discrepancy, if any were compared.
    pub worst_snp: Option<usize>,
    pub status_mismatches: usize,
    pub compared: usize,
    pub tol: f64,
}

impl CompareReport {
    pub fn passed(&self) -> bool {
        self.status_mismatches == 0 && self.max_rel_diff <= self.tol
    }
}

/// Compares two result files on betas only.
pub fn compare_results(a: &Path, b: &Path, tol: f64) -> Result<CompareReport> {
    let (ha, ra) = read_results(a)?;
    let (hb, rb) = read_results(b)?;
    if ha.m != hb.m || ha.p != hb.p {
        return Err(GlsError::dims(format!(
            "result files differ in shape: {}x{} vs {}x{}",
            ha.m, ha.p, hb.m, hb.p
        )));
    }
    Ok(compare_result_sets(&ra, &rb, ha.p, tol))
}

pub fn compare_result_sets(a: &[SnpResult], b: &[SnpResult], p: usize, tol: f64) -> CompareReport {
    let mut report = CompareReport {
        m: a.len(),
        p,
        max_rel_diff: 0.0,
        worst_snp: None,
        status_mismatches: 0,
        compared: 0,
        tol,
    };
    for (x, y) in a.iter().zip(b) {
        if x.status != y.status {
            report.status_mismatches += 1;
            continue;
        }
        if !x.is_ok() {
            continue;
        }
        report.compared += 1;
        let scale = y
            .beta
            .iter()
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        let diff = x
            .beta
            .iter()
            .zip(&y.beta)
            .fold(0.0f64, |acc, (u, v)| acc.max((u - v).abs()));
        // NaN in an "ok" record counts as an infinite discrepancy.
        let rel = if diff.is_nan() {
            f64::INFINITY
        } else {
            diff / scale
        };
        if report.worst_snp.is_none() || rel > report.max_rel_diff {
            report.max_rel_diff = rel;
            report.worst_snp = Some(x.snp_index);
        }
    }
    report.status_mismatches += a.len().abs_diff(b.len());
    report
}
