//! Binary file formats.
//!
//! Every file starts with a 4-byte ASCII magic, a little-endian `u32` version
//! (always 1) and a kind-specific list of little-endian `u64` dimensions. The
//! payload follows immediately: IEEE-754 `f64` values, little-endian,
//! column-major, no padding.
//!
//! | kind        | magic  | dims            | payload                      |
//! |-------------|--------|-----------------|------------------------------|
//! | covariance  | `GWAM` | n               | n×n                          |
//! | genotypes   | `GWAX` | n, m            | n×m (one SNP per column)     |
//! | covariates  | `GWAC` | n, p−1          | n×(p−1)                      |
//! | phenotype   | `GWAY` | n               | n                            |
//! | results     | `GWAB` | m, p, flags     | m records                    |
//!
//! A result record is `p` betas followed, when `flags` bit 0 is set, by the
//! `p(p+1)/2` packed lower triangle of `S⁻¹`. Degenerate SNPs are stored as
//! all-NaN records.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Read, Write};
use std::os::unix::fs::FileExt;
use std::path::Path;

use crate::error::{GlsError, Result};
use crate::kernel::{Matrix, SnpResult, SnpStatus};

pub const FORMAT_VERSION: u32 = 1;
pub const FLAG_S_INV: u64 = 1;
const F64_BYTES: u64 = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FileKind {
    Covariance,
    Genotypes,
    Covariates,
    Phenotype,
    Results,
}

impl FileKind {
    pub fn magic(self) -> [u8; 4] {
        match self {
            FileKind::Covariance => *b"GWAM",
            FileKind::Genotypes => *b"GWAX",
            FileKind::Covariates => *b"GWAC",
            FileKind::Phenotype => *b"GWAY",
            FileKind::Results => *b"GWAB",
        }
    }

    pub fn dim_count(self) -> usize {
        match self {
            FileKind::Covariance | FileKind::Phenotype => 1,
            FileKind::Genotypes | FileKind::Covariates => 2,
            FileKind::Results => 3,
        }
    }

    pub fn header_len(self) -> u64 {
        8 + 8 * self.dim_count() as u64
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FileHeader {
    pub kind: FileKind,
    pub dims: Vec<u64>,
}

impl FileHeader {
    pub fn new(kind: FileKind, dims: Vec<u64>) -> Result<Self> {
        if dims.len() != kind.dim_count() {
            return Err(GlsError::dims(format!(
                "{kind:?} header takes {} dims, got {}",
                kind.dim_count(),
                dims.len()
            )));
        }
        // the flags word of a result header may legitimately be zero
        let checked = if kind == FileKind::Results {
            &dims[..2]
        } else {
            &dims[..]
        };
        if checked.contains(&0) {
            return Err(GlsError::dims(format!(
                "{kind:?} header has a zero dimension"
            )));
        }
        Ok(FileHeader { kind, dims })
    }

    pub fn for_matrix(kind: FileKind, m: &Matrix) -> Result<Self> {
        let (r, c) = (m.rows() as u64, m.cols() as u64);
        let dims = match kind {
            FileKind::Covariance if r == c => vec![r],
            FileKind::Covariance => {
                return Err(GlsError::dims(format!(
                    "covariance must be square, got {r}x{c}"
                )))
            }
            FileKind::Genotypes | FileKind::Covariates => vec![r, c],
            FileKind::Phenotype if c == 1 => vec![r],
            FileKind::Phenotype => return Err(GlsError::dims("phenotype must be a single column")),
            FileKind::Results => {
                return Err(GlsError::dims(
                    "result files are written with write_results",
                ))
            }
        };
        FileHeader::new(kind, dims)
    }

    /// Matrix shape of the payload (rows, cols). Result files report
    /// (record length, m).
    pub fn shape(&self) -> (usize, usize) {
        let d = &self.dims;
        match self.kind {
            FileKind::Covariance => (d[0] as usize, d[0] as usize),
            FileKind::Genotypes | FileKind::Covariates => (d[0] as usize, d[1] as usize),
            FileKind::Phenotype => (d[0] as usize, 1),
            FileKind::Results => {
                let h = ResultHeader::from_dims(d);
                (h.record_len(), h.m)
            }
        }
    }

    pub fn payload_len(&self) -> u64 {
        let (r, c) = self.shape();
        r as u64 * c as u64 * F64_BYTES
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.kind.header_len() as usize);
        out.extend_from_slice(&self.kind.magic());
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        for d in &self.dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
        out
    }

    /// Reads and validates the header of `path`, including the total file length.
    pub fn read(path: &Path, kind: FileKind) -> Result<Self> {
        let mut file = File::open(path).map_err(|e| GlsError::open(path, e))?;
        let found_len = file.metadata()?.len();
        let header_len = kind.header_len();
        let mut buf = vec![0u8; header_len as usize];
        let mut got = 0;
        while got < buf.len() {
            match file.read(&mut buf[got..])? {
                0 => break,
                k => got += k,
            }
        }
        if got >= 4 {
            let found: [u8; 4] = buf[..4].try_into().unwrap();
            if found != kind.magic() {
                return Err(GlsError::BadMagic {
                    path: path.to_path_buf(),
                    expected: kind.magic(),
                    found,
                });
            }
        }
        if got < buf.len() {
            return Err(GlsError::TruncatedFile {
                path: path.to_path_buf(),
                expected: header_len,
                found: found_len,
            });
        }
        let version = u32::from_le_bytes(buf[4..8].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(GlsError::UnsupportedVersion {
                path: path.to_path_buf(),
                version,
            });
        }
        let dims = buf[8..]
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let header = FileHeader::new(kind, dims)?;
        let expected = header_len + header.payload_len();
        if found_len < expected {
            return Err(GlsError::TruncatedFile {
                path: path.to_path_buf(),
                expected,
                found: found_len,
            });
        }
        if found_len > expected {
            return Err(GlsError::dims(format!(
                "{}: {} trailing bytes after payload",
                path.display(),
                found_len - expected
            )));
        }
        Ok(header)
    }
}

/// Decoded dims of a `GWAB` header.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ResultHeader {
    pub m: usize,
    pub p: usize,
    pub flags: u64,
}

impl ResultHeader {
    pub fn new(m: usize, p: usize, emit_s_inv: bool) -> Self {
        ResultHeader {
            m,
            p,
            flags: if emit_s_inv { FLAG_S_INV } else { 0 },
        }
    }

    fn from_dims(d: &[u64]) -> Self {
        ResultHeader {
            m: d[0] as usize,
            p: d[1] as usize,
            flags: d[2],
        }
    }

    pub fn has_s_inv(&self) -> bool {
        self.flags & FLAG_S_INV != 0
    }

    /// Reals per record.
    pub fn record_len(&self) -> usize {
        self.p
            + if self.has_s_inv() {
                self.p * (self.p + 1) / 2
            } else {
                0
            }
    }

    pub fn record_size(&self) -> u64 {
        self.record_len() as u64 * F64_BYTES
    }

    pub fn file_header(&self) -> Result<FileHeader> {
        FileHeader::new(
            FileKind::Results,
            vec![self.m as u64, self.p as u64, self.flags],
        )
    }

    pub fn record_offset(&self, snp_index: usize) -> u64 {
        FileKind::Results.header_len() + snp_index as u64 * self.record_size()
    }

    /// Appends the little-endian records of `results` to `out`.
    pub fn encode_records(&self, results: &[SnpResult], out: &mut Vec<u8>) -> Result<()> {
        let tri = self.p * (self.p + 1) / 2;
        out.reserve(results.len() * self.record_size() as usize);
        for r in results {
            if r.beta.len() != self.p {
                return Err(GlsError::dims(format!(
                    "SNP {} has {} betas, file expects {}",
                    r.snp_index,
                    r.beta.len(),
                    self.p
                )));
            }
            push_f64s(out, &r.beta);
            if self.has_s_inv() {
                match &r.s_inv {
                    Some(s) if s.len() == tri => push_f64s(out, s),
                    Some(_) => return Err(GlsError::dims("packed S⁻¹ has wrong length")),
                    None => {
                        for _ in 0..tri {
                            out.extend_from_slice(&f64::NAN.to_le_bytes());
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn decode_record(&self, snp_index: usize, record: &[f64]) -> SnpResult {
        let beta = record[..self.p].to_vec();
        let degenerate = beta.iter().all(|v| v.is_nan());
        SnpResult {
            snp_index,
            s_inv: (self.has_s_inv() && !degenerate).then(|| record[self.p..].to_vec()),
            beta,
            status: if degenerate {
                SnpStatus::Degenerate
            } else {
                SnpStatus::Ok
            },
        }
    }
}

fn push_f64s(out: &mut Vec<u8>, values: &[f64]) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

/// Reads `out.len()` little-endian reals starting at byte `offset`.
pub(crate) fn read_f64s_at(file: &File, path: &Path, offset: u64, out: &mut [f64]) -> Result<()> {
    let bytes: &mut [u8] = bytemuck::cast_slice_mut(out);
    match file.read_exact_at(bytes, offset) {
        Ok(()) => {}
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => {
            return Err(GlsError::TruncatedFile {
                path: path.to_path_buf(),
                expected: offset + bytes.len() as u64,
                found: file.metadata().map(|m| m.len()).unwrap_or(0),
            })
        }
        Err(e) => return Err(e.into()),
    }
    if cfg!(target_endian = "big") {
        for v in out.iter_mut() {
            *v = f64::from_bits(u64::from_le(v.to_bits()));
        }
    }
    Ok(())
}

pub fn read_header(path: impl AsRef<Path>, kind: FileKind) -> Result<FileHeader> {
    FileHeader::read(path.as_ref(), kind)
}

pub fn write_matrix(path: impl AsRef<Path>, kind: FileKind, payload: &Matrix) -> Result<()> {
    let header = FileHeader::for_matrix(kind, payload)?;
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    w.write_all(&header.encode())?;
    for v in payload.as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix(path: impl AsRef<Path>, kind: FileKind) -> Result<Matrix> {
    let path = path.as_ref();
    let header = FileHeader::read(path, kind)?;
    let (rows, cols) = header.shape();
    let file = File::open(path)?;
    let mut data = vec![0.0; rows * cols];
    read_f64s_at(&file, path, kind.header_len(), &mut data)?;
    Matrix::from_col_major(rows, cols, data)
}

/// Reads columns `first..first + count` of a matrix file.
pub fn read_columns(
    path: impl AsRef<Path>,
    kind: FileKind,
    first: usize,
    count: usize,
) -> Result<Matrix> {
    let path = path.as_ref();
    let header = FileHeader::read(path, kind)?;
    let (rows, cols) = header.shape();
    if first + count > cols {
        return Err(GlsError::dims(format!(
            "columns {first}..{} out of range for {cols} columns",
            first + count
        )));
    }
    let file = File::open(path)?;
    let mut data = vec![0.0; rows * count];
    let offset = kind.header_len() + (first * rows) as u64 * F64_BYTES;
    read_f64s_at(&file, path, offset, &mut data)?;
    Matrix::from_col_major(rows, count, data)
}

/// Creates a result file of the final size; records start out zeroed.
pub fn create_result_file(path: impl AsRef<Path>, header: &ResultHeader) -> Result<()> {
    let fh = header.file_header()?;
    let mut file = OpenOptions::new()
        .create(true)
        .write(true)
        .truncate(true)
        .open(path.as_ref())?;
    file.write_all(&fh.encode())?;
    file.set_len(header.record_offset(header.m))?;
    Ok(())
}

pub fn read_result_header(path: impl AsRef<Path>) -> Result<ResultHeader> {
    let fh = FileHeader::read(path.as_ref(), FileKind::Results)?;
    Ok(ResultHeader::from_dims(&fh.dims))
}

/// Writes a complete result file in one go.
pub fn write_results(
    path: impl AsRef<Path>,
    header: &ResultHeader,
    results: &[SnpResult],
) -> Result<()> {
    if results.len() != header.m {
        return Err(GlsError::dims(format!(
            "{} results for a file of {} SNPs",
            results.len(),
            header.m
        )));
    }
    let mut buf = header.file_header()?.encode();
    header.encode_records(results, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn read_results(path: impl AsRef<Path>) -> Result<(ResultHeader, Vec<SnpResult>)> {
    let path = path.as_ref();
    let header = read_result_header(path)?;
    let file = File::open(path)?;
    let len = header.record_len();
    let mut data = vec![0.0; len * header.m];
    read_f64s_at(&file, path, FileKind::Results.header_len(), &mut data)?;
    let results = data
        .chunks_exact(len)
        .enumerate()
        .map(|(i, rec)| header.decode_record(i, rec))
        .collect();
    Ok((header, results))
}
