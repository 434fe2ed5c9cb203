//! Out-of-core driver: the sweep over SNP blocks with double-buffered loads
//! and stores, plus the single-block in-core baseline.
//!
//! Memory is split into two equal regions, each holding one genotype block
//! and one encoded result block. While the current region is being computed,
//! the other region receives the next block from disk and drains the previous
//! results to disk. The roles swap once per block.

use std::path::Path;
use std::time::Instant;

use crate::error::{GlsError, Result};
use crate::io::{
    create_result_file, read_matrix, write_results, BlockReader, DatasetPaths, Dimensions,
    FileKind, InputBuffer, OutputBuffer, ResultHeader, ResultWriter, StoreTicket,
};
use crate::kernel::{
    gls_solve_block_in_place, CholeskyFactor, PreparedContext, SnpBlock, SolveOptions,
};
use crate::summary::{Mode, RunSummary};

pub const DEFAULT_BLOCK_SIZE: usize = 5000;
pub const MEM_BUDGET_ENV: &str = "GWAS_GLS_MEM_BUDGET_BYTES";
/// Used when no budget is configured: 8 GiB.
pub const DEFAULT_MEM_BUDGET: u64 = 8 << 30;

/// Partition of `0..m` into contiguous blocks of at most `m_blk` SNPs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockPlan {
    pub m: usize,
    pub m_blk: usize,
    pub blocks: Vec<(usize, usize)>,
}

impl BlockPlan {
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }
}

/// The last block holds the remainder; nothing is padded.
pub fn block_plan(m: usize, m_blk: usize) -> BlockPlan {
    let m_blk = m_blk.max(1);
    let blocks = (0..m)
        .step_by(m_blk)
        .map(|first| (first, m_blk.min(m - first)))
        .collect();
    BlockPlan { m, m_blk, blocks }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PipelineConfig {
    pub block_size: usize,
    pub threads: usize,
    pub emit_s_inv: bool,
    /// Upper bound on bytes of block buffers.
    pub mem_budget: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            block_size: DEFAULT_BLOCK_SIZE,
            threads: 1,
            emit_s_inv: false,
            mem_budget: DEFAULT_MEM_BUDGET,
        }
    }
}

impl PipelineConfig {
    fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            threads: self.threads.max(1),
            emit_s_inv: self.emit_s_inv,
        }
    }
}

/// Reads the memory budget from `GWAS_GLS_MEM_BUDGET_BYTES`, if set.
pub fn mem_budget_from_env() -> Result<Option<u64>> {
    match std::env::var(MEM_BUDGET_ENV) {
        Ok(v) => {
            v.trim().parse().map(Some).map_err(|_| {
                GlsError::Config(format!("{MEM_BUDGET_ENV}={v:?} is not a byte count"))
            })
        }
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(GlsError::Config(format!("{MEM_BUDGET_ENV}: {e}"))),
    }
}

#[derive(Debug, Default)]
struct Region {
    input: Option<InputBuffer>,
    output: Option<OutputBuffer>,
}

/// Two equally sized memory regions with alternating current/next roles.
///
/// A buffer is either parked here or owned by exactly one in-flight transfer
/// or by the compute step; taking a buffer that is not parked panics.
#[derive(Debug)]
pub struct BufferPair {
    regions: [Region; 2],
    current: usize,
    swaps: usize,
    region_bytes: u64,
}

impl BufferPair {
    pub fn allocate(n: usize, m_blk: usize, record_size: u64) -> Self {
        let region = |slot| Region {
            input: Some(InputBuffer::with_capacity(slot, n * m_blk)),
            output: Some(OutputBuffer::with_capacity(
                slot,
                m_blk * record_size as usize,
            )),
        };
        BufferPair {
            regions: [region(0), region(1)],
            current: 0,
            swaps: 0,
            region_bytes: region_bytes(n, m_blk, record_size),
        }
    }

    pub fn current(&self) -> usize {
        self.current
    }

    pub fn other(&self) -> usize {
        1 - self.current
    }

    pub fn swap(&mut self) {
        self.current = 1 - self.current;
        self.swaps += 1;
    }

    pub fn swaps(&self) -> usize {
        self.swaps
    }

    pub fn region_bytes(&self) -> u64 {
        self.region_bytes
    }

    pub fn take_input(&mut self, slot: usize) -> InputBuffer {
        self.regions[slot]
            .input
            .take()
            .unwrap_or_else(|| panic!("input buffer of region {slot} is in flight"))
    }

    pub fn put_input(&mut self, buf: InputBuffer) {
        let slot = buf.slot();
        assert!(
            self.regions[slot].input.is_none(),
            "region {slot} input returned twice"
        );
        self.regions[slot].input = Some(buf);
    }

    pub fn take_output(&mut self, slot: usize) -> OutputBuffer {
        self.regions[slot]
            .output
            .take()
            .unwrap_or_else(|| panic!("output buffer of region {slot} is in flight"))
    }

    pub fn put_output(&mut self, buf: OutputBuffer) {
        let slot = buf.slot();
        assert!(
            self.regions[slot].output.is_none(),
            "region {slot} output returned twice"
        );
        self.regions[slot].output = Some(buf);
    }

    /// Bytes currently reserved by parked buffers.
    pub fn parked_capacity_bytes(&self) -> u64 {
        self.regions
            .iter()
            .map(|r| {
                r.input.as_ref().map_or(0, |b| b.capacity() as u64 * 8)
                    + r.output.as_ref().map_or(0, |b| b.capacity() as u64)
            })
            .sum()
    }
}

fn region_bytes(n: usize, m_blk: usize, record_size: u64) -> u64 {
    (n * m_blk * 8) as u64 + m_blk as u64 * record_size
}

fn prepare(paths: &DatasetPaths) -> Result<PreparedContext> {
    let factor = CholeskyFactor::factor(paths.load_covariance()?)?;
    PreparedContext::from_factor(factor, &paths.load_covariates()?, &paths.load_phenotype()?)
}

fn resident_estimate(dims: &Dimensions, buffers: u64) -> u64 {
    let Dimensions { n, p, .. } = *dims;
    (n * n * 8) as u64 + buffers + (2 * n * (p + 1) * 8) as u64
}

/// Streams the genotype file through the double-buffered sweep and writes
/// the result file at `out`.
pub fn run_ooc(paths: &DatasetPaths, out: &Path, cfg: &PipelineConfig) -> Result<RunSummary> {
    let started = Instant::now();
    if cfg.block_size == 0 {
        return Err(GlsError::Config("block size must be at least 1".into()));
    }
    let dims = paths.dimensions()?;
    let plan = block_plan(dims.m, cfg.block_size);
    let m_blk = cfg.block_size.min(dims.m);
    let header = ResultHeader::new(dims.m, dims.p, cfg.emit_s_inv);
    let budget_needed = 2 * region_bytes(dims.n, m_blk, header.record_size());
    if budget_needed > cfg.mem_budget {
        return Err(GlsError::Config(format!(
            "two block regions need {budget_needed} bytes, budget is {}",
            cfg.mem_budget
        )));
    }

    let mut summary = RunSummary::new(Mode::Ooc);
    summary.n = dims.n;
    summary.m = dims.m;
    summary.p = dims.p;
    summary.m_blk = cfg.block_size;
    summary.threads = cfg.threads.max(1);
    summary.emit_s_inv = cfg.emit_s_inv;
    summary.mem_budget = cfg.mem_budget;
    summary.blocks = plan.len();

    let t = Instant::now();
    let ctx = prepare(paths)?;
    summary.prepare_s = t.elapsed().as_secs_f64();

    create_result_file(out, &header)?;
    let mut reader = BlockReader::open(&paths.genotypes)?;
    let mut writer = ResultWriter::open(out)?;
    let mut pair = BufferPair::allocate(dims.n, m_blk, header.record_size());
    summary.block_regions = 2;
    let mut peak_buffers = pair.parked_capacity_bytes();
    let opts = cfg.solve_options();

    let stream = Instant::now();
    let (first, count) = plan.blocks[0];
    let mut load = Some(reader.read_block_start(first, count, pair.take_input(pair.current()))?);
    let mut pending_store: Option<StoreTicket> = None;
    let last = plan.len() - 1;
    for (b, _) in plan.blocks.iter().enumerate() {
        let cur = pair.current();

        let t = Instant::now();
        let mut loaded = reader.read_block_wait(load.take().expect("load in flight"))?;
        summary.io_wait_s += t.elapsed().as_secs_f64();
        debug_assert_eq!(loaded.slot, cur);

        if b != last {
            let (first, count) = plan.blocks[b + 1];
            let buf = pair.take_input(pair.other());
            load = Some(reader.read_block_start(first, count, buf)?);
        }

        let t = Instant::now();
        let results = gls_solve_block_in_place(&ctx, &mut loaded.block, &opts)?;
        pair.put_input(InputBuffer::reclaim(
            loaded.slot,
            loaded.block.into_buffer(),
        ));
        summary.compute_s += t.elapsed().as_secs_f64();

        if let Some(prev) = pending_store.take() {
            let t = Instant::now();
            let buf = writer.write_block_wait(prev)?;
            summary.io_wait_s += t.elapsed().as_secs_f64();
            pair.put_output(buf);
        }
        let t = Instant::now();
        pending_store = Some(writer.write_block_start(&results, pair.take_output(cur))?);
        summary.compute_s += t.elapsed().as_secs_f64();

        pair.swap();
    }
    if let Some(prev) = pending_store.take() {
        let t = Instant::now();
        let buf = writer.write_block_wait(prev)?;
        summary.io_wait_s += t.elapsed().as_secs_f64();
        pair.put_output(buf);
    }
    debug_assert_eq!(pair.swaps(), plan.len());
    summary.stream_s = stream.elapsed().as_secs_f64();
    peak_buffers = peak_buffers.max(pair.parked_capacity_bytes());

    let read = reader.counters();
    drop(reader);
    let written = writer.finish()?;
    summary.io_busy_s = (read.busy + written.busy).as_secs_f64();
    summary.bytes_read = read.bytes;
    summary.bytes_written = written.bytes;
    summary.peak_buffer_bytes = peak_buffers;
    summary.peak_resident_bytes = resident_estimate(&dims, peak_buffers);
    summary.total_s = started.elapsed().as_secs_f64();
    Ok(summary)
}

/// Loads the whole genotype matrix and solves it as one block.
pub fn run_incore(paths: &DatasetPaths, out: &Path, cfg: &PipelineConfig) -> Result<RunSummary> {
    let started = Instant::now();
    let dims = paths.dimensions()?;
    let header = ResultHeader::new(dims.m, dims.p, cfg.emit_s_inv);
    let needed = region_bytes(dims.n, dims.m, header.record_size());
    if needed > cfg.mem_budget {
        return Err(GlsError::Config(format!(
            "in-core run needs {needed} bytes of block buffers, budget is {}",
            cfg.mem_budget
        )));
    }

    let mut summary = RunSummary::new(Mode::Incore);
    summary.n = dims.n;
    summary.m = dims.m;
    summary.p = dims.p;
    summary.m_blk = dims.m;
    summary.threads = cfg.threads.max(1);
    summary.emit_s_inv = cfg.emit_s_inv;
    summary.mem_budget = cfg.mem_budget;
    summary.blocks = 1;
    summary.block_regions = 1;

    let t = Instant::now();
    let ctx = prepare(paths)?;
    summary.prepare_s = t.elapsed().as_secs_f64();

    let stream = Instant::now();
    let t = Instant::now();
    let x = read_matrix(&paths.genotypes, FileKind::Genotypes)?;
    summary.io_wait_s += t.elapsed().as_secs_f64();
    summary.bytes_read = (x.as_slice().len() * 8) as u64;

    let t = Instant::now();
    let mut blk = SnpBlock::new(0, x)?;
    let results = gls_solve_block_in_place(&ctx, &mut blk, &cfg.solve_options())?;
    summary.compute_s = t.elapsed().as_secs_f64();
    drop(blk);

    let t = Instant::now();
    write_results(out, &header, &results.results)?;
    summary.io_wait_s += t.elapsed().as_secs_f64();
    summary.stream_s = stream.elapsed().as_secs_f64();
    summary.io_busy_s = summary.io_wait_s;
    summary.bytes_written = dims.m as u64 * header.record_size();
    summary.peak_buffer_bytes = needed;
    summary.peak_resident_bytes = resident_estimate(&dims, needed);
    summary.total_s = started.elapsed().as_secs_f64();
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plan_with_remainder() {
        assert_eq!(block_plan(10, 4).blocks, vec![(0, 4), (4, 4), (8, 2)]);
    }

    #[test]
    fn plan_single_block() {
        assert_eq!(block_plan(5, 8).blocks, vec![(0, 5)]);
    }

    #[test]
    fn plan_equal_blocks_at_default_size() {
        let plan = block_plan(5000 * 3, DEFAULT_BLOCK_SIZE);
        assert_eq!(plan.blocks, vec![(0, 5000), (5000, 5000), (10000, 5000)]);
    }

    #[test]
    fn buffer_pair_roles_alternate() {
        let mut pair = BufferPair::allocate(3, 4, 16);
        assert_eq!(pair.current(), 0);
        let b = pair.take_input(0);
        assert_eq!(b.slot(), 0);
        pair.put_input(b);
        pair.swap();
        assert_eq!((pair.current(), pair.other()), (1, 0));
        assert_eq!(pair.region_bytes(), 3 * 4 * 8 + 4 * 16);
        assert_eq!(pair.parked_capacity_bytes(), 2 * pair.region_bytes());
    }

    #[test]
    #[should_panic(expected = "in flight")]
    fn taking_busy_buffer_panics() {
        let mut pair = BufferPair::allocate(3, 4, 16);
        let _held = pair.take_output(1);
        let _again = pair.take_output(1);
    }
}
