//! The distributed sweep. Each rank streams its own contiguous slice of every
//! block from the genotype file, treats it as its cyclic share of the block,
//! and the block goes through 1D → 2D → triangular solve → 1D before the
//! per-SNP solves run locally.

use std::path::Path;
use std::thread;
use std::time::Instant;

use super::dmatrix::{
    check_symmetric, redist_1d_to_2d, redist_2d_to_1d, replicate, scatter_panels, DistMatrix1D,
};
use super::grid::{local_count, GridLayout};
use super::linalg::{dist_cholesky, dist_trsolve};
use super::transport::{inproc_world, Transport};
use crate::error::{GlsError, Result};
use crate::io::{
    create_result_file, read_columns, BlockReader, DatasetPaths, FileKind, InputBuffer,
    OutputBuffer, ResultHeader, ResultWriter, StoreTicket,
};
use crate::kernel::{Matrix, ResultBlock, WhitenedCovariates, DEFAULT_PANEL_WIDTH};
use crate::pipeline::{block_plan, DEFAULT_MEM_BUDGET};
use crate::summary::{Mode, RunSummary};

/// Block width per rank when none is given.
pub const DEFAULT_COLUMNS_PER_RANK: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DistConfig {
    pub np: usize,
    /// Columns per block across all ranks; must be a multiple of `np`.
    /// Defaults to `256·np`.
    pub block_size: Option<usize>,
    pub emit_s_inv: bool,
    pub panel_width: usize,
    /// Upper bound on each rank's block buffers.
    pub mem_budget: u64,
}

impl DistConfig {
    pub fn new(np: usize) -> Self {
        DistConfig {
            np,
            block_size: None,
            emit_s_inv: false,
            panel_width: DEFAULT_PANEL_WIDTH,
            mem_budget: DEFAULT_MEM_BUDGET,
        }
    }

    pub fn m_blk(&self) -> Result<usize> {
        if self.np == 0 {
            return Err(GlsError::Config("process count must be at least 1".into()));
        }
        let m_blk = self
            .block_size
            .unwrap_or(DEFAULT_COLUMNS_PER_RANK * self.np);
        if m_blk == 0 || !m_blk.is_multiple_of(self.np) {
            return Err(GlsError::Config(format!(
                "block size {m_blk} is not a positive multiple of the process count {}",
                self.np
            )));
        }
        Ok(m_blk)
    }
}

/// Start and length of rank `q`'s slice of a block of `width` columns.
/// Slice lengths match the rank's 1D share of the block.
pub fn rank_chunk(first: usize, width: usize, np: usize, q: usize) -> (usize, usize) {
    let before: usize = (0..q).map(|r| local_count(width, np, r)).sum();
    (first + before, local_count(width, np, q))
}

fn u64s(values: &[u64]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

fn read_u64s(bytes: &[u8]) -> Vec<u64> {
    bytes
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
        .collect()
}

/// Runs one rank of the distributed sweep. Every rank of the world must call
/// this with the same paths and configuration. The returned summary carries
/// world totals for the byte counters on every rank.
pub fn run_dist_rank<T: Transport + ?Sized>(
    paths: &DatasetPaths,
    out: &Path,
    cfg: &DistConfig,
    t: &T,
) -> Result<RunSummary> {
    let started = Instant::now();
    let np = t.size();
    let me = t.rank();
    if np != cfg.np {
        return Err(GlsError::Config(format!(
            "world has {np} ranks, configuration says {}",
            cfg.np
        )));
    }
    let m_blk = cfg.m_blk()?;
    let grid = GridLayout::new(np)?;
    let dims = paths.dimensions()?;
    let (n, m, p) = (dims.n, dims.m, dims.p);
    let plan = block_plan(m, m_blk);
    let header = ResultHeader::new(m, p, cfg.emit_s_inv);
    let per_rank = m_blk.min(m).div_ceil(np);
    let region = (n * per_rank * 8) as u64 + per_rank as u64 * header.record_size();
    if 2 * region > cfg.mem_budget {
        return Err(GlsError::Config(format!(
            "two block regions need {} bytes per rank, budget is {}",
            2 * region,
            cfg.mem_budget
        )));
    }

    let mut summary = RunSummary::new(Mode::Dist);
    summary.n = n;
    summary.m = m;
    summary.p = p;
    summary.m_blk = m_blk;
    summary.np = np;
    summary.transport = t.name().to_string();
    summary.emit_s_inv = cfg.emit_s_inv;
    summary.mem_budget = cfg.mem_budget;
    summary.blocks = plan.len();
    summary.block_regions = 2;

    let mut reader = BlockReader::open(&paths.genotypes)?;
    let mut inputs = [
        Some(InputBuffer::with_capacity(0, n * per_rank)),
        Some(InputBuffer::with_capacity(1, n * per_rank)),
    ];
    let mut outputs = [
        Some(OutputBuffer::with_capacity(
            0,
            per_rank * header.record_size() as usize,
        )),
        Some(OutputBuffer::with_capacity(
            1,
            per_rank * header.record_size() as usize,
        )),
    ];
    let peak_buffers = 2 * region;
    let chunk = |b: usize| {
        let (first, width) = plan.blocks[b];
        rank_chunk(first, width, np, me)
    };
    let start_load =
        |reader: &mut BlockReader, b: usize, inputs: &mut [Option<InputBuffer>; 2]| -> Result<_> {
            let (start, cnt) = chunk(b);
            if cnt == 0 {
                return Ok(None);
            }
            let buf = inputs[b % 2].take().expect("input buffer parked");
            reader.read_block_start(start, cnt, buf).map(Some)
        };
    // The first block is in flight while M is factored.
    let mut load = start_load(&mut reader, 0, &mut inputs)?;

    let t_prep = Instant::now();
    let nb = cfg.panel_width.max(1);
    let mut bytes_read_prep = 0u64;
    let mut source_m = |c0: usize, c1: usize| -> Result<Matrix> {
        let panel = read_columns(&paths.covariance, FileKind::Covariance, c0, c1 - c0)?;
        panel.check_finite("covariance")?;
        bytes_read_prep += (panel.as_slice().len() * 8) as u64;
        Ok(panel)
    };
    let m2d = scatter_panels(n, n, grid, t, &mut source_m)?;
    check_symmetric(&m2d, t)?;
    let l = dist_cholesky(m2d, t, nb)?;

    let xy = if me == 0 {
        let xl = paths.load_covariates()?;
        let y = paths.load_phenotype()?;
        let mut data = xl.as_matrix().as_slice().to_vec();
        data.extend_from_slice(y.as_slice());
        bytes_read_prep += (data.len() * 8) as u64;
        Some(Matrix::from_col_major(n, p, data)?)
    } else {
        None
    };
    let mut source_xy = |c0: usize, c1: usize| {
        Ok(xy
            .as_ref()
            .expect("rank 0 holds the covariates")
            .columns(c0, c1 - c0))
    };
    let xy2d = scatter_panels(n, p, grid, t, &mut source_xy)?;
    drop(xy);
    let xy_bar = replicate(&dist_trsolve(&l, &xy2d, t, nb)?, t)?;
    let y_bar = xy_bar.col(p - 1).to_vec();
    let covariates = WhitenedCovariates::new(xy_bar.columns(0, p - 1), y_bar)?;
    summary.prepare_s = t_prep.elapsed().as_secs_f64();

    if me == 0 {
        create_result_file(out, &header)?;
    }
    t.barrier()?;
    let mut writer = ResultWriter::open(out)?;

    let stream = Instant::now();
    let mut pending_store: Option<StoreTicket> = None;
    let mut view_bytes = 0u64;
    for b in 0..plan.len() {
        let (start, cnt) = chunk(b);
        let width = plan.blocks[b].1;
        let w = Instant::now();
        let local = match load.take() {
            Some(ticket) => {
                let loaded = reader.read_block_wait(ticket)?;
                let slot = loaded.slot;
                (
                    slot,
                    Matrix::from_col_major(n, cnt, loaded.block.into_buffer())?,
                )
            }
            None => (b % 2, Matrix::zeros(n, 0)),
        };
        summary.io_wait_s += w.elapsed().as_secs_f64();
        if b + 1 < plan.len() {
            load = start_load(&mut reader, b + 1, &mut inputs)?;
        }
        let (slot, local) = local;

        // Adopting the loaded slice as this rank's share must not move data.
        let before = t.traffic().total_bytes();
        let x1d = DistMatrix1D::from_local(n, width, grid, me, local)?;
        view_bytes += t.traffic().total_bytes() - before;

        let w = Instant::now();
        let x2d = redist_1d_to_2d(&x1d, t)?;
        if cnt > 0 {
            inputs[slot] = Some(InputBuffer::reclaim(slot, x1d.into_local().into_vec()));
        }
        summary.redistribute_s += w.elapsed().as_secs_f64();

        let w = Instant::now();
        let xbar2d = dist_trsolve(&l, &x2d, t, nb)?;
        drop(x2d);
        summary.compute_s += w.elapsed().as_secs_f64();

        let w = Instant::now();
        let xbar1d = redist_2d_to_1d(&xbar2d, t)?;
        drop(xbar2d);
        summary.redistribute_s += w.elapsed().as_secs_f64();

        let before = t.traffic().total_bytes();
        let xbar = xbar1d.into_local();
        view_bytes += t.traffic().total_bytes() - before;

        let w = Instant::now();
        let results = covariates.solve_whitened(xbar.as_slice(), start, cfg.emit_s_inv);
        summary.compute_s += w.elapsed().as_secs_f64();

        if let Some(prev) = pending_store.take() {
            let w = Instant::now();
            let buf = writer.write_block_wait(prev)?;
            summary.io_wait_s += w.elapsed().as_secs_f64();
            let s = buf.slot();
            outputs[s] = Some(buf);
        }
        if cnt > 0 {
            let block = ResultBlock {
                first_index: start,
                results,
            };
            let buf = outputs[b % 2].take().expect("output buffer parked");
            pending_store = Some(writer.write_block_start(&block, buf)?);
        }
    }
    if let Some(prev) = pending_store.take() {
        let w = Instant::now();
        writer.write_block_wait(prev)?;
        summary.io_wait_s += w.elapsed().as_secs_f64();
    }
    summary.stream_s = stream.elapsed().as_secs_f64();

    let read = reader.counters();
    drop(reader);
    let written = writer.finish()?;
    summary.io_busy_s = (read.busy + written.busy).as_secs_f64();

    // World totals; the barrier inside also guarantees every rank's results
    // are on disk before any rank returns.
    let mine = [read.bytes + bytes_read_prep, written.bytes, view_bytes];
    let all = t.allgather(u64s(&mine))?;
    let totals = all
        .iter()
        .map(|b| read_u64s(b))
        .fold([0u64; 3], |mut acc, v| {
            for (a, x) in acc.iter_mut().zip(v) {
                *a += x;
            }
            acc
        });
    summary.bytes_read = totals[0];
    summary.bytes_written = totals[1];
    summary.view_bytes = totals[2];
    summary.peak_buffer_bytes = peak_buffers;
    let local_l = (n.div_ceil(grid.rows()) * n.div_ceil(grid.cols()) * 8) as u64;
    summary.peak_resident_bytes = local_l + peak_buffers + (3 * n * p * 8) as u64;
    summary.total_s = started.elapsed().as_secs_f64();
    Ok(summary)
}

/// Runs the distributed sweep with `cfg.np` ranks as threads of this process.
/// Returns rank 0's summary.
pub fn run_dist_inproc(paths: &DatasetPaths, out: &Path, cfg: &DistConfig) -> Result<RunSummary> {
    cfg.m_blk()?;
    let world = inproc_world(cfg.np);
    let outcomes: Vec<Result<RunSummary>> = thread::scope(|s| {
        let handles: Vec<_> = world
            .into_iter()
            .map(|t| {
                thread::Builder::new()
                    .name(format!("gls-rank-{}", t.rank()))
                    .spawn_scoped(s, move || run_dist_rank(paths, out, cfg, &t))
                    .expect("spawn rank thread")
            })
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(GlsError::Config("a rank panicked".into())))
            })
            .collect()
    });
    first_cause(outcomes)
}

/// Rank 0's summary, or the most informative error: a rank that fails makes
/// its peers fail with transport errors, so those only win when nothing else
/// went wrong.
pub fn first_cause(outcomes: Vec<Result<RunSummary>>) -> Result<RunSummary> {
    let mut transport_err = None;
    let mut summary = None;
    for (rank, r) in outcomes.into_iter().enumerate() {
        match r {
            Ok(s) if rank == 0 => summary = Some(s),
            Ok(_) => {}
            Err(e @ GlsError::TransportFailure { .. }) => {
                transport_err.get_or_insert(e);
            }
            Err(e) => return Err(e),
        }
    }
    match (transport_err, summary) {
        (Some(e), _) => Err(e),
        (None, Some(s)) => Ok(s),
        (None, None) => Err(GlsError::Config("empty world".into())),
    }
}
