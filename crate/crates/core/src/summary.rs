use std::fmt;
use std::str::FromStr;

use crate::error::GlsError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Incore,
    Ooc,
    Dist,
    Oracle,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Incore => "incore",
            Mode::Ooc => "ooc",
            Mode::Dist => "dist",
            Mode::Oracle => "oracle",
        }
    }
}

impl FromStr for Mode {
    type Err = GlsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "incore" => Ok(Mode::Incore),
            "ooc" => Ok(Mode::Ooc),
            "dist" => Ok(Mode::Dist),
            "oracle" => Ok(Mode::Oracle),
            _ => Err(GlsError::Config(format!("unknown mode {s:?}"))),
        }
    }
}

/// Per-run report. Serialized as one line of space-separated `key=value` pairs.
///
/// Phase times are disjoint wall-clock intervals: `prepare_s` covers loading
/// and factoring `M` and whitening the covariates; `compute_s` the per-block
/// whitening and small solves; `io_wait_s` time blocked on loads and stores;
/// `redistribute_s` time inside block redistributions. `stream_s` is the
/// whole block loop, `io_busy_s` the time the I/O threads spent in system
/// calls.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub mode: Mode,
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub m_blk: usize,
    pub np: usize,
    pub threads: usize,
    pub transport: String,
    pub emit_s_inv: bool,
    pub mem_budget: u64,
    pub prepare_s: f64,
    pub compute_s: f64,
    pub io_wait_s: f64,
    pub redistribute_s: f64,
    pub stream_s: f64,
    pub io_busy_s: f64,
    pub total_s: f64,
    pub blocks: usize,
    pub bytes_read: u64,
    pub bytes_written: u64,
    pub peak_resident_bytes: u64,
    pub block_regions: usize,
    pub peak_buffer_bytes: u64,
    pub view_bytes: u64,
}

impl RunSummary {
    pub fn new(mode: Mode) -> Self {
        RunSummary {
            mode,
            n: 0,
            m: 0,
            p: 0,
            m_blk: 0,
            np: 1,
            threads: 1,
            transport: "none".into(),
            emit_s_inv: false,
            mem_budget: 0,
            prepare_s: 0.0,
            compute_s: 0.0,
            io_wait_s: 0.0,
            redistribute_s: 0.0,
            stream_s: 0.0,
            io_busy_s: 0.0,
            total_s: 0.0,
            blocks: 0,
            bytes_read: 0,
            bytes_written: 0,
            peak_resident_bytes: 0,
            block_regions: 0,
            peak_buffer_bytes: 0,
            view_bytes: 0,
        }
    }

    pub fn phase_sum(&self) -> f64 {
        self.prepare_s + self.compute_s + self.io_wait_s + self.redistribute_s
    }
}

impl fmt::Display for RunSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "mode={} n={} m={} p={} m_blk={} np={} threads={} transport={} emit_sinv={} \
             mem_budget={} prepare_s={:.6} compute_s={:.6} io_wait_s={:.6} redistribute_s={:.6} \
             stream_s={:.6} io_busy_s={:.6} total_s={:.6} blocks={} bytes_read={} bytes_written={} \
             peak_resident_bytes={} block_regions={} peak_buffer_bytes={} view_bytes={}",
            self.mode.as_str(),
            self.n,
            self.m,
            self.p,
            self.m_blk,
            self.np,
            self.threads,
            self.transport,
            self.emit_s_inv as u8,
            self.mem_budget,
            self.prepare_s,
            self.compute_s,
            self.io_wait_s,
            self.redistribute_s,
            self.stream_s,
            self.io_busy_s,
            self.total_s,
            self.blocks,
            self.bytes_read,
            self.bytes_written,
            self.peak_resident_bytes,
            self.block_regions,
            self.peak_buffer_bytes,
            self.view_bytes,
        )
    }
}

impl FromStr for RunSummary {
    type Err = GlsError;

    fn from_str(line: &str) -> Result<Self, Self::Err> {
        let bad = |k: &str, v: &str| GlsError::Config(format!("bad summary field {k}={v}"));
        let mut s = RunSummary::new(Mode::Incore);
        for pair in line.split_whitespace() {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| GlsError::Config(format!("not a key=value pair: {pair}")))?;
            macro_rules! num {
                ($field:ident) => {
                    s.$field = v.parse().map_err(|_| bad(k, v))?
                };
            }
            match k {
                "mode" => s.mode = v.parse()?,
                "n" => num!(n),
                "m" => num!(m),
                "p" => num!(p),
                "m_blk" => num!(m_blk),
                "np" => num!(np),
                "threads" => num!(threads),
                "transport" => s.transport = v.to_string(),
                "emit_sinv" => s.emit_s_inv = v == "1",
                "mem_budget" => num!(mem_budget),
                "prepare_s" => num!(prepare_s),
                "compute_s" => num!(compute_s),
                "io_wait_s" => num!(io_wait_s),
                "redistribute_s" => num!(redistribute_s),
                "stream_s" => num!(stream_s),
                "io_busy_s" => num!(io_busy_s),
                "total_s" => num!(total_s),
                "blocks" => num!(blocks),
                "bytes_read" => num!(bytes_read),
                "bytes_written" => num!(bytes_written),
                "peak_resident_bytes" => num!(peak_resident_bytes),
                "block_regions" => num!(block_regions),
                "peak_buffer_bytes" => num!(peak_buffer_bytes),
                "view_bytes" => num!(view_bytes),
                _ => return Err(GlsError::Config(format!("unknown summary key {k}"))),
            }
        }
        Ok(s)
    }
}
