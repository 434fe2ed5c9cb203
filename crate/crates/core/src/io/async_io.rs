//! Asynchronous block transfers with explicit start/wait pairs.
//!
//! A [`BlockReader`] and a [`ResultWriter`] each own one background I/O thread.
//! Buffers are moved into a transfer at `*_start` and handed back at `*_wait`,
//! so compute can never touch a buffer that is in flight. Each buffer carries a
//! slot id; starting a second transfer on a slot that is still in flight is
//! rejected with [`GlsError::OverlappingBuffer`].

use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::os::unix::fs::FileExt;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{channel, Receiver, Sender};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use super::format::{read_f64s_at, read_result_header, FileHeader, FileKind, ResultHeader};
use crate::error::{GlsError, Result};
use crate::kernel::{Matrix, ResultBlock, SnpBlock};

/// Genotype staging buffer tagged with its slot in a buffer pair.
#[derive(Debug)]
pub struct InputBuffer {
    slot: usize,
    data: Vec<f64>,
}

impl InputBuffer {
    pub fn with_capacity(slot: usize, values: usize) -> Self {
        InputBuffer {
            slot,
            data: Vec::with_capacity(values),
        }
    }

    /// Re-tags storage released by [`SnpBlock::into_buffer`].
    pub fn reclaim(slot: usize, data: Vec<f64>) -> Self {
        InputBuffer { slot, data }
    }

    pub fn slot(&self) -> usize {
        self.slot
    }

    pub fn capacity(&self) -> usize {
        self.data.capacity()
    }
}

/// Encoded result records staged for a store.
#[derive(Debug)]
pub struct OutputBuffer {
    slot: usize,
    data: Vec<u8>,
}

impl OutputBuffer {
    pub fn with_capacity(slot: usize, bytes: usize) -> Self {
        OutputBuffer {
            slot,
            data: Vec::with_capacity(bytes),
        }
    }

    pub fn slot(&self) -> usize {
        self.slot
    }

    pub fn capacity(&self) -> usize {
        self.data.capacity()
    }
}

/// Bytes moved and time the I/O thread spent inside system calls.
#[derive(Debug, Default)]
struct Stats {
    bytes: AtomicU64,
    busy_nanos: AtomicU64,
}

impl Stats {
    fn record(&self, bytes: u64, busy: Duration) {
        self.bytes.fetch_add(bytes, Ordering::Relaxed);
        self.busy_nanos
            .fetch_add(busy.as_nanos() as u64, Ordering::Relaxed);
    }

    fn snapshot(&self) -> IoCounters {
        IoCounters {
            bytes: self.bytes.load(Ordering::Relaxed),
            busy: Duration::from_nanos(self.busy_nanos.load(Ordering::Relaxed)),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct IoCounters {
    pub bytes: u64,
    pub busy: Duration,
}

struct LoadJob {
    offset: u64,
    values: usize,
    data: Vec<f64>,
    reply: Sender<Result<Vec<f64>>>,
}

/// Handle for an in-flight block load. Consumed by [`BlockReader::read_block_wait`].
#[must_use = "every started load must be waited on"]
pub struct LoadTicket {
    slot: usize,
    first_index: usize,
    count: usize,
    rx: Receiver<Result<Vec<f64>>>,
}

impl LoadTicket {
    pub fn slot(&self) -> usize {
        self.slot
    }

    pub fn first_index(&self) -> usize {
        self.first_index
    }
}

/// A completed load: the block and the slot its buffer belongs to.
#[derive(Debug)]
pub struct LoadedBlock {
    pub slot: usize,
    pub block: SnpBlock,
}

/// Streams column ranges out of a genotype file on a background thread.
pub struct BlockReader {
    n: usize,
    m: usize,
    tx: Option<Sender<LoadJob>>,
    worker: Option<JoinHandle<()>>,
    in_flight: HashSet<usize>,
    stats: Arc<Stats>,
}

impl BlockReader {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let header = FileHeader::read(&path, FileKind::Genotypes)?;
        let (n, m) = header.shape();
        let file = File::open(&path)?;
        let stats = Arc::new(Stats::default());
        let (tx, rx) = channel::<LoadJob>();
        let agent_stats = Arc::clone(&stats);
        let worker = std::thread::Builder::new()
            .name("gls-loader".into())
            .spawn(move || load_agent(file, path, rx, agent_stats))?;
        Ok(BlockReader {
            n,
            m,
            tx: Some(tx),
            worker: Some(worker),
            in_flight: HashSet::new(),
            stats,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn counters(&self) -> IoCounters {
        self.stats.snapshot()
    }

    /// Queues a load of SNP columns `first_index..first_index + count` into `buffer`.
    /// Returns without waiting for the disk.
    pub fn read_block_start(
        &mut self,
        first_index: usize,
        count: usize,
        buffer: InputBuffer,
    ) -> Result<LoadTicket> {
        if self.in_flight.contains(&buffer.slot) {
            return Err(GlsError::OverlappingBuffer { slot: buffer.slot });
        }
        if count == 0 || first_index + count > self.m {
            return Err(GlsError::dims(format!(
                "block {first_index}..{} outside 0..{}",
                first_index + count,
                self.m
            )));
        }
        let (reply, rx) = channel();
        let job = LoadJob {
            offset: FileKind::Genotypes.header_len() + (first_index * self.n * 8) as u64,
            values: self.n * count,
            data: buffer.data,
            reply,
        };
        self.send(job)?;
        self.in_flight.insert(buffer.slot);
        Ok(LoadTicket {
            slot: buffer.slot,
            first_index,
            count,
            rx,
        })
    }

    /// Blocks until the load behind `ticket` has landed.
    pub fn read_block_wait(&mut self, ticket: LoadTicket) -> Result<LoadedBlock> {
        self.in_flight.remove(&ticket.slot);
        let data = ticket.rx.recv().map_err(|_| agent_gone("loader"))??;
        let matrix = Matrix::from_col_major(self.n, ticket.count, data)?;
        Ok(LoadedBlock {
            slot: ticket.slot,
            block: SnpBlock::from_raw(ticket.first_index, matrix),
        })
    }

    fn send(&self, job: LoadJob) -> Result<()> {
        self.tx
            .as_ref()
            .expect("reader open")
            .send(job)
            .map_err(|_| agent_gone("loader"))
    }
}

impl Drop for BlockReader {
    fn drop(&mut self) {
        self.tx.take();
        if let Some(w) = self.worker.take() {
            let _ = w.join();
        }
    }
}

fn agent_gone(which: &str) -> GlsError {
    GlsError::Io(std::io::Error::other(format!("{which} thread exited")))
}

fn load_agent(file: File, path: PathBuf, rx: Receiver<LoadJob>, stats: Arc<Stats>) {
    for mut job in rx {
        let started = Instant::now();
        job.data.clear();
        job.data.resize(job.values, 0.0);
        let res = read_f64s_at(&file, &path, job.offset, &mut job.data).and_then(|()| {
            match job.data.iter().position(|v| !v.is_finite()) {
                Some(index) => Err(GlsError::NonFinite {
                    what: "genotypes",
                    index,
                }),
                None => Ok(()),
            }
        });
        stats.record((job.values * 8) as u64, started.elapsed());
        let _ = job.reply.send(res.map(|()| job.data));
    }
}

struct StoreJob {
    offset: u64,
    data: Vec<u8>,
    reply: Sender<(Result<()>, Vec<u8>)>,
}

/// Handle for an in-flight store. Consumed by [`ResultWriter::write_block_wait`].
#[must_use = "every started store must be waited on"]
pub struct StoreTicket {
    slot: usize,
    first_index: usize,
    rx: Receiver<(Result<()>, Vec<u8>)>,
}

impl StoreTicket {
    pub fn slot(&self) -> usize {
        self.slot
    }

    pub fn first_index(&self) -> usize {
        self.first_index
    }
}

/// Writes result records at offsets given by their SNP index, on a background
/// thread. The file header must already exist (see
/// [`create_result_file`](super::create_result_file)).
pub struct ResultWriter {
    header: ResultHeader,
    file: Arc<File>,
    tx: Option<Sender<StoreJob>>,
    worker: Option<JoinHandle<()>>,
    in_flight: HashSet<usize>,
    stats: Arc<Stats>,
}

impl ResultWriter {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let header = read_result_header(path.as_ref())?;
        let file = Arc::new(OpenOptions::new().write(true).open(path.as_ref())?);
        let stats = Arc::new(Stats::default());
        let (tx, rx) = channel::<StoreJob>();
        let agent_file = Arc::clone(&file);
        let agent_stats = Arc::clone(&stats);
        let worker = std::thread::Builder::new()
            .name("gls-storer".into())
            .spawn(move || store_agent(&agent_file, rx, agent_stats))?;
        Ok(ResultWriter {
            header,
            file,
            tx: Some(tx),
            worker: Some(worker),
            in_flight: HashSet::new(),
            stats,
        })
    }

    pub fn header(&self) -> &ResultHeader {
        &self.header
    }

    pub fn counters(&self) -> IoCounters {
        self.stats.snapshot()
    }

    /// Encodes `block` into `buffer` and queues it for writing.
    pub fn write_block_start(
        &mut self,
        block: &ResultBlock,
        mut buffer: OutputBuffer,
    ) -> Result<StoreTicket> {
        if self.in_flight.contains(&buffer.slot) {
            return Err(GlsError::OverlappingBuffer { slot: buffer.slot });
        }
        if block.first_index + block.len() > self.header.m {
            return Err(GlsError::dims(format!(
                "result block {}..{} outside 0..{}",
                block.first_index,
                block.first_index + block.len(),
                self.header.m
            )));
        }
        for (k, r) in block.results.iter().enumerate() {
            if r.snp_index != block.first_index + k {
                return Err(GlsError::dims("result block is not contiguous"));
            }
        }
        buffer.data.clear();
        self.header
            .encode_records(&block.results, &mut buffer.data)?;
        let (reply, rx) = channel();
        let job = StoreJob {
            offset: self.header.record_offset(block.first_index),
            data: buffer.data,
            reply,
        };
        self.tx
            .as_ref()
            .expect("writer open")
            .send(job)
            .map_err(|_| agent_gone("storer"))?;
        self.in_flight.insert(buffer.slot);
        Ok(StoreTicket {
            slot: buffer.slot,
            first_index: block.first_index,
            rx,
        })
    }

    /// Blocks until the store behind `ticket` is written; returns its buffer.
    pub fn write_block_wait(&mut self, ticket: StoreTicket) -> Result<OutputBuffer> {
        self.in_flight.remove(&ticket.slot);
        let (res, data) = ticket.rx.recv().map_err(|_| agent_gone("storer"))?;
        res?;
        Ok(OutputBuffer {
            slot: ticket.slot,
            data,
        })
    }

    /// Stops the I/O thread and flushes file data to stable storage.
    pub fn finish(mut self) -> Result<IoCounters> {
        self.tx.take();
        if let Some(w) = self.worker.take() {
            w.join().map_err(|_| agent_gone("storer"))?;
        }
        self.file.sync_data()?;
        Ok(self.stats.snapshot())
    }
}

impl Drop for ResultWriter {
    fn drop(&mut self) {
        self.tx.take();
        if let Some(w) = self.worker.take() {
            let _ = w.join();
        }
    }
}

fn store_agent(file: &File, rx: Receiver<StoreJob>, stats: Arc<Stats>) {
    for job in rx {
        let started = Instant::now();
        let res = write_all_at(file, &job.data, job.offset);
        stats.record(job.data.len() as u64, started.elapsed());
        let _ = job.reply.send((res, job.data));
    }
}

fn write_all_at(file: &File, mut buf: &[u8], mut offset: u64) -> Result<()> {
    while !buf.is_empty() {
        match file.write_at(buf, offset) {
            Ok(0) => return Err(GlsError::ShortWrite { offset }),
            Ok(k) => {
                buf = &buf[k..];
                offset += k as u64;
            }
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(())
}
