use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{channel, Receiver, Sender};

use crate::error::{GlsError, Result};

/// Byte and message counts of one rank's traffic. Messages a rank sends to
/// itself are counted too.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Traffic {
    pub bytes_sent: u64,
    pub bytes_received: u64,
    pub messages_sent: u64,
}

impl Traffic {
    pub fn total_bytes(&self) -> u64 {
        self.bytes_sent + self.bytes_received
    }
}

#[derive(Debug, Default)]
pub(crate) struct TrafficCounter {
    sent: AtomicU64,
    received: AtomicU64,
    messages: AtomicU64,
}

impl TrafficCounter {
    pub(crate) fn on_send(&self, len: usize) {
        self.sent.fetch_add(len as u64, Ordering::Relaxed);
        self.messages.fetch_add(1, Ordering::Relaxed);
    }

    pub(crate) fn on_recv(&self, len: usize) {
        self.received.fetch_add(len as u64, Ordering::Relaxed);
    }

    pub(crate) fn snapshot(&self) -> Traffic {
        Traffic {
            bytes_sent: self.sent.load(Ordering::Relaxed),
            bytes_received: self.received.load(Ordering::Relaxed),
            messages_sent: self.messages.load(Ordering::Relaxed),
        }
    }
}

/// Ordered, reliable point-to-point messaging among `size` ranks.
///
/// `send` never blocks on the receiver. Messages between one ordered pair
/// arrive in send order. The collectives are built on these two guarantees
/// and must be entered by every rank in the same sequence.
pub trait Transport {
    fn rank(&self) -> usize;
    fn size(&self) -> usize;
    fn send(&self, to: usize, bytes: Vec<u8>) -> Result<()>;
    fn recv(&self, from: usize) -> Result<Vec<u8>>;
    fn traffic(&self) -> Traffic;

    fn name(&self) -> &'static str;

    fn broadcast(&self, root: usize, bytes: Vec<u8>) -> Result<Vec<u8>> {
        if self.rank() == root {
            for to in (0..self.size()).filter(|&r| r != root) {
                self.send(to, bytes.clone())?;
            }
            Ok(bytes)
        } else {
            self.recv(root)
        }
    }

    /// Every rank contributes one message and receives all of them, indexed
    /// by source rank.
    fn allgather(&self, bytes: Vec<u8>) -> Result<Vec<Vec<u8>>> {
        let me = self.rank();
        for to in (0..self.size()).filter(|&r| r != me) {
            self.send(to, bytes.clone())?;
        }
        let mut out = Vec::with_capacity(self.size());
        let mut own = Some(bytes);
        for from in 0..self.size() {
            if from == me {
                out.push(own.take().unwrap_or_default());
            } else {
                out.push(self.recv(from)?);
            }
        }
        Ok(out)
    }

    /// `parts[d]` goes to rank `d`; the result is indexed by source rank.
    fn alltoall(&self, parts: Vec<Vec<u8>>) -> Result<Vec<Vec<u8>>> {
        if parts.len() != self.size() {
            return Err(GlsError::SizeMismatch {
                expected: self.size(),
                actual: parts.len(),
            });
        }
        let me = self.rank();
        let mut own = Vec::new();
        for (to, part) in parts.into_iter().enumerate() {
            if to == me {
                own = part;
            } else {
                self.send(to, part)?;
            }
        }
        let mut out = Vec::with_capacity(self.size());
        for from in 0..self.size() {
            if from == me {
                out.push(std::mem::take(&mut own));
            } else {
                out.push(self.recv(from)?);
            }
        }
        Ok(out)
    }

    fn barrier(&self) -> Result<()> {
        self.allgather(Vec::new()).map(|_| ())
    }
}

pub fn pack_f64s(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn unpack_f64s(bytes: &[u8]) -> Result<Vec<f64>> {
    if !bytes.len().is_multiple_of(8) {
        return Err(GlsError::SizeMismatch {
            expected: bytes.len().next_multiple_of(8),
            actual: bytes.len(),
        });
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

/// One rank of an in-process world; ranks talk over channels and are meant
/// to run on separate threads.
pub struct InProcTransport {
    rank: usize,
    to: Vec<Sender<Vec<u8>>>,
    from: Vec<Receiver<Vec<u8>>>,
    counter: TrafficCounter,
}

/// Builds `np` fully connected in-process endpoints.
pub fn inproc_world(np: usize) -> Vec<InProcTransport> {
    let mut senders: Vec<Vec<Sender<Vec<u8>>>> = (0..np).map(|_| Vec::with_capacity(np)).collect();
    let mut receivers: Vec<Vec<Option<Receiver<Vec<u8>>>>> =
        (0..np).map(|_| (0..np).map(|_| None).collect()).collect();
    for (src, row) in senders.iter_mut().enumerate() {
        for dst_receivers in receivers.iter_mut() {
            let (tx, rx) = channel();
            row.push(tx);
            dst_receivers[src] = Some(rx);
        }
    }
    senders
        .into_iter()
        .zip(receivers)
        .enumerate()
        .map(|(rank, (to, from))| InProcTransport {
            rank,
            to,
            from: from
                .into_iter()
                .map(|r| r.expect("every pair wired"))
                .collect(),
            counter: TrafficCounter::default(),
        })
        .collect()
}

impl InProcTransport {
    fn peer_check(&self, peer: usize) -> Result<()> {
        if peer >= self.to.len() {
            return Err(GlsError::TransportFailure {
                rank: peer,
                reason: format!("no such rank in a world of {}", self.to.len()),
            });
        }
        Ok(())
    }
}

impl Transport for InProcTransport {
    fn rank(&self) -> usize {
        self.rank
    }

    fn size(&self) -> usize {
        self.to.len()
    }

    fn name(&self) -> &'static str {
        "inproc"
    }

    fn send(&self, to: usize, bytes: Vec<u8>) -> Result<()> {
        self.peer_check(to)?;
        self.counter.on_send(bytes.len());
        self.to[to]
            .send(bytes)
            .map_err(|_| GlsError::TransportFailure {
                rank: to,
                reason: "peer has exited".into(),
            })
    }

    fn recv(&self, from: usize) -> Result<Vec<u8>> {
        self.peer_check(from)?;
        let bytes = self.from[from]
            .recv()
            .map_err(|_| GlsError::TransportFailure {
                rank: from,
                reason: "peer has exited".into(),
            })?;
        self.counter.on_recv(bytes.len());
        Ok(bytes)
    }

    fn traffic(&self) -> Traffic {
        self.counter.snapshot()
    }
}
