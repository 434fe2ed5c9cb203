use std::cell::RefCell;
use std::collections::VecDeque;
use std::io::{Read, Write};
use std::net::Shutdown;
use std::os::unix::net::{UnixListener, UnixStream};
use std::path::{Path, PathBuf};
use std::sync::mpsc::{channel, Sender};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use super::transport::{Traffic, TrafficCounter, Transport};
use crate::error::{GlsError, Result};

/// Frame lengths are 4-byte little-endian.
const MAX_FRAME: usize = u32::MAX as usize;

struct Peer {
    reader: RefCell<UnixStream>,
    writer: Option<Sender<Vec<u8>>>,
    thread: Option<JoinHandle<()>>,
}

/// A rank of a multi-process world meshed over Unix domain sockets in a
/// shared rendezvous directory.
///
/// Every rank listens on `rank-{r}.sock`, dials all lower ranks and accepts
/// the higher ones. Each outgoing stream has a writer thread, so `send` only
/// enqueues.
pub struct SocketTransport {
    rank: usize,
    size: usize,
    peers: Vec<Option<Peer>>,
    loopback: RefCell<VecDeque<Vec<u8>>>,
    counter: TrafficCounter,
}

pub fn socket_path(dir: &Path, rank: usize) -> PathBuf {
    dir.join(format!("rank-{rank}.sock"))
}

fn failure(rank: usize, reason: impl std::fmt::Display) -> GlsError {
    GlsError::TransportFailure {
        rank,
        reason: reason.to_string(),
    }
}

fn write_frame(stream: &mut UnixStream, payload: &[u8]) -> std::io::Result<()> {
    stream.write_all(&(payload.len() as u32).to_le_bytes())?;
    stream.write_all(payload)
}

fn read_frame(stream: &mut UnixStream) -> std::io::Result<Vec<u8>> {
    let mut len = [0u8; 4];
    stream.read_exact(&mut len)?;
    let len = u32::from_le_bytes(len) as usize;
    let mut buf = vec![0u8; len];
    stream.read_exact(&mut buf)?;
    Ok(buf)
}

impl SocketTransport {
    /// Joins the world. Blocks until all `size` ranks are connected or
    /// `timeout` elapses.
    pub fn connect(rank: usize, size: usize, dir: &Path, timeout: Duration) -> Result<Self> {
        if rank >= size {
            return Err(GlsError::Config(format!(
                "rank {rank} outside world of {size}"
            )));
        }
        let deadline = Instant::now() + timeout;
        let own = socket_path(dir, rank);
        let _ = std::fs::remove_file(&own);
        let listener = UnixListener::bind(&own)
            .map_err(|e| failure(rank, format!("bind {}: {e}", own.display())))?;

        let mut streams: Vec<Option<UnixStream>> = (0..size).map(|_| None).collect();
        for (peer, slot) in streams.iter_mut().enumerate().take(rank) {
            let path = socket_path(dir, peer);
            let mut stream = loop {
                match UnixStream::connect(&path) {
                    Ok(s) => break s,
                    Err(e) if Instant::now() >= deadline => {
                        return Err(failure(peer, format!("connect: {e}")))
                    }
                    Err(_) => thread::sleep(Duration::from_millis(10)),
                }
            };
            write_frame(&mut stream, &(rank as u64).to_le_bytes()).map_err(|e| failure(peer, e))?;
            *slot = Some(stream);
        }

        listener
            .set_nonblocking(true)
            .map_err(|e| failure(rank, e))?;
        let mut pending = size - rank - 1;
        while pending > 0 {
            match listener.accept() {
                Ok((mut stream, _)) => {
                    stream
                        .set_nonblocking(false)
                        .map_err(|e| failure(rank, e))?;
                    stream
                        .set_read_timeout(Some(
                            deadline
                                .saturating_duration_since(Instant::now())
                                .max(Duration::from_millis(1)),
                        ))
                        .map_err(|e| failure(rank, e))?;
                    let hello = read_frame(&mut stream)
                        .map_err(|e| failure(rank, format!("handshake: {e}")))?;
                    stream
                        .set_read_timeout(None)
                        .map_err(|e| failure(rank, e))?;
                    let peer = hello
                        .try_into()
                        .map(u64::from_le_bytes)
                        .map_err(|_| failure(rank, "malformed handshake"))?
                        as usize;
                    if peer <= rank || peer >= size || streams[peer].is_some() {
                        return Err(failure(peer, "unexpected handshake"));
                    }
                    streams[peer] = Some(stream);
                    pending -= 1;
                }
                Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                    if Instant::now() >= deadline {
                        return Err(failure(rank, format!("{pending} peers never connected")));
                    }
                    thread::sleep(Duration::from_millis(5));
                }
                Err(e) => return Err(failure(rank, e)),
            }
        }
        drop(listener);
        let _ = std::fs::remove_file(&own);

        let mut peers = Vec::with_capacity(size);
        for (peer, stream) in streams.into_iter().enumerate() {
            let Some(stream) = stream else {
                peers.push(None);
                continue;
            };
            let mut out = stream.try_clone().map_err(|e| failure(peer, e))?;
            let (tx, rx) = channel::<Vec<u8>>();
            let thread = thread::Builder::new()
                .name(format!("gls-net-{rank}-{peer}"))
                .spawn(move || {
                    for msg in rx {
                        if write_frame(&mut out, &msg).is_err() {
                            break;
                        }
                    }
                    let _ = out.flush();
                })
                .map_err(|e| failure(peer, e))?;
            peers.push(Some(Peer {
                reader: RefCell::new(stream),
                writer: Some(tx),
                thread: Some(thread),
            }));
        }
        Ok(SocketTransport {
            rank,
            size,
            peers,
            loopback: RefCell::new(VecDeque::new()),
            counter: TrafficCounter::default(),
        })
    }

    fn peer(&self, peer: usize) -> Result<&Peer> {
        self.peers
            .get(peer)
            .and_then(Option::as_ref)
            .ok_or_else(|| failure(peer, format!("no such peer in a world of {}", self.size)))
    }
}

impl Transport for SocketTransport {
    fn rank(&self) -> usize {
        self.rank
    }

    fn size(&self) -> usize {
        self.size
    }

    fn name(&self) -> &'static str {
        "socket"
    }

    fn send(&self, to: usize, bytes: Vec<u8>) -> Result<()> {
        if bytes.len() > MAX_FRAME {
            return Err(failure(
                to,
                format!("{}-byte message exceeds the frame limit", bytes.len()),
            ));
        }
        self.counter.on_send(bytes.len());
        if to == self.rank {
            self.loopback.borrow_mut().push_back(bytes);
            return Ok(());
        }
        let peer = self.peer(to)?;
        peer.writer
            .as_ref()
            .expect("writer lives until drop")
            .send(bytes)
            .map_err(|_| failure(to, "connection lost"))
    }

    fn recv(&self, from: usize) -> Result<Vec<u8>> {
        let bytes = if from == self.rank {
            self.loopback
                .borrow_mut()
                .pop_front()
                .ok_or_else(|| failure(from, "receive from self with nothing queued"))?
        } else {
            let peer = self.peer(from)?;
            let mut stream = peer.reader.borrow_mut();
            read_frame(&mut stream).map_err(|e| failure(from, e))?
        };
        self.counter.on_recv(bytes.len());
        Ok(bytes)
    }

    fn traffic(&self) -> Traffic {
        self.counter.snapshot()
    }
}

impl Drop for SocketTransport {
    fn drop(&mut self) {
        for peer in self.peers.iter_mut().flatten() {
            peer.writer.take();
            if let Some(t) = peer.thread.take() {
                let _ = t.join();
            }
            let _ = peer.reader.get_mut().shutdown(Shutdown::Write);
        }
    }
}
