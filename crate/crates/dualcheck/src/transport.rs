//! Ways of reaching the server under test.

use std::collections::{BTreeMap, VecDeque};
use std::io::{self, ErrorKind, Read, Write};
use std::net::{SocketAddr, TcpStream};
use std::thread;
use std::time::{Duration, Instant};

use crate::http::Endpoint;
use crate::sut::{Mutant, ReferenceServer};
use crate::wire;

/// Sends are fire-and-forget; `recv` returns at most one message, with the
/// endpoint it is addressed to, or `None` after the timeout.
pub trait Transport {
    fn send(&mut self, from: Endpoint, bytes: &[u8]) -> io::Result<()>;
    fn recv(&mut self, timeout: Duration) -> io::Result<Option<(Endpoint, Vec<u8>)>>;
    /// Time since the start of the run, used to stamp trace entries.
    fn offset(&self) -> u64;
}

/// Runs the reference server inline. Responses are delivered in the order
/// the requests were sent and `offset` counts transport calls, so runs are
/// fully deterministic.
pub struct InProcess {
    server: ReferenceServer,
    queue: VecDeque<(Endpoint, Vec<u8>)>,
    ticks: u64,
}

impl InProcess {
    pub fn new(mutant: Option<Mutant>, seed: u64) -> Self {
        InProcess {
            server: ReferenceServer::new(mutant, seed),
            queue: VecDeque::new(),
            ticks: 0,
        }
    }
}

impl Transport for InProcess {
    fn send(&mut self, from: Endpoint, bytes: &[u8]) -> io::Result<()> {
        self.ticks += 1;
        let out = self.server.handle_bytes(bytes);
        self.queue.push_back((from, out));
        Ok(())
    }

    fn recv(&mut self, _timeout: Duration) -> io::Result<Option<(Endpoint, Vec<u8>)>> {
        self.ticks += 1;
        Ok(self.queue.pop_front())
    }

    fn offset(&self) -> u64 {
        self.ticks
    }
}

/// One TCP connection per client endpoint, opened on first use.
pub struct Socket {
    addr: SocketAddr,
    conns: BTreeMap<Endpoint, (TcpStream, Vec<u8>)>,
    start: Instant,
}

impl Socket {
    pub fn new(addr: SocketAddr) -> Self {
        Socket {
            addr,
            conns: BTreeMap::new(),
            start: Instant::now(),
        }
    }

    /// Moves any bytes waiting on the connections into their buffers.
    fn poll(&mut self) -> io::Result<()> {
        let mut chunk = [0u8; 4096];
        for (stream, buf) in self.conns.values_mut() {
            loop {
                match stream.read(&mut chunk) {
                    Ok(0) => break,
                    Ok(n) => buf.extend_from_slice(&chunk[..n]),
                    Err(e) if e.kind() == ErrorKind::WouldBlock => break,
                    Err(e) => return Err(e),
                }
            }
        }
        Ok(())
    }

    fn take_frame(&mut self) -> Option<(Endpoint, Vec<u8>)> {
        self.conns.iter_mut().find_map(|(ep, (_, buf))| {
            let n = wire::frame_len(buf)?;
            Some((*ep, buf.drain(..n).collect()))
        })
    }
}

impl Transport for Socket {
    fn send(&mut self, from: Endpoint, bytes: &[u8]) -> io::Result<()> {
        if !self.conns.contains_key(&from) {
            let stream = TcpStream::connect(self.addr)?;
            stream.set_nonblocking(true)?;
            stream.set_nodelay(true)?;
            self.conns.insert(from, (stream, Vec::new()));
        }
        let (stream, _) = self.conns.get_mut(&from).expect("connection exists");
        stream.set_nonblocking(false)?;
        stream.write_all(bytes)?;
        stream.set_nonblocking(true)
    }

    fn recv(&mut self, timeout: Duration) -> io::Result<Option<(Endpoint, Vec<u8>)>> {
        let deadline = Instant::now() + timeout;
        loop {
            self.poll()?;
            if let Some(frame) = self.take_frame() {
                return Ok(Some(frame));
            }
            if Instant::now() >= deadline {
                return Ok(None);
            }
            thread::sleep(Duration::from_millis(1));
        }
    }

    fn offset(&self) -> u64 {
        self.start.elapsed().as_millis() as u64
    }
}
