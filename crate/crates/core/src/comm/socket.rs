//! Multi-process ranks over TCP.
//!
//! Rank 0 listens on the first address of the peer list and every other rank
//! connects to it, giving a star topology that matches the hub-based
//! collective protocol. Frames are a little-endian `u64` length followed by
//! the message bytes.

use std::io::{ErrorKind, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::thread;
use std::time::{Duration, Instant};

use super::wire::{Reader, Writer};
use super::{Backend, Endpoint, Transport};
use crate::error::{Error, Result};

const HELLO_MAGIC: &[u8; 4] = b"DSTH";

#[derive(Debug, Clone)]
pub struct TcpOptions {
    /// How long rank 0 waits for all peers, and how long the others keep
    /// retrying to reach rank 0.
    pub connect_timeout: Duration,
    /// Read/write timeout once the world is up. `None` blocks forever.
    pub io_timeout: Option<Duration>,
}

impl Default for TcpOptions {
    fn default() -> Self {
        TcpOptions {
            connect_timeout: Duration::from_secs(30),
            io_timeout: None,
        }
    }
}

struct Sockets {
    links: Vec<Option<TcpStream>>,
}

impl Sockets {
    fn stream(&mut self, peer: usize) -> Result<&mut TcpStream> {
        self.links
            .get_mut(peer)
            .and_then(Option::as_mut)
            .ok_or_else(|| Error::Transport(format!("no connection to rank {peer}")))
    }
}

fn write_frame(s: &mut TcpStream, msg: &[u8]) -> std::io::Result<()> {
    s.write_all(&(msg.len() as u64).to_le_bytes())?;
    s.write_all(msg)?;
    s.flush()
}

fn read_frame(s: &mut TcpStream) -> std::io::Result<Vec<u8>> {
    let mut len = [0u8; 8];
    s.read_exact(&mut len)?;
    let len = u64::from_le_bytes(len) as usize;
    let mut buf = vec![0u8; len];
    s.read_exact(&mut buf)?;
    Ok(buf)
}

impl Transport for Sockets {
    fn send(&mut self, peer: usize, msg: Vec<u8>) -> Result<()> {
        write_frame(self.stream(peer)?, &msg).map_err(|e| Error::Transport(format!("send to rank {peer}: {e}")))
    }

    fn recv(&mut self, peer: usize) -> Result<Vec<u8>> {
        read_frame(self.stream(peer)?).map_err(|e| Error::Transport(format!("recv from rank {peer}: {e}")))
    }
}

fn resolve(addr: &str) -> Result<SocketAddr> {
    addr.to_socket_addrs()
        .map_err(|e| Error::Init(format!("cannot resolve {addr}: {e}")))?
        .next()
        .ok_or_else(|| Error::Init(format!("no address for {addr}")))
}

/// Join a TCP world described by `peers` as rank `rank`. The world size is
/// the length of the peer list; rank 0 binds `peers[0]`.
pub fn connect(peers: &[String], rank: usize, opts: &TcpOptions) -> Result<Endpoint> {
    let size = peers.len();
    if size == 0 {
        return Err(Error::Init("empty peer list".into()));
    }
    if rank >= size {
        return Err(Error::Init(format!("rank {rank} outside world of size {size}")));
    }
    let hub = resolve(&peers[0])?;
    if rank == 0 {
        let listener =
            TcpListener::bind(hub).map_err(|e| Error::Init(format!("rank 0 cannot listen on {hub}: {e}")))?;
        accept_world(listener, size, opts)
    } else {
        join_world(hub, rank, size, opts)
    }
}

/// Bring up rank 0 on an already bound listener. Useful when the port is
/// chosen by the OS (bind to port 0) before the other ranks are started.
pub fn accept_world(listener: TcpListener, size: usize, opts: &TcpOptions) -> Result<Endpoint> {
    let mut links: Vec<Option<TcpStream>> = (0..size).map(|_| None).collect();
    let deadline = Instant::now() + opts.connect_timeout;
    listener.set_nonblocking(true).map_err(|e| Error::Init(e.to_string()))?;
    let mut joined = 1;
    let mut failure = None;
    while joined < size {
        match listener.accept() {
            Ok((mut stream, _)) => {
                stream
                    .set_nonblocking(false)
                    .and_then(|_| stream.set_nodelay(true))
                    .and_then(|_| stream.set_read_timeout(Some(opts.connect_timeout)))
                    .map_err(|e| Error::Init(e.to_string()))?;
                let hello = read_frame(&mut stream).map_err(|e| Error::Init(format!("bad hello from peer: {e}")))?;
                match parse_hello(&hello, size) {
                    Ok(r) if links[r].is_none() => {
                        links[r] = Some(stream);
                        joined += 1;
                    }
                    Ok(r) => {
                        let msg = format!("rank {r} joined twice");
                        let _ = write_frame(&mut stream, &reply(Some(&msg)));
                        failure = Some(msg);
                        break;
                    }
                    Err(msg) => {
                        let _ = write_frame(&mut stream, &reply(Some(&msg)));
                        failure = Some(msg);
                        break;
                    }
                }
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => {
                if Instant::now() >= deadline {
                    failure = Some(format!("timed out waiting for peers ({joined} of {size} joined)"));
                    break;
                }
                thread::sleep(Duration::from_millis(5));
            }
            Err(e) => return Err(Error::Init(format!("accept failed: {e}"))),
        }
    }
    let ack = reply(failure.as_deref());
    for s in links.iter_mut().flatten() {
        let _ = write_frame(s, &ack);
        s.set_read_timeout(opts.io_timeout)
            .and_then(|_| s.set_write_timeout(opts.io_timeout))
            .map_err(|e| Error::Init(e.to_string()))?;
    }
    if let Some(msg) = failure {
        return Err(Error::Init(msg));
    }
    Ok(Endpoint::new(0, size, Backend::Socket, Box::new(Sockets { links })))
}

fn join_world(hub: SocketAddr, rank: usize, size: usize, opts: &TcpOptions) -> Result<Endpoint> {
    let deadline = Instant::now() + opts.connect_timeout;
    let mut stream = loop {
        let left = deadline.saturating_duration_since(Instant::now());
        if left.is_zero() {
            return Err(Error::Init(format!("rank {rank} could not reach rank 0 at {hub}")));
        }
        match TcpStream::connect_timeout(&hub, left) {
            Ok(s) => break s,
            Err(_) => thread::sleep(Duration::from_millis(20).min(left)),
        }
    };
    stream
        .set_nodelay(true)
        .and_then(|_| stream.set_read_timeout(Some(opts.connect_timeout)))
        .map_err(|e| Error::Init(e.to_string()))?;
    let mut hello = Writer::default();
    hello.bytes(HELLO_MAGIC).usize(rank).usize(size);
    write_frame(&mut stream, &hello.finish()).map_err(|e| Error::Init(e.to_string()))?;
    // rank 0 only acknowledges once everyone has joined
    stream.set_read_timeout(None).map_err(|e| Error::Init(e.to_string()))?;
    let ack = read_frame(&mut stream).map_err(|e| Error::Init(format!("no ack from rank 0: {e}")))?;
    let mut r = Reader::new(&ack);
    if r.u8().map_err(|e| Error::Init(e.to_string()))? != 0 {
        let msg = r.bytes().unwrap_or(b"rejected");
        return Err(Error::Init(String::from_utf8_lossy(msg).into_owned()));
    }
    stream
        .set_read_timeout(opts.io_timeout)
        .and_then(|_| stream.set_write_timeout(opts.io_timeout))
        .map_err(|e| Error::Init(e.to_string()))?;
    let mut links: Vec<Option<TcpStream>> = (0..size).map(|_| None).collect();
    links[0] = Some(stream);
    Ok(Endpoint::new(rank, size, Backend::Socket, Box::new(Sockets { links })))
}

fn parse_hello(msg: &[u8], size: usize) -> std::result::Result<usize, String> {
    let mut r = Reader::new(msg);
    let bad = |_| "malformed hello".to_string();
    if r.bytes().map_err(bad)? != HELLO_MAGIC {
        return Err("bad hello magic".into());
    }
    let rank = r.usize().map_err(bad)?;
    let their_size = r.usize().map_err(bad)?;
    if their_size != size {
        return Err(format!(
            "world size mismatch: rank {rank} expects {their_size}, rank 0 expects {size}"
        ));
    }
    if rank == 0 || rank >= size {
        return Err(format!("invalid peer rank {rank}"));
    }
    Ok(rank)
}

fn reply(err: Option<&str>) -> Vec<u8> {
    let mut w = Writer::default();
    match err {
        None => {
            w.u8(0);
        }
        Some(msg) => {
            w.u8(1).bytes(msg.as_bytes());
        }
    }
    w.finish()
}
