//! Rank-based collective communication.
//!
//! A world is a set of `size` ranks, each owning one [`Communicator`]. Ranks
//! only ever talk through the five collectives ([`Communicator::broadcast`],
//! [`allreduce`](Communicator::allreduce), [`allgatherv`](Communicator::allgatherv),
//! [`scatterv`](Communicator::scatterv) and [`barrier`](Communicator::barrier)).
//!
//! Every collective is routed through rank 0: each rank ships a small header
//! (call sequence number, operation, element type, root, lengths) together
//! with its payload, rank 0 checks that all headers agree, computes every
//! rank's result and sends it back. Contract violations therefore surface as
//! [`Error::Contract`] on all ranks instead of corrupting data, and
//! reductions fold contributions in ascending rank order, which makes
//! floating-point results reproducible and identical across backends.

mod inproc;
mod socket;
mod wire;

use std::cell::{Cell, RefCell};
use std::fmt;
use std::rc::Rc;
use std::str::FromStr;
use std::thread;

pub use socket::{accept_world, TcpOptions};

use crate::error::{Error, Result};
use crate::scalar::{DType, Scalar};
use wire::{Reader, Writer};

/// Point-to-point byte transport between a rank and the hub (rank 0).
/// Not part of the public surface: user code only sees collectives.
pub(crate) trait Transport: Send {
    fn send(&mut self, peer: usize, msg: Vec<u8>) -> Result<()>;
    fn recv(&mut self, peer: usize) -> Result<Vec<u8>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    InProcess,
    Socket,
}

/// Associative, commutative reduction used by [`Communicator::allreduce`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum ReduceOp {
    Sum = 0,
    Product = 1,
    Max = 2,
    Min = 3,
}

impl ReduceOp {
    pub fn identity<T: Scalar>(self) -> T {
        match self {
            ReduceOp::Sum => T::zero(),
            ReduceOp::Product => T::one(),
            ReduceOp::Max => T::lowest(),
            ReduceOp::Min => T::highest(),
        }
    }

    #[inline]
    pub fn apply<T: Scalar>(self, a: T, b: T) -> T {
        match self {
            ReduceOp::Sum => a + b,
            ReduceOp::Product => a * b,
            ReduceOp::Max => {
                if b > a {
                    b
                } else {
                    a
                }
            }
            ReduceOp::Min => {
                if b < a {
                    b
                } else {
                    a
                }
            }
        }
    }

    fn from_code(code: u8) -> Option<ReduceOp> {
        [ReduceOp::Sum, ReduceOp::Product, ReduceOp::Max, ReduceOp::Min]
            .into_iter()
            .find(|op| *op as u8 == code)
    }
}

/// One rank's connection to the world, not yet bound to a thread.
///
/// Endpoints are `Send`; a [`Communicator`] is not. Move the endpoint to the
/// thread that will act as the rank and call [`Communicator::new`] there.
pub struct Endpoint {
    rank: usize,
    size: usize,
    backend: Backend,
    transport: Box<dyn Transport>,
}

impl Endpoint {
    pub(crate) fn new(rank: usize, size: usize, backend: Backend, transport: Box<dyn Transport>) -> Self {
        Endpoint {
            rank,
            size,
            backend,
            transport,
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn size(&self) -> usize {
        self.size
    }
}

impl fmt::Debug for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Endpoint")
            .field("rank", &self.rank)
            .field("size", &self.size)
            .field("backend", &self.backend)
            .finish()
    }
}

struct Inner {
    rank: usize,
    size: usize,
    backend: Backend,
    transport: RefCell<Box<dyn Transport>>,
    seq: Cell<u64>,
}

/// A rank's handle on the world. Cheap to clone; clones share the endpoint
/// and must stay on the thread that created it.
#[derive(Clone)]
pub struct Communicator {
    inner: Rc<Inner>,
}

impl fmt::Debug for Communicator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Communicator")
            .field("rank", &self.inner.rank)
            .field("size", &self.inner.size)
            .field("backend", &self.inner.backend)
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
enum Op {
    Broadcast = 1,
    Allreduce = 2,
    Allgatherv = 3,
    Scatterv = 4,
    Barrier = 5,
}

/// The part of a collective call every rank must agree on.
struct Header {
    seq: u64,
    op: u8,
    dtype: u8,
    root: usize,
    reduce: u8,
    /// Length of the receive buffer on this rank.
    len: usize,
    counts: Vec<usize>,
}

impl Header {
    fn encode(&self, w: &mut Writer) {
        w.u64(self.seq)
            .u8(self.op)
            .u8(self.dtype)
            .usize(self.root)
            .u8(self.reduce)
            .usize(self.len)
            .usize(self.counts.len());
        for &c in &self.counts {
            w.usize(c);
        }
    }

    fn decode(r: &mut Reader<'_>) -> Result<Header> {
        let seq = r.u64()?;
        let op = r.u8()?;
        let dtype = r.u8()?;
        let root = r.usize()?;
        let reduce = r.u8()?;
        let len = r.usize()?;
        let n = r.usize()?;
        let counts = (0..n).map(|_| r.usize()).collect::<Result<_>>()?;
        Ok(Header {
            seq,
            op,
            dtype,
            root,
            reduce,
            len,
            counts,
        })
    }
}

fn op_name(code: u8) -> &'static str {
    match code {
        1 => "broadcast",
        2 => "allreduce",
        3 => "allgatherv",
        4 => "scatterv",
        5 => "barrier",
        _ => "unknown",
    }
}

fn encode_slice<T: Scalar>(data: &[T]) -> Vec<u8> {
    let mut out = Vec::with_capacity(data.len() * T::DTYPE.width());
    for &x in data {
        x.write_le(&mut out);
    }
    out
}

fn decode_into<T: Scalar>(bytes: &[u8], out: &mut [T]) {
    let w = T::DTYPE.width();
    debug_assert_eq!(bytes.len(), out.len() * w);
    for (dst, chunk) in out.iter_mut().zip(bytes.chunks_exact(w)) {
        *dst = T::read_le(chunk);
    }
}

impl Communicator {
    pub fn new(endpoint: Endpoint) -> Communicator {
        Communicator {
            inner: Rc::new(Inner {
                rank: endpoint.rank,
                size: endpoint.size,
                backend: endpoint.backend,
                transport: RefCell::new(endpoint.transport),
                seq: Cell::new(0),
            }),
        }
    }

    /// A world with a single rank.
    pub fn solo() -> Communicator {
        let ep = inproc::endpoints(1).expect("size 1 is valid").pop().unwrap();
        Communicator::new(ep)
    }

    pub fn rank(&self) -> usize {
        self.inner.rank
    }

    pub fn size(&self) -> usize {
        self.inner.size
    }

    pub fn backend(&self) -> Backend {
        self.inner.backend
    }

    pub fn is_root(&self) -> bool {
        self.inner.rank == 0
    }

    /// Replace `buf` on every rank with `root`'s contents.
    pub fn broadcast<T: Scalar>(&self, buf: &mut [T], root: usize) -> Result<()> {
        let payload = if self.rank() == root {
            encode_slice(buf)
        } else {
            Vec::new()
        };
        let out = self.collective::<T>(Op::Broadcast, root, 0, buf.len(), Vec::new(), payload)?;
        decode_into(&out, buf);
        Ok(())
    }

    /// Elementwise reduction of `buf` across ranks; every rank receives the
    /// result. Contributions are folded in ascending rank order.
    pub fn allreduce<T: Scalar>(&self, buf: &mut [T], op: ReduceOp) -> Result<()> {
        let out = self.collective::<T>(Op::Allreduce, 0, op as u8, buf.len(), Vec::new(), encode_slice(buf))?;
        decode_into(&out, buf);
        Ok(())
    }

    /// Concatenate every rank's `send` (in rank order) into `recv` on all
    /// ranks. `counts[r]` is the length contributed by rank `r`.
    pub fn allgatherv<T: Scalar>(&self, send: &[T], recv: &mut [T], counts: &[usize]) -> Result<()> {
        let out = self.collective::<T>(Op::Allgatherv, 0, 0, recv.len(), counts.to_vec(), encode_slice(send))?;
        decode_into(&out, recv);
        Ok(())
    }

    /// Split `root`'s `send` into contiguous chunks of `counts[r]` elements
    /// and deliver chunk `r` to rank `r`. `send` is ignored on other ranks.
    pub fn scatterv<T: Scalar>(&self, send: &[T], recv: &mut [T], counts: &[usize], root: usize) -> Result<()> {
        let payload = if self.rank() == root {
            encode_slice(send)
        } else {
            Vec::new()
        };
        let out = self.collective::<T>(Op::Scatterv, root, 0, recv.len(), counts.to_vec(), payload)?;
        decode_into(&out, recv);
        Ok(())
    }

    pub fn barrier(&self) -> Result<()> {
        self.collective::<u8Marker>(Op::Barrier, 0, 0, 0, Vec::new(), Vec::new())
            .map(|_| ())
    }

    /// Collective boolean AND. Lets one rank's local failure abort a
    /// multi-step operation on all ranks without deadlocking the others.
    pub fn all_ok(&self, ok: bool) -> Result<bool> {
        let mut flag = [i64::from(ok)];
        self.allreduce(&mut flag, ReduceOp::Min)?;
        Ok(flag[0] == 1)
    }

    fn collective<T: Wire>(
        &self,
        op: Op,
        root: usize,
        reduce: u8,
        len: usize,
        counts: Vec<usize>,
        payload: Vec<u8>,
    ) -> Result<Vec<u8>> {
        let seq = self.inner.seq.get();
        self.inner.seq.set(seq + 1);
        let header = Header {
            seq,
            op: op as u8,
            dtype: T::CODE,
            root,
            reduce,
            len,
            counts,
        };
        let mut transport = self.inner.transport.borrow_mut();
        if self.rank() != 0 {
            let mut w = Writer::with_capacity(payload.len() + 64);
            header.encode(&mut w);
            w.bytes(&payload);
            transport.send(0, w.finish())?;
            let reply = transport.recv(0)?;
            let mut r = Reader::new(&reply);
            let status = r.u8()?;
            let body = r.bytes()?;
            return match status {
                0 => Ok(body.to_vec()),
                1 => Err(Error::Contract(String::from_utf8_lossy(body).into_owned())),
                _ => Err(Error::Transport(String::from_utf8_lossy(body).into_owned())),
            };
        }

        let size = self.size();
        let mut msgs = Vec::with_capacity(size);
        msgs.push(Vec::new());
        for peer in 1..size {
            match transport.recv(peer) {
                Ok(m) => msgs.push(m),
                Err(e) => {
                    let note = reply_err(2, &format!("rank {peer} failed: {e}"));
                    for p in 1..peer {
                        let _ = transport.send(p, note.clone());
                    }
                    return Err(e);
                }
            }
        }
        let mut headers = Vec::with_capacity(size);
        let mut payloads: Vec<&[u8]> = Vec::with_capacity(size);
        headers.push(header);
        payloads.push(&payload);
        for m in &msgs[1..] {
            let mut r = Reader::new(m);
            headers.push(Header::decode(&mut r)?);
            payloads.push(r.bytes()?);
        }

        match hub_compute::<T>(&headers, &payloads) {
            Ok(outs) => {
                let mut outs = outs.into_iter();
                let own = outs.next().unwrap();
                for (peer, out) in outs.enumerate() {
                    let mut w = Writer::with_capacity(out.len() + 16);
                    w.u8(0).bytes(&out);
                    transport.send(peer + 1, w.finish())?;
                }
                Ok(own)
            }
            Err(msg) => {
                let note = reply_err(1, &msg);
                for peer in 1..size {
                    transport.send(peer, note.clone())?;
                }
                Err(Error::Contract(msg))
            }
        }
    }
}

fn reply_err(status: u8, msg: &str) -> Vec<u8> {
    let mut w = Writer::default();
    w.u8(status).bytes(msg.as_bytes());
    w.finish()
}

/// Element types the hub needs to fold: every [`Scalar`] plus a marker used
/// for payload-free calls.
trait Wire {
    const CODE: u8;
    const WIDTH: usize;
    fn fold(op: ReduceOp, acc: &mut [u8], other: &[u8]);
}

impl<T: Scalar> Wire for T {
    const CODE: u8 = T::DTYPE as u8;
    const WIDTH: usize = match T::DTYPE {
        DType::F32 => 4,
        DType::F64 | DType::I64 => 8,
    };

    fn fold(op: ReduceOp, acc: &mut [u8], other: &[u8]) {
        for (a, b) in acc.chunks_exact_mut(Self::WIDTH).zip(other.chunks_exact(Self::WIDTH)) {
            let v = op.apply(T::read_le(a), T::read_le(b));
            let mut tmp = Vec::with_capacity(Self::WIDTH);
            v.write_le(&mut tmp);
            a.copy_from_slice(&tmp);
        }
    }
}

#[allow(non_camel_case_types)]
struct u8Marker;

impl Wire for u8Marker {
    const CODE: u8 = 255;
    const WIDTH: usize = 1;
    fn fold(_: ReduceOp, _: &mut [u8], _: &[u8]) {}
}

/// Validate all headers and compute each rank's output bytes.
fn hub_compute<T: Wire>(headers: &[Header], payloads: &[&[u8]]) -> std::result::Result<Vec<Vec<u8>>, String> {
    let size = headers.len();
    let h0 = &headers[0];
    let name = op_name(h0.op);
    for (r, h) in headers.iter().enumerate() {
        if h.seq != h0.seq || h.op != h0.op {
            return Err(format!(
                "rank {r} is at call #{} ({}) while rank 0 is at call #{} ({})",
                h.seq,
                op_name(h.op),
                h0.seq,
                name
            ));
        }
        if h.dtype != h0.dtype {
            return Err(format!("{name}: element type differs between rank 0 and rank {r}"));
        }
    }
    let w = T::WIDTH;
    let same_len = || -> std::result::Result<(), String> {
        for (r, h) in headers.iter().enumerate() {
            if h.len != h0.len {
                return Err(format!(
                    "{name}: buffer length {} on rank {r} but {} on rank 0",
                    h.len, h0.len
                ));
            }
        }
        Ok(())
    };
    let same_root = || -> std::result::Result<usize, String> {
        for (r, h) in headers.iter().enumerate() {
            if h.root != h0.root {
                return Err(format!("{name}: root {} on rank {r} but {} on rank 0", h.root, h0.root));
            }
        }
        if h0.root >= size {
            return Err(format!("{name}: root {} outside world of size {size}", h0.root));
        }
        Ok(h0.root)
    };
    let same_counts = || -> std::result::Result<&[usize], String> {
        for (r, h) in headers.iter().enumerate() {
            if h.counts != h0.counts {
                return Err(format!(
                    "{name}: counts {:?} on rank {r} but {:?} on rank 0",
                    h.counts, h0.counts
                ));
            }
        }
        if h0.counts.len() != size {
            return Err(format!("{name}: {} counts for a world of size {size}", h0.counts.len()));
        }
        Ok(&h0.counts)
    };

    match h0.op {
        x if x == Op::Barrier as u8 => Ok(vec![Vec::new(); size]),
        x if x == Op::Broadcast as u8 => {
            same_len()?;
            let root = same_root()?;
            let data = payloads[root];
            if data.len() != h0.len * w {
                return Err(format!(
                    "broadcast: root sent {} bytes, expected {}",
                    data.len(),
                    h0.len * w
                ));
            }
            Ok(vec![data.to_vec(); size])
        }
        x if x == Op::Allreduce as u8 => {
            same_len()?;
            for (r, h) in headers.iter().enumerate() {
                if h.reduce != h0.reduce {
                    return Err(format!("allreduce: reduction op differs between rank 0 and rank {r}"));
                }
            }
            let op = ReduceOp::from_code(h0.reduce).ok_or("allreduce: unknown reduction op")?;
            let mut acc = payloads[0].to_vec();
            for p in &payloads[1..] {
                T::fold(op, &mut acc, p);
            }
            Ok(vec![acc; size])
        }
        x if x == Op::Allgatherv as u8 => {
            let counts = same_counts()?;
            let total: usize = counts.iter().sum();
            for (r, h) in headers.iter().enumerate() {
                if payloads[r].len() != counts[r] * w {
                    return Err(format!(
                        "allgatherv: rank {r} sent {} elements but counts say {}",
                        payloads[r].len() / w,
                        counts[r]
                    ));
                }
                if h.len != total {
                    return Err(format!(
                        "allgatherv: receive buffer of {} on rank {r}, expected {total}",
                        h.len
                    ));
                }
            }
            let all = payloads.concat();
            Ok(vec![all; size])
        }
        x if x == Op::Scatterv as u8 => {
            let counts = same_counts()?;
            let root = same_root()?;
            let total: usize = counts.iter().sum();
            if payloads[root].len() != total * w {
                return Err(format!(
                    "scatterv: root sent {} elements but counts sum to {total}",
                    payloads[root].len() / w
                ));
            }
            for (r, h) in headers.iter().enumerate() {
                if h.len != counts[r] {
                    return Err(format!(
                        "scatterv: receive buffer of {} on rank {r}, counts say {}",
                        h.len, counts[r]
                    ));
                }
            }
            let mut outs = Vec::with_capacity(size);
            let mut off = 0;
            for &c in counts {
                outs.push(payloads[root][off * w..(off + c) * w].to_vec());
                off += c;
            }
            Ok(outs)
        }
        other => Err(format!("unknown collective code {other}")),
    }
}

/// How to build a world: `inproc:<P>` or `tcp:<host:port>,...,rank=<r>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendSpec {
    InProcess { size: usize },
    Tcp { peers: Vec<String>, rank: usize },
}

impl BackendSpec {
    pub fn size(&self) -> usize {
        match self {
            BackendSpec::InProcess { size } => *size,
            BackendSpec::Tcp { peers, .. } => peers.len(),
        }
    }
}

impl FromStr for BackendSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(n) = s.strip_prefix("inproc:") {
            let size: usize = n.parse().map_err(|_| Error::Init(format!("bad rank count in {s:?}")))?;
            if size == 0 {
                return Err(Error::Init("world size must be at least 1".into()));
            }
            return Ok(BackendSpec::InProcess { size });
        }
        if let Some(rest) = s.strip_prefix("tcp:") {
            let mut peers = Vec::new();
            let mut rank = None;
            for item in rest.split(',').map(str::trim).filter(|x| !x.is_empty()) {
                if let Some(r) = item.strip_prefix("rank=") {
                    rank = Some(r.parse().map_err(|_| Error::Init(format!("bad rank in {s:?}")))?);
                } else if item.rsplit_once(':').is_some() {
                    peers.push(item.to_string());
                } else {
                    return Err(Error::Init(format!("peer {item:?} is not host:port")));
                }
            }
            let rank = rank.ok_or_else(|| Error::Init(format!("missing rank=<r> in {s:?}")))?;
            if peers.is_empty() {
                return Err(Error::Init("empty peer list".into()));
            }
            if rank >= peers.len() {
                return Err(Error::Init(format!(
                    "rank {rank} outside world of size {}",
                    peers.len()
                )));
            }
            return Ok(BackendSpec::Tcp { peers, rank });
        }
        Err(Error::Init(format!(
            "unknown backend {s:?} (expected inproc:<P> or tcp:<host:port,...>,rank=<r>)"
        )))
    }
}

impl fmt::Display for BackendSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendSpec::InProcess { size } => write!(f, "inproc:{size}"),
            BackendSpec::Tcp { peers, rank } => write!(f, "tcp:{},rank={rank}", peers.join(",")),
        }
    }
}

/// The endpoints this process hosts: all `P` for `inproc:<P>`, a single one
/// for a TCP rank.
pub fn init(spec: &BackendSpec, tcp: &TcpOptions) -> Result<Vec<Endpoint>> {
    match spec {
        BackendSpec::InProcess { size } => inproc::endpoints(*size),
        BackendSpec::Tcp { peers, rank } => Ok(vec![socket::connect(peers, *rank, tcp)?]),
    }
}

/// Run `f` once per hosted rank, each on its own thread, and collect the
/// results in rank order. A panic on any rank is propagated.
pub fn launch<R, F>(spec: &BackendSpec, tcp: &TcpOptions, f: F) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(Communicator) -> R + Sync,
{
    run_endpoints(init(spec, tcp)?, f)
}

/// Run `f` on `size` in-process ranks.
pub fn run_inproc<R, F>(size: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(Communicator) -> R + Sync,
{
    run_endpoints(inproc::endpoints(size).expect("size >= 1"), f).unwrap()
}

/// Spawn one thread per endpoint and run `f` on each.
pub fn run_endpoints<R, F>(endpoints: Vec<Endpoint>, f: F) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(Communicator) -> R + Sync,
{
    if endpoints.len() == 1 {
        let ep = endpoints.into_iter().next().unwrap();
        return Ok(vec![f(Communicator::new(ep))]);
    }
    let f = &f;
    thread::scope(|s| {
        let handles: Vec<_> = endpoints
            .into_iter()
            .map(|ep| {
                thread::Builder::new()
                    .name(format!("rank-{}", ep.rank()))
                    .spawn_scoped(s, move || f(Communicator::new(ep)))
                    .expect("spawn rank thread")
            })
            .collect();
        Ok(handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|p| std::panic::resume_unwind(p)))
            .collect())
    })
}

/// Bring up a `size`-rank TCP world on the loopback interface inside this
/// process (one thread per rank) and run `f` on each rank. Port 0 is bound
/// first so no fixed port is needed.
pub fn run_tcp_local<R, F>(size: usize, f: F) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(Communicator) -> R + Sync,
{
    let listener = std::net::TcpListener::bind("127.0.0.1:0")?;
    let addr = listener.local_addr()?.to_string();
    let peers: Vec<String> = (0..size).map(|_| addr.clone()).collect();
    let opts = TcpOptions::default();
    let f = &f;
    let peers = &peers;
    let opts = &opts;
    thread::scope(|s| {
        let hub = s.spawn(move || -> Result<R> {
            let ep = accept_world(listener, size, opts)?;
            Ok(f(Communicator::new(ep)))
        });
        let others: Vec<_> = (1..size)
            .map(|rank| {
                s.spawn(move || -> Result<R> {
                    let ep = socket::connect(peers, rank, opts)?;
                    Ok(f(Communicator::new(ep)))
                })
            })
            .collect();
        let mut out = Vec::with_capacity(size);
        out.push(hub.join().unwrap_or_else(|p| std::panic::resume_unwind(p))?);
        for h in others {
            out.push(h.join().unwrap_or_else(|p| std::panic::resume_unwind(p))?);
        }
        Ok(out)
    })
}

#[cfg(test)]
mod tests;
