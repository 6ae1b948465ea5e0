//! C ABI for `diststat`.
//!
//! Conventions:
//! * every function returns a [`DsStatus`]; on failure
//!   [`ds_last_error`] describes the problem (per thread);
//! * results are written through out-pointers;
//! * handles are opaque and owned by the caller, who releases them with
//!   the matching `*_free`;
//! * handles belong to the thread (rank) that created them;
//! * arrays hold `f64` in column-major order. A *distributed* array is
//!   split along its last dimension; a *replicated* one is held in full by
//!   every rank;
//! * collective calls must be made by all ranks in the same order.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, c_void, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use diststat::comm::{run_endpoints, BackendSpec, TcpOptions};
use diststat::linalg::{matmul, opnorm, MatIn, MatOut, Norm};
use diststat::solvers::{ConvergenceMonitor, CoxOptions, CoxState, MdsState, NmfState, Ties};
use diststat::{Communicator, DenseArray, DistArray, Error, ErrorKind, RandFill, ReduceOp};

/// Result code of every entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DsStatus {
    Ok = 0,
    InvalidArgument = 1,
    Init = 2,
    Contract = 3,
    Transport = 4,
    Shape = 5,
    Numeric = 6,
    Format = 7,
    Io = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DsReduceOp {
    Sum = 0,
    Product = 1,
    Max = 2,
    Min = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DsNorm {
    L1 = 0,
    Linf = 1,
    L2Power = 2,
    L2Quick = 3,
}

/// A rank's handle on its world.
pub struct DsComm {
    comm: Communicator,
}

/// A distributed or replicated `f64` array.
pub struct DsArray {
    inner: Arr,
    comm: Communicator,
}

enum Arr {
    Dist(DistArray<f64>),
    Rep(DenseArray<f64>),
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Fail(DsStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Fail {
        let code = match e.kind() {
            ErrorKind::Init => DsStatus::Init,
            ErrorKind::Contract => DsStatus::Contract,
            ErrorKind::Transport => DsStatus::Transport,
            ErrorKind::Shape => DsStatus::Shape,
            ErrorKind::Input => DsStatus::InvalidArgument,
            ErrorKind::Numeric => DsStatus::Numeric,
            ErrorKind::Format => DsStatus::Format,
            ErrorKind::Io => DsStatus::Io,
        };
        Fail(code, e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(DsStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> DsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DsStatus::Ok,
        Ok(Err(Fail(code, msg))) => {
            set_error(&msg);
            code
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("internal panic: {msg}"));
            DsStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| invalid(format!("{what} is NULL")))
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| invalid(format!("{what} is NULL")))
}

unsafe fn out<T>(p: *mut T, v: T, what: &str) -> Result<(), Fail> {
    if p.is_null() {
        return Err(invalid(format!("{what} is NULL")));
    }
    p.write(v);
    Ok(())
}

unsafe fn shape_arg(shape: *const usize, ndim: usize) -> Result<Vec<usize>, Fail> {
    if ndim == 0 {
        return Err(invalid("ndim must be at least 1"));
    }
    deref(shape, "shape").map(|_| slice::from_raw_parts(shape, ndim).to_vec())
}

fn into_handle(a: Arr, comm: &Communicator) -> *mut DsArray {
    Box::into_raw(Box::new(DsArray {
        inner: a,
        comm: comm.clone(),
    }))
}

/// Message for the most recent failure on this thread. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ds_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

// ---------------------------------------------------------------- worlds

/// Join a world described by `backend` (`tcp:<host:port>,...,rank=<r>` or
/// `inproc:1`). In-process worlds with several ranks are started with
/// [`ds_inproc_run`].
///
/// # Safety
/// `backend` must be a NUL-terminated string; `out_comm` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ds_comm_init(backend: *const c_char, out_comm: *mut *mut DsComm) -> DsStatus {
    guard(|| {
        let s = CStr::from_ptr(deref(backend, "backend")?)
            .to_str()
            .map_err(|_| invalid("backend is not UTF-8"))?;
        let spec: BackendSpec = s.parse()?;
        let mut eps = diststat::comm::init(&spec, &TcpOptions::default())?;
        if eps.len() != 1 {
            return Err(Fail(
                DsStatus::Init,
                format!("{s} hosts {} ranks in this process; use ds_inproc_run", eps.len()),
            ));
        }
        let comm = Communicator::new(eps.remove(0));
        out(out_comm, Box::into_raw(Box::new(DsComm { comm })), "out_comm")
    })
}

unsafe fn out_ptr<T>(p: *mut T) -> Result<*mut T, Fail> {
    if p.is_null() {
        Err(invalid("out is NULL"))
    } else {
        Ok(p)
    }
}

/// Called once per rank by [`ds_inproc_run`]. The handle is freed when the
/// callback returns.
pub type DsRankFn = Option<unsafe extern "C" fn(comm: *mut DsComm, user: *mut c_void) -> DsStatus>;

struct UserPtr(*mut c_void);
// The pointer is only handed back to the caller's callback.
unsafe impl Send for UserPtr {}
unsafe impl Sync for UserPtr {}

/// Run `callback` on `size` in-process ranks, one thread each, and wait
/// for all of them. Returns the first non-OK status in rank order.
///
/// # Safety
/// `callback` must be safe to call concurrently from `size` threads with
/// the same `user` pointer.
#[no_mangle]
pub unsafe extern "C" fn ds_inproc_run(size: usize, callback: DsRankFn, user: *mut c_void) -> DsStatus {
    let mut first = DsStatus::Ok;
    let mut msg = String::new();
    let status = guard(|| {
        let cb = callback.ok_or_else(|| invalid("callback is NULL"))?;
        if size == 0 {
            return Err(invalid("size must be at least 1"));
        }
        let user = UserPtr(user);
        let eps = diststat::comm::init(&BackendSpec::InProcess { size }, &TcpOptions::default())?;
        let results = run_endpoints(eps, |c| {
            let h = Box::into_raw(Box::new(DsComm { comm: c }));
            let u = &user;
            let st = cb(h, u.0);
            drop(Box::from_raw(h));
            let err = if st == DsStatus::Ok {
                String::new()
            } else {
                CStr::from_ptr(ds_last_error()).to_string_lossy().into_owned()
            };
            (st, err)
        })?;
        if let Some((st, e)) = results.into_iter().find(|(s, _)| *s != DsStatus::Ok) {
            first = st;
            msg = e;
        }
        Ok(())
    });
    if status != DsStatus::Ok {
        return status;
    }
    if first != DsStatus::Ok {
        set_error(&msg);
    }
    first
}

/// # Safety
/// `comm` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ds_comm_rank(comm: *const DsComm, out_rank: *mut usize) -> DsStatus {
    guard(|| out(out_rank, deref(comm, "comm")?.comm.rank(), "out_rank"))
}

/// # Safety
/// `comm` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ds_comm_size(comm: *const DsComm, out_size: *mut usize) -> DsStatus {
    guard(|| out(out_size, deref(comm, "comm")?.comm.size(), "out_size"))
}

/// Release a handle from [`ds_comm_init`]. NULL is ignored.
///
/// # Safety
/// `comm` must come from `ds_comm_init` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ds_comm_free(comm: *mut DsComm) {
    if !comm.is_null() {
        drop(Box::from_raw(comm));
    }
}

/// # Safety
/// `comm` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ds_barrier(comm: *const DsComm) -> DsStatus {
    guard(|| Ok(deref(comm, "comm")?.comm.barrier()?))
}

/// In-place elementwise reduction of `buf[0..len]` across ranks.
///
/// # Safety
/// `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ds_allreduce_f64(comm: *const DsComm, buf: *mut f64, len: usize, op: DsReduceOp) -> DsStatus {
    guard(|| {
        let c = &deref(comm, "comm")?.comm;
        let buf = if len == 0 {
            &mut [][..]
        } else {
            slice::from_raw_parts_mut(deref_mut(buf, "buf")?, len)
        };
        let op = match op {
            DsReduceOp::Sum => ReduceOp::Sum,
            DsReduceOp::Product => ReduceOp::Product,
            DsReduceOp::Max => ReduceOp::Max,
            DsReduceOp::Min => ReduceOp::Min,
        };
        Ok(c.allreduce(buf, op)?)
    })
}

/// Copy `root`'s `buf[0..len]` to every rank.
///
/// # Safety
/// `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ds_broadcast_f64(comm: *const DsComm, buf: *mut f64, len: usize, root: usize) -> DsStatus {
    guard(|| {
        let c = &deref(comm, "comm")?.comm;
        let buf = if len == 0 {
            &mut [][..]
        } else {
            slice::from_raw_parts_mut(deref_mut(buf, "buf")?, len)
        };
        Ok(c.broadcast(buf, root)?)
    })
}

// ---------------------------------------------------------------- arrays

/// Zero-filled distributed array.
///
/// # Safety
/// `shape` must hold `ndim` extents; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ds_array_new(
    comm: *const DsComm,
    shape: *const usize,
    ndim: usize,
    out_array: *mut *mut DsArray,
) -> DsStatus {
    guard(|| {
        let c = &deref(comm, "comm")?.comm;
        let a = DistArray::new(c, &shape_arg(shape, ndim)?)?;
        out(out_array, into_handle(Arr::Dist(a), c), "out_array")
    })
}

/// Spread the column-major `data` held by `root` over all ranks. Only
/// `root` reads `data`; every rank passes the same `ndim`.
///
/// # Safety
/// On `root`, `shape` must hold `ndim` extents and `data` their product.
#[no_mangle]
pub unsafe extern "C" fn ds_array_distribute(
    comm: *const DsComm,
    data: *const f64,
    shape: *const usize,
    ndim: usize,
    root: usize,
    out_array: *mut *mut DsArray,
) -> DsStatus {
    guard(|| {
        let c = &deref(comm, "comm")?.comm;
        let src = if c.rank() == root {
            let shape = shape_arg(shape, ndim)?;
            let len: usize = shape.iter().product();
            let vals = if len == 0 {
                Vec::new()
            } else {
                slice::from_raw_parts(deref(data, "data")?, len).to_vec()
            };
            DenseArray::from_vec(&shape, vals)?
        } else {
            DenseArray::placeholder(ndim)
        };
        let a = DistArray::distribute(c, &src, root)?;
        out(out_array, into_handle(Arr::Dist(a), c), "out_array")
    })
}

/// A replicated array initialized from `data`, which every rank passes
/// with identical contents.
///
/// # Safety
/// `shape` must hold `ndim` extents and `data` their product.
#[no_mangle]
pub unsafe extern "C" fn ds_array_replicated(
    comm: *const DsComm,
    data: *const f64,
    shape: *const usize,
    ndim: usize,
    out_array: *mut *mut DsArray,
) -> DsStatus {
    guard(|| {
        let c = &deref(comm, "comm")?.comm;
        let shape = shape_arg(shape, ndim)?;
        let len: usize = shape.iter().product();
        let vals = if len == 0 {
            Vec::new()
        } else {
            slice::from_raw_parts(deref(data, "data")?, len).to_vec()
        };
        let a = DenseArray::from_vec(&shape, vals)?;
        out(out_array, into_handle(Arr::Rep(a), c), "out_array")
    })
}

/// NULL is ignored.
///
/// # Safety
/// `a` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ds_array_free(a: *mut DsArray) {
    if !a.is_null() {
        drop(Box::from_raw(a));
    }
}

/// 1 if `a` is distributed, 0 if replicated.
///
/// # Safety
/// `a` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ds_array_is_distributed(a: *const DsArray, out_flag: *mut c_int) -> DsStatus {
    guard(|| {
        out(
            out_flag,
            c_int::from(matches!(deref(a, "array")?.inner, Arr::Dist(_))),
            "out_flag",
        )
    })
}

fn shape_of(a: &DsArray) -> &[usize] {
    match &a.inner {
        Arr::Dist(d) => d.shape(),
        Arr::Rep(r) => r.shape(),
    }
}

/// Writes the number of dimensions to `out_ndim` and up to `cap` extents
/// to `out_shape` (which may be NULL when `cap` is 0).
///
/// # Safety
/// `out_shape` must have room for `cap` values.
#[no_mangle]
pub unsafe extern "C" fn ds_array_shape(
    a: *const DsArray,
    out_shape: *mut usize,
    cap: usize,
    out_ndim: *mut usize,
) -> DsStatus {
    guard(|| {
        let s = shape_of(deref(a, "array")?);
        if cap > 0 {
            let dst = slice::from_raw_parts_mut(deref_mut(out_shape, "out_shape")?, cap);
            for (d, &x) in dst.iter_mut().zip(s) {
                *d = x;
            }
        }
        out(out_ndim, s.len(), "out_ndim")
    })
}

/// Number of elements stored on this rank.
///
/// # Safety
/// `a` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ds_array_local_len(a: *const DsArray, out_len: *mut usize) -> DsStatus {
    guard(|| {
        let n = match &deref(a, "array")?.inner {
            Arr::Dist(d) => d.local().len(),
            Arr::Rep(r) => r.len(),
        };
        out(out_len, n, "out_len")
    })
}

/// Pointer to this rank's elements (the local column block, or the whole
/// replicated array). Valid until the array is freed.
///
/// # Safety
/// `a` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ds_array_local_data(a: *mut DsArray, out_data: *mut *mut f64) -> DsStatus {
    guard(|| {
        let p = match &mut deref_mut(a, "array")?.inner {
            Arr::Dist(d) => d.local_mut().as_mut_ptr(),
            Arr::Rep(r) => r.data_mut().as_mut_ptr(),
        };
        out(out_data, p, "out_data")
    })
}

/// Global column range `[first, last)` owned by this rank (the full range
/// for replicated arrays).
///
/// # Safety
/// `a` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ds_array_local_range(
    a: *const DsArray,
    out_first: *mut usize,
    out_last: *mut usize,
) -> DsStatus {
    guard(|| {
        let r = match &deref(a, "array")?.inner {
            Arr::Dist(d) => d.local_range(),
            Arr::Rep(r) => 0..*r.shape().last().unwrap_or(&0),
        };
        out(out_first, r.start, "out_first")?;
        out(out_last, r.end, "out_last")
    })
}

/// # Safety
/// `a` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ds_array_fill(a: *mut DsArray, x: f64) -> DsStatus {
    guard(|| {
        match &mut deref_mut(a, "array")?.inner {
            Arr::Dist(d) => d.fill(x),
            Arr::Rep(r) => r.fill(x),
        }
        Ok(())
    })
}

fn dist<'a>(a: &'a DsArray, what: &str) -> Result<&'a DistArray<f64>, Fail> {
    match &a.inner {
        Arr::Dist(d) => Ok(d),
        Arr::Rep(_) => Err(invalid(format!("{what} must be distributed"))),
    }
}

/// Fill a distributed array with uniform `[0, 1)` (or standard normal when
/// `normal` is nonzero) values independent of the number of ranks.
///
/// # Safety
/// `a` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ds_array_rand(a: *mut DsArray, seed: u64, normal: c_int) -> DsStatus {
    guard(|| {
        let h = deref_mut(a, "array")?;
        let d = match &mut h.inner {
            Arr::Dist(d) => d,
            Arr::Rep(_) => return Err(invalid("array must be distributed")),
        };
        let fill = RandFill::common(seed);
        Ok(d.rand_fill(&if normal != 0 { fill.normal() } else { fill })?)
    })
}

/// Copy the whole array, column-major, into `buf` on every rank.
/// Collective for distributed arrays.
///
/// # Safety
/// `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ds_array_gather(a: *const DsArray, buf: *mut f64, len: usize) -> DsStatus {
    guard(|| {
        let full = match &deref(a, "array")?.inner {
            Arr::Dist(d) => d.gather_full()?,
            Arr::Rep(r) => r.clone(),
        };
        if full.len() != len {
            return Err(Fail(
                DsStatus::Shape,
                format!("array has {} elements, buffer {len}", full.len()),
            ));
        }
        if len > 0 {
            slice::from_raw_parts_mut(deref_mut(buf, "buf")?, len).copy_from_slice(full.data());
        }
        Ok(())
    })
}

/// Sum of all elements. Collective for distributed arrays.
///
/// # Safety
/// `a` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ds_array_sum(a: *const DsArray, out_sum: *mut f64) -> DsStatus {
    guard(|| {
        let s = match &deref(a, "array")?.inner {
            Arr::Dist(d) => d.sum()?,
            Arr::Rep(r) => r.data().iter().sum(),
        };
        out(out_sum, s, "out_sum")
    })
}

// ---------------------------------------------------------------- linalg

/// Sum of the elementwise product of two equally shaped distributed arrays.
///
/// # Safety
/// Both handles must be live.
#[no_mangle]
pub unsafe extern "C" fn ds_dot(a: *const DsArray, b: *const DsArray, out_dot: *mut f64) -> DsStatus {
    guard(|| {
        let v = diststat::linalg::dot(dist(deref(a, "a")?, "a")?, dist(deref(b, "b")?, "b")?)?;
        out(out_dot, v, "out_dot")
    })
}

/// Operator norm of a distributed matrix. The power method uses its
/// default settings.
///
/// # Safety
/// `a` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ds_opnorm(a: *const DsArray, which: DsNorm, out_norm: *mut f64) -> DsStatus {
    guard(|| {
        let w = match which {
            DsNorm::L1 => Norm::L1,
            DsNorm::Linf => Norm::Linf,
            DsNorm::L2Power => Norm::l2(),
            DsNorm::L2Quick => Norm::L2Quick,
        };
        out(out_norm, opnorm(dist(deref(a, "a")?, "a")?, w)?, "out_norm")
    })
}

/// `C = op(A) op(B)`, where a nonzero `*trans` flag means the distributed
/// array is used through its transpose. Replicated and 1-D operands select
/// the vector and replicated layouts. The layout triple must be one of the
/// supported scenarios.
///
/// # Safety
/// All handles must be live; `c` must differ from `a` and `b`.
#[no_mangle]
pub unsafe extern "C" fn ds_matmul(
    c: *mut DsArray,
    ctrans: c_int,
    a: *const DsArray,
    atrans: c_int,
    b: *const DsArray,
    btrans: c_int,
) -> DsStatus {
    guard(|| {
        if ptr::eq(c, a) || ptr::eq(c, b) {
            return Err(invalid("output aliases an input"));
        }
        let ai = mat_in(deref(a, "a")?, atrans, "a")?;
        let bi = mat_in(deref(b, "b")?, btrans, "b")?;
        let co: MatOut<f64> = match (&mut deref_mut(c, "c")?.inner, ctrans != 0) {
            (Arr::Dist(d), true) => MatOut::Trans(d.t_mut()),
            (Arr::Dist(d), false) => d.into(),
            (Arr::Rep(r), false) => r.into(),
            (Arr::Rep(_), true) => return Err(invalid("c: replicated arrays cannot be transposed")),
        };
        matmul(co, ai, bi, None)?;
        Ok(())
    })
}

fn mat_in<'a>(h: &'a DsArray, t: c_int, what: &str) -> Result<MatIn<'a, f64>, Fail> {
    Ok(match (&h.inner, t != 0) {
        (Arr::Dist(d), true) => MatIn::Trans(d.t()),
        (Arr::Dist(d), false) => d.into(),
        (Arr::Rep(r), false) => r.into(),
        (Arr::Rep(_), true) => return Err(invalid(format!("{what}: replicated arrays cannot be transposed"))),
    })
}

// ---------------------------------------------------------------- solvers

/// Rank-`r` NMF of the nonnegative distributed matrix `x`. Writes the
/// factors `Vt` (`r x m`) and `W` (`r x n`) as new distributed arrays and
/// the final objective.
///
/// # Safety
/// `x` must be live; out-pointers writable.
#[no_mangle]
pub unsafe extern "C" fn ds_nmf(
    x: *const DsArray,
    r: usize,
    iters: usize,
    apg: c_int,
    seed: u64,
    out_vt: *mut *mut DsArray,
    out_w: *mut *mut DsArray,
    out_objective: *mut f64,
) -> DsStatus {
    guard(|| {
        let h = deref(x, "x")?;
        out_ptr(out_vt)?;
        out_ptr(out_w)?;
        out_ptr(out_objective)?;
        let mut s = NmfState::new(dist(h, "x")?.clone(), r, seed)?;
        if apg != 0 {
            s.apg(iters)?;
        } else {
            s.multiplicative(iters)?;
        }
        let f = s.objective()?;
        out(out_objective, f, "out_objective")?;
        out(out_vt, into_handle(Arr::Dist(s.vt), &h.comm), "out_vt")?;
        out(out_w, into_handle(Arr::Dist(s.w), &h.comm), "out_w")
    })
}

/// Embed the `n x n` distributed distance matrix `y` into `q` dimensions.
/// Writes the `q x n` embedding and its final stress.
///
/// # Safety
/// `y` must be live; out-pointers writable.
#[no_mangle]
pub unsafe extern "C" fn ds_mds(
    y: *const DsArray,
    q: usize,
    iters: usize,
    seed: u64,
    perturb: c_int,
    out_theta: *mut *mut DsArray,
    out_stress: *mut f64,
) -> DsStatus {
    guard(|| {
        let h = deref(y, "y")?;
        out_ptr(out_theta)?;
        out_ptr(out_stress)?;
        let mut s = MdsState::new(dist(h, "y")?.clone(), q, seed)?;
        s.perturb = perturb != 0;
        s.fit(iters)?;
        let f = s.stress()?;
        out(out_stress, f, "out_stress")?;
        out(out_theta, into_handle(Arr::Dist(s.theta), &h.comm), "out_theta")
    })
}

/// l1-penalized Cox regression of the `m x n` distributed covariates `x`
/// on times `y` (nonincreasing) and event flags `delta`, both length `m`
/// and identical on every rank. `sigma <= 0` selects the default step.
/// With `use_monitor` the fit stops once the objective stalls. Writes the
/// length-`n` coefficients, the number of steps taken and the final
/// penalized objective.
///
/// # Safety
/// `y` and `delta` must hold `m` doubles; out-pointers writable.
#[no_mangle]
pub unsafe extern "C" fn ds_cox(
    x: *const DsArray,
    y: *const f64,
    delta: *const f64,
    m: usize,
    lambda: f64,
    sigma: f64,
    breslow: c_int,
    iters: usize,
    use_monitor: c_int,
    out_beta: *mut *mut DsArray,
    out_iters: *mut usize,
    out_objective: *mut f64,
) -> DsStatus {
    guard(|| {
        let h = deref(x, "x")?;
        out_ptr(out_beta)?;
        out_ptr(out_iters)?;
        out_ptr(out_objective)?;
        if m == 0 {
            return Err(invalid("m must be at least 1"));
        }
        let yv = slice::from_raw_parts(deref(y, "y")?, m).to_vec();
        let dv = slice::from_raw_parts(deref(delta, "delta")?, m).to_vec();
        let opts = CoxOptions {
            lambda,
            sigma: (sigma > 0.0).then_some(sigma),
            ties: if breslow != 0 { Ties::Breslow } else { Ties::Reject },
        };
        let mut s = CoxState::new(dist(h, "x")?.clone(), yv, dv, &opts)?;
        let mut mon = ConvergenceMonitor::default();
        let done = s.fit(iters, (use_monitor != 0).then_some(&mut mon))?;
        let f = s.objective()?;
        out(out_iters, done, "out_iters")?;
        out(out_objective, f, "out_objective")?;
        out(out_beta, into_handle(Arr::Dist(s.beta), &h.comm), "out_beta")
    })
}
