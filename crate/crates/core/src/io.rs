//! Binary matrix files.
//!
//! Layout: the magic `DSTA`, one dtype byte (0 = f32, 1 = f64, 2 = i64),
//! the number of dimensions as a little-endian `u64`, one `u64` per
//! extent, then the elements in column-major order, little-endian.

use std::fs;
use std::io;
use std::path::Path;

use crate::comm::Communicator;
use crate::dense::DenseArray;
use crate::distarray::DistArray;
use crate::error::{Error, ErrorKind, Result};
use crate::scalar::{DType, Scalar};

pub const MAGIC: &[u8; 4] = b"DSTA";

pub fn encode<T: Scalar>(a: &DenseArray<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(13 + 8 * a.ndim() + T::DTYPE.width() * a.len());
    out.extend_from_slice(MAGIC);
    out.push(T::DTYPE as u8);
    out.extend_from_slice(&(a.ndim() as u64).to_le_bytes());
    for &n in a.shape() {
        out.extend_from_slice(&(n as u64).to_le_bytes());
    }
    for &x in a.data() {
        x.write_le(&mut out);
    }
    out
}

pub fn decode<T: Scalar>(bytes: &[u8]) -> Result<DenseArray<T>> {
    let mut cur = bytes;
    let mut take = |n: usize, what: &str| -> Result<&[u8]> {
        if cur.len() < n {
            return Err(Error::Format(format!("file truncated in {what}")));
        }
        let (head, rest) = cur.split_at(n);
        cur = rest;
        Ok(head)
    };
    if take(4, "magic")? != MAGIC {
        return Err(Error::Format("bad magic, not a matrix file".into()));
    }
    let code = take(1, "dtype")?[0];
    let dtype = DType::from_code(code).ok_or_else(|| Error::Format(format!("unknown dtype code {code}")))?;
    if dtype != T::DTYPE {
        return Err(Error::Format(format!("file holds {dtype:?}, expected {:?}", T::DTYPE)));
    }
    let ndims = u64::from_le_bytes(take(8, "header")?.try_into().unwrap());
    if ndims == 0 || ndims > 64 {
        return Err(Error::Format(format!("implausible dimension count {ndims}")));
    }
    let mut shape = Vec::with_capacity(ndims as usize);
    for _ in 0..ndims {
        let n = u64::from_le_bytes(take(8, "header")?.try_into().unwrap());
        shape.push(usize::try_from(n).map_err(|_| Error::Format(format!("extent {n} too large")))?);
    }
    let count = shape
        .iter()
        .try_fold(1usize, |acc, &n| acc.checked_mul(n))
        .ok_or_else(|| Error::Format(format!("extents {shape:?} overflow")))?;
    let width = dtype.width();
    let payload = count
        .checked_mul(width)
        .ok_or_else(|| Error::Format(format!("extents {shape:?} overflow")))?;
    let body = take(payload, "payload")?;
    if !cur.is_empty() {
        return Err(Error::Format(format!("{} trailing bytes after payload", cur.len())));
    }
    let data = body.chunks_exact(width).map(T::read_le).collect();
    DenseArray::from_vec(&shape, data)
}

pub fn read_dense<T: Scalar>(path: &Path) -> Result<DenseArray<T>> {
    decode(&fs::read(path)?)
}

pub fn write_dense<T: Scalar>(path: &Path, a: &DenseArray<T>) -> Result<()> {
    fs::write(path, encode(a))?;
    Ok(())
}

/// Rank 0 reads `path` and distributes the matrix. Failures are reported
/// on every rank with the same kind.
pub fn read_matrix<T: Scalar>(comm: &Communicator, path: &Path) -> Result<DistArray<T>> {
    let loaded = if comm.is_root() {
        Some(read_dense::<T>(path))
    } else {
        None
    };
    let (status, ndims) = match &loaded {
        Some(Ok(a)) => (0, a.ndim() as i64),
        Some(Err(e)) => (kind_code(e.kind()), 0),
        None => (0, 0),
    };
    let mut hdr = [status, ndims];
    comm.broadcast(&mut hdr, 0)?;
    match loaded {
        Some(Err(e)) => Err(e),
        _ if hdr[0] != 0 => Err(remote_error(
            hdr[0],
            &format!("rank 0 could not read {}", path.display()),
        )),
        Some(Ok(a)) => DistArray::distribute(comm, &a, 0),
        None => DistArray::distribute(comm, &DenseArray::placeholder(hdr[1] as usize), 0),
    }
}

/// Gather `a` and write it from rank 0.
pub fn write_matrix<T: Scalar>(comm: &Communicator, path: &Path, a: &DistArray<T>) -> Result<()> {
    let full = a.gather_full()?;
    write_replicated(comm, path, &full)
}

/// Write an array every rank holds; only rank 0 touches the file.
pub fn write_replicated<T: Scalar>(comm: &Communicator, path: &Path, a: &DenseArray<T>) -> Result<()> {
    write_on_root(comm, path, |p| write_dense(p, a))
}

/// Run a file-writing closure on rank 0 and share its outcome.
pub fn write_on_root(comm: &Communicator, path: &Path, f: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    let res = if comm.is_root() { f(path) } else { Ok(()) };
    let mut status = [match &res {
        Ok(()) => 0,
        Err(e) => kind_code(e.kind()),
    }];
    comm.broadcast(&mut status, 0)?;
    match res {
        Err(e) => Err(e),
        Ok(()) if status[0] != 0 => Err(remote_error(
            status[0],
            &format!("rank 0 could not write {}", path.display()),
        )),
        Ok(()) => Ok(()),
    }
}

fn kind_code(k: ErrorKind) -> i64 {
    match k {
        ErrorKind::Io => 1,
        ErrorKind::Format => 2,
        ErrorKind::Shape => 3,
        _ => 4,
    }
}

fn remote_error(code: i64, msg: &str) -> Error {
    match code {
        1 => Error::Io(io::Error::other(msg.to_owned())),
        2 => Error::Format(msg.to_owned()),
        3 => Error::Shape(msg.to_owned()),
        _ => Error::Input(msg.to_owned()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::comm::run_inproc;

    #[test]
    fn bytes_of_a_small_file() {
        let a = DenseArray::from_rows(1, 2, &[1.0f32, 2.0]);
        let b = encode(&a);
        assert_eq!(&b[..5], b"DSTA\x00");
        assert_eq!(b.len(), 4 + 1 + 8 + 16 + 8);
        assert_eq!(&b[5..13], &2u64.to_le_bytes());
        assert_eq!(decode::<f32>(&b).unwrap(), a);
    }

    #[test]
    fn format_errors() {
        let a = DenseArray::from_rows(2, 2, &[1.0f64, 2.0, 3.0, 4.0]);
        let b = encode(&a);
        assert!(matches!(decode::<f64>(&b[..b.len() - 3]), Err(Error::Format(_))));
        assert!(matches!(decode::<f32>(&b), Err(Error::Format(_))));
        assert!(matches!(decode::<i64>(&b), Err(Error::Format(_))));
        let mut bad = b.clone();
        bad[0] = b'X';
        assert!(matches!(decode::<f64>(&bad), Err(Error::Format(_))));
        bad = b;
        bad.push(0);
        assert!(matches!(decode::<f64>(&bad), Err(Error::Format(_))));
    }

    #[test]
    fn distributed_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.dsta");
        let want = DenseArray::from_fn(&[3, 7], |i| (i[0] * 10 + i[1]) as f64 + 0.25);
        let out = run_inproc(4, |c| {
            let src = if c.is_root() {
                want.clone()
            } else {
                DenseArray::placeholder(2)
            };
            let a = DistArray::distribute(&c, &src, 0).unwrap();
            write_matrix(&c, &path, &a).unwrap();
            read_matrix::<f64>(&c, &path).unwrap().gather_full().unwrap()
        });
        assert!(out.iter().all(|g| *g == want));
    }

    #[test]
    fn every_rank_sees_the_read_failure() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.dsta");
        write_dense(&path, &DenseArray::from_rows(1, 1, &[1.0f32])).unwrap();
        let missing = dir.path().join("nope.dsta");
        let out = run_inproc(3, |c| {
            let fmt = matches!(read_matrix::<f64>(&c, &path), Err(Error::Format(_)));
            let io = matches!(read_matrix::<f64>(&c, &missing), Err(Error::Io(_)));
            (fmt, io)
        });
        assert_eq!(out, vec![(true, true); 3]);
    }
}
