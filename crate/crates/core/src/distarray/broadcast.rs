//! Elementwise maps with broadcasting. Purely local: no rank ever talks to
//! another during a map, which is why some operand layouts are rejected.

use super::DistArray;
use crate::dense::DenseArray;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// An argument of [`DistArray::map_broadcast`].
#[derive(Debug, Clone, Copy)]
pub enum Operand<'a, T> {
    /// The destination's own current value at each index.
    Dest,
    Dist(&'a DistArray<T>),
    /// A replicated array. Along the distributed dimension its extent must
    /// be 1.
    Replicated(&'a DenseArray<T>),
    /// A replicated array whose last extent equals the full distributed
    /// extent. Each rank reads the columns it owns; the caller vouches that
    /// the contents are identical on all ranks.
    ReplicatedUnchecked(&'a DenseArray<T>),
    Scalar(T),
}

enum Source<'a, T> {
    Dest,
    Slice(&'a [T]),
    Const(T),
}

struct Plan<'a, T> {
    src: Source<'a, T>,
    base: usize,
    /// Storage stride per destination dimension, 0 where broadcast.
    strides: Vec<usize>,
}

fn col_major_strides(shape: &[usize]) -> Vec<usize> {
    let mut s = Vec::with_capacity(shape.len());
    let mut acc = 1;
    for &n in shape {
        s.push(acc);
        acc *= n;
    }
    s
}

impl<T: Scalar> DistArray<T> {
    /// `self[i] = f(args[0][i], args[1][i], ..)` for every global index,
    /// with NumPy-style broadcasting of singleton dimensions.
    ///
    /// Operands may have fewer dimensions than the destination; missing
    /// trailing dimensions count as 1. A distributed operand must either
    /// match the destination's distributed extent (and thus its partition)
    /// or both extents must be 1.
    pub fn map_broadcast<F>(&mut self, args: &[Operand<'_, T>], f: F) -> Result<()>
    where
        F: Fn(&[T]) -> T,
    {
        let nd = self.ndim();
        let dshape = self.shape.clone();
        let last = nd - 1;
        let col0 = self.local_range().start;
        let mut plans = Vec::with_capacity(args.len());
        for (k, arg) in args.iter().enumerate() {
            let plan = match *arg {
                Operand::Dest => Plan {
                    src: Source::Dest,
                    base: 0,
                    strides: col_major_strides(&self.local_shape()),
                },
                Operand::Scalar(x) => Plan {
                    src: Source::Const(x),
                    base: 0,
                    strides: vec![0; nd],
                },
                Operand::Dist(a) => {
                    if a.comm.size() != self.comm.size() {
                        return Err(Error::Distribution(format!(
                            "operand {k} lives on a world of {} ranks, destination on {}",
                            a.comm.size(),
                            self.comm.size()
                        )));
                    }
                    if a.ndim() != nd {
                        return Err(Error::Distribution(format!(
                            "operand {k} of shape {:?} is split along a different dimension than the destination {:?}",
                            a.shape, dshape
                        )));
                    }
                    if a.shape[last] != dshape[last] {
                        return Err(Error::Distribution(format!(
                            "operand {k} of shape {:?} would need its distributed dimension repeated across ranks",
                            a.shape
                        )));
                    }
                    let strides = broadcast_strides(k, &a.shape, &a.local_shape(), &dshape, last)?;
                    Plan {
                        src: Source::Slice(&a.local),
                        base: 0,
                        strides,
                    }
                }
                Operand::Replicated(r) | Operand::ReplicatedUnchecked(r) => {
                    let unchecked = matches!(arg, Operand::ReplicatedUnchecked(_));
                    if r.ndim() > nd {
                        return Err(Error::Broadcast(format!(
                            "operand {k} has {} dimensions, destination {nd}",
                            r.ndim()
                        )));
                    }
                    let mut shape = r.shape().to_vec();
                    shape.resize(nd, 1);
                    let full_last = shape[last] == dshape[last] && dshape[last] != 1;
                    if full_last && !unchecked {
                        return Err(Error::Broadcast(format!(
                            "replicated operand {k} of shape {:?} spans the distributed dimension; \
                             use a singleton last extent or Operand::ReplicatedUnchecked",
                            r.shape()
                        )));
                    }
                    let strides = broadcast_strides(k, &shape, &shape, &dshape, usize::MAX)?;
                    let base = if full_last { col0 * strides[last] } else { 0 };
                    Plan {
                        src: Source::Slice(r.data()),
                        base,
                        strides,
                    }
                }
            };
            plans.push(plan);
        }

        let lshape = self.local_shape();
        let total: usize = lshape.iter().product();
        if total == 0 {
            return Ok(());
        }
        let n0 = lshape[0];
        let outer = total / n0;
        let mut offs: Vec<usize> = plans.iter().map(|p| p.base).collect();
        let mut idx = vec![0usize; nd];
        let mut vals = vec![T::zero(); plans.len()];
        let local = &mut self.local;
        let mut pos = 0;
        for _ in 0..outer {
            for i in 0..n0 {
                for (v, (p, &o)) in vals.iter_mut().zip(plans.iter().zip(&offs)) {
                    *v = match p.src {
                        Source::Dest => local[pos],
                        Source::Slice(s) => s[o + i * p.strides[0]],
                        Source::Const(c) => c,
                    };
                }
                local[pos] = f(&vals);
                pos += 1;
            }
            for d in 1..nd {
                idx[d] += 1;
                if idx[d] < lshape[d] {
                    for (o, p) in offs.iter_mut().zip(&plans) {
                        *o += p.strides[d];
                    }
                    break;
                }
                for (o, p) in offs.iter_mut().zip(&plans) {
                    *o -= p.strides[d] * (lshape[d] - 1);
                }
                idx[d] = 0;
            }
        }
        Ok(())
    }

    /// `self[i] = f(self[i])`.
    pub fn map_inplace(&mut self, f: impl Fn(T) -> T) {
        for x in &mut self.local {
            *x = f(*x);
        }
    }
}

/// Per-destination-dimension strides into an operand's storage. `dist_dim`
/// is the dimension already checked by the caller (skipped here).
fn broadcast_strides(
    k: usize,
    shape: &[usize],
    storage: &[usize],
    dshape: &[usize],
    dist_dim: usize,
) -> Result<Vec<usize>> {
    let sstrides = col_major_strides(storage);
    let mut strides = Vec::with_capacity(dshape.len());
    for d in 0..dshape.len() {
        let s = if d == dist_dim || shape[d] == dshape[d] {
            sstrides[d]
        } else if shape[d] == 1 {
            0
        } else {
            return Err(Error::Broadcast(format!(
                "operand {k} of shape {shape:?} does not broadcast against {dshape:?}"
            )));
        };
        // a singleton dimension is never stepped through
        strides.push(if shape[d] == 1 && dshape[d] != 1 { 0 } else { s });
    }
    Ok(strides)
}
