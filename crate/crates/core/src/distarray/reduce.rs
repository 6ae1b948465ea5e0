//! Reductions and scans over distributed arrays.

use super::DistArray;
use crate::comm::ReduceOp;
use crate::dense::DenseArray;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Result of [`DistArray::reduce_dims`]: reducing only the first dimension
/// keeps the distribution, reducing the distributed one replicates.
#[derive(Debug, Clone)]
pub enum Reduced<T> {
    Dist(DistArray<T>),
    Replicated(DenseArray<T>),
}

impl<T: Scalar> Reduced<T> {
    /// Full content on every rank.
    pub fn gather(&self) -> Result<DenseArray<T>> {
        match self {
            Reduced::Dist(d) => d.gather_full(),
            Reduced::Replicated(r) => Ok(r.clone()),
        }
    }
}

/// Destination of [`reduce_into`]. Which dimensions get reduced is read off
/// its shape.
pub enum ReduceTarget<'a, T> {
    Dist(&'a mut DistArray<T>),
    Replicated(&'a mut DenseArray<T>),
}

fn require_2d<T: Scalar>(a: &DistArray<T>, what: &str) -> Result<(usize, usize)> {
    match *a.shape() {
        [m, n] => Ok((m, n)),
        _ => Err(Error::Shape(format!(
            "{what} needs a 2-D array, got shape {:?}",
            a.shape()
        ))),
    }
}

impl<T: Scalar> DistArray<T> {
    /// Fold `op` over `transform(x)` for every element. Same result on all
    /// ranks.
    pub fn reduce_all(&self, op: ReduceOp, transform: impl Fn(T) -> T) -> Result<T> {
        if self.is_empty() && matches!(op, ReduceOp::Max | ReduceOp::Min) {
            return Err(Error::Shape(format!("{op:?} of an empty array")));
        }
        let mut acc = [self
            .local
            .iter()
            .fold(op.identity::<T>(), |acc, &x| op.apply(acc, transform(x)))];
        self.comm.allreduce(&mut acc, op)?;
        Ok(acc[0])
    }

    pub fn sum(&self) -> Result<T> {
        self.reduce_all(ReduceOp::Sum, |x| x)
    }

    /// Sum of squares.
    pub fn sum_abs2(&self) -> Result<T> {
        self.reduce_all(ReduceOp::Sum, |x| x * x)
    }

    pub fn maximum(&self) -> Result<T> {
        self.reduce_all(ReduceOp::Max, |x| x)
    }

    pub fn minimum(&self) -> Result<T> {
        self.reduce_all(ReduceOp::Min, |x| x)
    }

    /// Fold over column `j` of the local block, for each local column.
    fn local_col_fold(&self, op: ReduceOp) -> Vec<T> {
        let m = self.lead_len();
        if m == 0 {
            return vec![op.identity(); self.local_width()];
        }
        self.local
            .chunks_exact(m)
            .map(|c| c.iter().fold(op.identity(), |acc, &x| op.apply(acc, x)))
            .collect()
    }

    /// Fold across local columns, one value per row.
    fn local_row_fold(&self, op: ReduceOp) -> Vec<T> {
        let m = self.lead_len();
        let mut out = vec![op.identity(); m];
        if m == 0 {
            return out;
        }
        for col in self.local.chunks_exact(m) {
            for (o, &x) in out.iter_mut().zip(col) {
                *o = op.apply(*o, x);
            }
        }
        out
    }

    /// Sum a matrix along `axes` (0 = down the rows, 1 = along the
    /// distributed columns).
    ///
    /// * `[0]`: a `1 x n` distributed row of column sums.
    /// * `[1]`: an `m x 1` replicated column of row sums.
    /// * `[0, 1]`: the total as a `1 x 1` distributed array.
    pub fn sum_dims(&self, axes: &[usize]) -> Result<Reduced<T>> {
        self.reduce_dims(axes, ReduceOp::Sum)
    }

    pub fn reduce_dims(&self, axes: &[usize], op: ReduceOp) -> Result<Reduced<T>> {
        let (m, n) = require_2d(self, "reduce_dims")?;
        let mut sorted = axes.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.is_empty() || sorted.len() != axes.len() || sorted.iter().any(|&a| a > 1) {
            return Err(Error::Shape(format!("invalid reduction axes {axes:?} for a matrix")));
        }
        match sorted.as_slice() {
            [0] => Ok(Reduced::Dist(DistArray::from_local(
                &self.comm,
                &[1, n],
                self.local_col_fold(op),
            )?)),
            [1] => {
                let mut rows = self.local_row_fold(op);
                self.comm.allreduce(&mut rows, op)?;
                Ok(Reduced::Replicated(DenseArray::from_vec(&[m, 1], rows)?))
            }
            _ => {
                let total = if self.is_empty() {
                    op.identity()
                } else {
                    self.reduce_all(op, |x| x)?
                };
                let mut out = DistArray::new(&self.comm, &[1, 1])?;
                out.local.fill(total);
                Ok(Reduced::Dist(out))
            }
        }
    }

    /// Running `op` along `axis` into `dest` (same shape). Along the
    /// distributed dimension each rank offsets its local scan by the
    /// combined totals of all lower ranks.
    pub fn scan_into(&self, dest: &mut DistArray<T>, axis: usize, op: ReduceOp) -> Result<()> {
        if !dest.same_layout(self) {
            return Err(Error::Shape(format!(
                "scan destination {:?} does not match source {:?}",
                dest.shape, self.shape
            )));
        }
        let nd = self.ndim();
        if axis >= nd {
            return Err(Error::Shape(format!("scan axis {axis} of a {nd}-D array")));
        }
        dest.local.copy_from_slice(&self.local);
        let lshape = self.local_shape();
        let stride: usize = lshape[..axis].iter().product();
        let len = lshape[axis];
        let block = stride * len;
        if block > 0 {
            for chunk in dest.local.chunks_exact_mut(block) {
                for s in 0..stride {
                    for k in 1..len {
                        let prev = chunk[(k - 1) * stride + s];
                        let cur = &mut chunk[k * stride + s];
                        *cur = op.apply(prev, *cur);
                    }
                }
            }
        }
        if axis + 1 < nd || self.comm.size() == 1 {
            return Ok(());
        }

        let lead = self.lead_len();
        let p = self.comm.size();
        let totals: Vec<T> = if len > 0 {
            dest.local[(len - 1) * lead..].to_vec()
        } else {
            vec![op.identity(); lead]
        };
        let mut all = vec![T::zero(); lead * p];
        self.comm.allgatherv(&totals, &mut all, &vec![lead; p])?;
        let rank = self.comm.rank();
        if rank == 0 || len == 0 {
            return Ok(());
        }
        let mut prefix = all[..lead].to_vec();
        for r in 1..rank {
            for (acc, &t) in prefix.iter_mut().zip(&all[r * lead..(r + 1) * lead]) {
                *acc = op.apply(*acc, t);
            }
        }
        for col in dest.local.chunks_exact_mut(lead) {
            for (x, &pre) in col.iter_mut().zip(&prefix) {
                *x = op.apply(pre, *x);
            }
        }
        Ok(())
    }

    pub fn scan(&self, axis: usize, op: ReduceOp) -> Result<DistArray<T>> {
        let mut out = self.zeros_like();
        self.scan_into(&mut out, axis, op)?;
        Ok(out)
    }

    pub fn cumsum(&self, axis: usize) -> Result<DistArray<T>> {
        self.scan(axis, ReduceOp::Sum)
    }

    pub fn cumprod(&self, axis: usize) -> Result<DistArray<T>> {
        self.scan(axis, ReduceOp::Product)
    }
}

/// Sum `a` into `target`, choosing the reduced dimensions from the target's
/// shape: every target extent must equal `a`'s or be 1. A `1 x n`
/// distributed target receives column sums, an `m x 1` replicated target
/// row sums.
pub fn reduce_into<T: Scalar>(target: ReduceTarget<'_, T>, a: &DistArray<T>) -> Result<()> {
    let (m, n) = require_2d(a, "reduce_into")?;
    let tshape = match &target {
        ReduceTarget::Dist(d) => d.shape().to_vec(),
        ReduceTarget::Replicated(r) => r.shape().to_vec(),
    };
    let valid = tshape.len() == 2 && (tshape[0] == m || tshape[0] == 1) && (tshape[1] == n || tshape[1] == 1);
    if !valid {
        return Err(Error::Shape(format!("{tshape:?} is not a collapse of {:?}", a.shape())));
    }
    let over_rows = tshape[0] == 1 && m != 1;
    let over_cols = tshape[1] == 1 && n != 1;
    let op = ReduceOp::Sum;

    // per-local-column values after the row reduction (or a plain copy)
    let cols: Vec<T> = if over_rows {
        a.local_col_fold(op)
    } else {
        a.local.clone()
    };
    let rows_out = tshape[0];

    if over_cols {
        // fold the local columns, then across ranks
        let mut acc = vec![T::zero(); rows_out];
        if rows_out > 0 {
            for col in cols.chunks_exact(rows_out) {
                for (o, &x) in acc.iter_mut().zip(col) {
                    *o += x;
                }
            }
        }
        a.comm.allreduce(&mut acc, op)?;
        match target {
            ReduceTarget::Replicated(r) => r.data_mut().copy_from_slice(&acc),
            ReduceTarget::Dist(d) => {
                // the single column lives on rank 0
                let local = d.local_mut();
                if !local.is_empty() {
                    local.copy_from_slice(&acc);
                }
            }
        }
        return Ok(());
    }

    match target {
        ReduceTarget::Dist(d) => {
            if d.comm().size() != a.comm().size() {
                return Err(Error::Distribution("target on a different world".into()));
            }
            d.local_mut().copy_from_slice(&cols);
        }
        ReduceTarget::Replicated(r) => {
            let counts = a.partition().counts(rows_out);
            a.comm.allgatherv(&cols, r.data_mut(), &counts)?;
        }
    }
    Ok(())
}
