//! Metric multidimensional scaling by majorization-minimization.

use super::Trace;
use crate::dense::DenseArray;
use crate::distarray::{DistArray, Operand, RandFill};
use crate::error::{Error, Result};
use crate::linalg::{diag_fill, diag_get, matmul, pairwise_euclidean, DiagTarget, DEFAULT_CHUNK};
use crate::scalar::Real;
use crate::ReduceOp;

/// `sum_{i != j} (y_ij - ||theta_i - theta_j||)^2` for the point columns
/// of `theta` (`q x n`) and target distances `y` (`n x n`).
pub fn mds_stress<T: Real>(theta: &DistArray<T>, y: &DistArray<T>) -> Result<T> {
    let mut d = y.zeros_like();
    pairwise_euclidean(&mut d, theta, DEFAULT_CHUNK)?;
    off_diagonal_sq_diff(y, &d)
}

fn off_diagonal_sq_diff<T: Real>(y: &DistArray<T>, d: &DistArray<T>) -> Result<T> {
    let n = y.nrows();
    let start = y.local_range().start;
    let mut acc = T::zero();
    if n > 0 {
        for (jl, (yc, dc)) in y.local().chunks_exact(n).zip(d.local().chunks_exact(n)).enumerate() {
            for (i, (&a, &b)) in yc.iter().zip(dc).enumerate() {
                if i != start + jl {
                    acc += (a - b) * (a - b);
                }
            }
        }
    }
    let mut buf = [acc];
    y.comm().allreduce(&mut buf, ReduceOp::Sum)?;
    Ok(buf[0])
}

/// Targets, embedding and workspaces of an MDS run. All off-diagonal
/// weights are 1.
#[derive(Debug, Clone)]
pub struct MdsState<T> {
    /// `n x n` target distances.
    pub y: DistArray<T>,
    /// `q x n` embedding, one point per column.
    pub theta: DistArray<T>,
    /// Replace zero embedding distances by `1e-10` instead of failing.
    pub perturb: bool,
    /// Column chunk width used when computing the stress.
    pub chunk: usize,
    pub trace: Trace<T>,
    dist: DistArray<T>,
    theta_wmz: DistArray<T>,
    d_dist: DistArray<T>,
    d_local: DenseArray<T>,
    tmp: DenseArray<T>,
}

impl<T: Real> MdsState<T> {
    /// Embed into `q` dimensions starting from points uniform in `(-1, 1)`,
    /// generated identically for any number of ranks.
    pub fn new(y: DistArray<T>, q: usize, seed: u64) -> Result<Self> {
        let n = square(&y)?;
        let mut theta = DistArray::new(y.comm(), &[q, n])?;
        theta.rand_fill(&RandFill::common(seed))?;
        theta.map_inplace(|t| T::lit(2.0) * t - T::one());
        MdsState::with_theta(y, theta)
    }

    pub fn with_theta(y: DistArray<T>, theta: DistArray<T>) -> Result<Self> {
        let n = square(&y)?;
        let q = theta.shape()[0];
        if theta.shape() != [q, n] {
            return Err(Error::Shape(format!(
                "embedding {:?} does not match {n} points",
                theta.shape()
            )));
        }
        if n < 2 || q == 0 {
            return Err(Error::Input(format!(
                "need at least 2 points and 1 dimension, got {n} and {q}"
            )));
        }
        let comm = y.comm().clone();
        Ok(MdsState {
            dist: y.zeros_like(),
            theta_wmz: theta.zeros_like(),
            d_dist: DistArray::new(&comm, &[1, n])?,
            d_local: DenseArray::zeros(&[n]),
            tmp: DenseArray::zeros(&[q, n]),
            perturb: false,
            chunk: DEFAULT_CHUNK,
            trace: Trace::default(),
            y,
            theta,
        })
    }

    pub fn stress(&mut self) -> Result<T> {
        pairwise_euclidean(&mut self.dist, &self.theta, self.chunk)?;
        off_diagonal_sq_diff(&self.y, &self.dist)
    }

    /// Run `iters` MM updates, recording the stress after each.
    pub fn fit(&mut self, iters: usize) -> Result<()> {
        self.trace.start();
        let base = self.trace.iterations();
        let n = self.y.nrows();
        let w_sums = T::from_usize(n - 1).expect("point count fits the element type");
        let two = T::lit(2.0);
        let tiny = T::lit(1e-10);
        for it in 1..=iters {
            matmul(&mut self.dist, self.theta.t(), &self.theta, Some(&mut self.tmp))?;
            diag_get(DiagTarget::Dist(&mut self.d_dist), &self.dist)?;
            diag_get(DiagTarget::Replicated(&mut self.d_local), &self.dist)?;
            // ||a||^2 + ||b||^2 - 2 a.b, then the distance itself
            self.dist.map_broadcast(
                &[
                    Operand::Dest,
                    Operand::Dist(&self.d_dist),
                    Operand::Replicated(&self.d_local),
                ],
                |v| (-two * v[0] + v[1] + v[2]).max(T::zero()).sqrt(),
            )?;
            diag_fill(&mut self.dist, T::infinity())?;

            let zero_found = self.dist.local().iter().any(|&d| d == T::zero());
            if self.perturb {
                if zero_found {
                    self.dist.map_inplace(|d| if d == T::zero() { tiny } else { d });
                }
            } else if !self.dist.comm().all_ok(!zero_found)? {
                return Err(Error::Degenerate(format!(
                    "two embedded points coincide at iteration {}",
                    base + it
                )));
            }

            // Z = Y / dist, kept in `dist`
            self.dist
                .map_broadcast(&[Operand::Dist(&self.y), Operand::Dest], |v| v[0] / v[1])?;
            let z_sums = match self.dist.sum_dims(&[0])? {
                crate::distarray::Reduced::Dist(s) => s,
                crate::distarray::Reduced::Replicated(_) => unreachable!("column sums stay distributed"),
            };
            self.dist.map_inplace(|z| T::one() - z);
            diag_fill(&mut self.dist, T::zero())?;
            matmul(&mut self.theta_wmz, &self.theta, &self.dist, Some(&mut self.tmp))?;
            self.theta.map_broadcast(
                &[Operand::Dest, Operand::Dist(&z_sums), Operand::Dist(&self.theta_wmz)],
                |v| (v[0] * (v[1] + w_sums) + v[2]) / (two * w_sums),
            )?;

            if self.trace.wants(it, it == iters) {
                let s = self.stress()?;
                self.trace.record(base + it, s);
            }
        }
        Ok(())
    }
}

fn square<T: Real>(y: &DistArray<T>) -> Result<usize> {
    match *y.shape() {
        [a, b] if a == b => Ok(a),
        _ => Err(Error::Shape(format!(
            "distance matrix must be square, got {:?}",
            y.shape()
        ))),
    }
}
