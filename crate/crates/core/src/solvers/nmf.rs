//! Nonnegative matrix factorization `X ~ V W` with `V` stored transposed.

use super::Trace;
use crate::dense::DenseArray;
use crate::distarray::{DistArray, Operand, RandFill};
use crate::error::{Error, Result};
use crate::linalg::matmul;
use crate::scalar::Real;

/// Squared Frobenius norm of `X - Vt^T W`.
pub fn nmf_objective<T: Real>(x: &DistArray<T>, vt: &DistArray<T>, w: &DistArray<T>) -> Result<T> {
    let mut vw = x.zeros_like();
    let mut tmp = DenseArray::zeros(vt.shape());
    residual_norm2(x, vt, w, &mut vw, &mut tmp)
}

fn residual_norm2<T: Real>(
    x: &DistArray<T>,
    vt: &DistArray<T>,
    w: &DistArray<T>,
    vw: &mut DistArray<T>,
    tmp: &mut DenseArray<T>,
) -> Result<T> {
    matmul(&mut *vw, vt.t(), w, Some(tmp))?;
    let mut acc = [x
        .local()
        .iter()
        .zip(vw.local())
        .fold(T::zero(), |s, (&a, &b)| s + (a - b) * (a - b))];
    x.comm().allreduce(&mut acc, crate::ReduceOp::Sum)?;
    Ok(acc[0])
}

/// Factors, data and preallocated workspaces of an NMF run.
#[derive(Debug, Clone)]
pub struct NmfState<T> {
    /// `m x n` nonnegative data.
    pub x: DistArray<T>,
    /// `r x m`, the transpose of `V`.
    pub vt: DistArray<T>,
    /// `r x n`.
    pub w: DistArray<T>,
    /// Added to denominators and step-size denominators.
    pub eps: T,
    pub trace: Trace<T>,
    wxt: DistArray<T>,
    wwt: DenseArray<T>,
    wwtvt: DistArray<T>,
    vtx: DistArray<T>,
    vtv: DenseArray<T>,
    vtvw: DistArray<T>,
    vw: DistArray<T>,
    tmp_rm: DenseArray<T>,
}

impl<T: Real> NmfState<T> {
    /// Rank-`r` factorization of `x` with factors drawn uniformly from
    /// `[0, 1)`, generated identically for any number of ranks.
    pub fn new(x: DistArray<T>, r: usize, seed: u64) -> Result<Self> {
        let (m, n) = dims(&x)?;
        let comm = x.comm().clone();
        let mut vt = DistArray::new(&comm, &[r, m])?;
        vt.rand_fill(&RandFill::common(seed))?;
        let mut w = DistArray::new(&comm, &[r, n])?;
        w.rand_fill(&RandFill::common(seed.wrapping_add(1)))?;
        NmfState::with_factors(x, vt, w)
    }

    pub fn with_factors(x: DistArray<T>, vt: DistArray<T>, w: DistArray<T>) -> Result<Self> {
        let (m, n) = dims(&x)?;
        let r = vt.shape()[0];
        if vt.shape() != [r, m] || w.shape() != [r, n] {
            return Err(Error::Shape(format!(
                "factors {:?} and {:?} do not fit data {m} x {n}",
                vt.shape(),
                w.shape()
            )));
        }
        if r == 0 || r > m.min(n) {
            return Err(Error::Input(format!("rank {r} must be between 1 and min({m}, {n})")));
        }
        let ok = x.local().iter().all(|&v| v >= T::zero());
        if !x.comm().all_ok(ok)? {
            return Err(Error::Input("data matrix has negative entries".into()));
        }
        let comm = x.comm().clone();
        Ok(NmfState {
            wxt: DistArray::new(&comm, &[r, m])?,
            wwt: DenseArray::zeros(&[r, r]),
            wwtvt: DistArray::new(&comm, &[r, m])?,
            vtx: DistArray::new(&comm, &[r, n])?,
            vtv: DenseArray::zeros(&[r, r]),
            vtvw: DistArray::new(&comm, &[r, n])?,
            vw: x.zeros_like(),
            tmp_rm: DenseArray::zeros(&[r, m]),
            eps: T::lit(1e-10),
            trace: Trace::default(),
            x,
            vt,
            w,
        })
    }

    pub fn objective(&mut self) -> Result<T> {
        residual_norm2(&self.x, &self.vt, &self.w, &mut self.vw, &mut self.tmp_rm)
    }

    /// `V <- V (X W^T) / (V W W^T)`, then `W <- W (V^T X) / (V^T V W)`,
    /// elementwise, `iters` times.
    pub fn multiplicative(&mut self, iters: usize) -> Result<()> {
        self.run(iters, false)
    }

    /// Alternating projected gradient steps with step sizes
    /// `1 / (2 ||W W^T||_F^2 + eps)` and `1 / (2 ||V^T V||_F^2 + eps)`.
    pub fn apg(&mut self, iters: usize) -> Result<()> {
        self.run(iters, true)
    }

    fn run(&mut self, iters: usize, apg: bool) -> Result<()> {
        self.trace.start();
        let base = self.trace.iterations();
        let eps = self.eps;
        let two = T::lit(2.0);
        for it in 1..=iters {
            matmul(&mut self.wxt, &self.w, self.x.t(), Some(&mut self.tmp_rm))?;
            matmul(&mut self.wwt, &self.w, self.w.t(), None)?;
            matmul(&mut self.wwtvt, &self.wwt, &self.vt, None)?;
            let v_args = [Operand::Dest, Operand::Dist(&self.wxt), Operand::Dist(&self.wwtvt)];
            if apg {
                let sigma = T::one() / (two * frob2(&self.wwt) + eps);
                self.vt
                    .map_broadcast(&v_args, |a| (a[0] - sigma * (a[2] - a[1])).max(T::zero()))?;
            } else {
                self.vt.map_broadcast(&v_args, |a| a[0] * a[1] / (a[2] + eps))?;
            }

            matmul(&mut self.vtx, &self.vt, &self.x, Some(&mut self.tmp_rm))?;
            matmul(&mut self.vtv, &self.vt, self.vt.t(), None)?;
            matmul(&mut self.vtvw, &self.vtv, &self.w, None)?;
            let w_args = [Operand::Dest, Operand::Dist(&self.vtx), Operand::Dist(&self.vtvw)];
            if apg {
                let tau = T::one() / (two * frob2(&self.vtv) + eps);
                self.w
                    .map_broadcast(&w_args, |a| (a[0] - tau * (a[2] - a[1])).max(T::zero()))?;
            } else {
                self.w.map_broadcast(&w_args, |a| a[0] * a[1] / (a[2] + eps))?;
            }

            if self.trace.wants(it, it == iters) {
                let f = self.objective()?;
                self.trace.record(base + it, f);
            }
        }
        Ok(())
    }
}

fn dims<T: Real>(x: &DistArray<T>) -> Result<(usize, usize)> {
    match *x.shape() {
        [m, n] => Ok((m, n)),
        _ => Err(Error::Shape(format!("NMF data must be a matrix, got {:?}", x.shape()))),
    }
}

fn frob2<T: Real>(a: &DenseArray<T>) -> T {
    a.data().iter().map(|&x| x * x).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::comm::{run_inproc, Communicator};

    #[test]
    fn identity_with_zero_factors() {
        let c = Communicator::solo();
        let x = DistArray::distribute(&c, &DenseArray::from_rows(2, 2, &[1.0, 0.0, 0.0, 1.0]), 0).unwrap();
        let vt = DistArray::new(&c, &[1, 2]).unwrap();
        let w = DistArray::new(&c, &[1, 2]).unwrap();
        assert_eq!(nmf_objective(&x, &vt, &w).unwrap(), 2.0);
    }

    #[test]
    fn zero_data_is_fit_after_one_step() {
        let out = run_inproc(2, |c| {
            let x = DistArray::<f64>::new(&c, &[4, 5]).unwrap();
            let mut s = NmfState::new(x, 2, 3).unwrap();
            s.multiplicative(1).unwrap();
            s.trace.last().unwrap()
        });
        assert_eq!(out, vec![0.0, 0.0]);
    }

    #[test]
    fn exact_factorization_is_a_fixed_point_of_apg() {
        let c = Communicator::solo();
        let vt = DistArray::distribute(&c, &DenseArray::from_rows(1, 3, &[1.0, 2.0, 3.0]), 0).unwrap();
        let w = DistArray::distribute(&c, &DenseArray::from_rows(1, 2, &[2.0, 1.0]), 0).unwrap();
        let x = DistArray::distribute(&c, &DenseArray::from_rows(3, 2, &[2.0, 1.0, 4.0, 2.0, 6.0, 3.0]), 0).unwrap();
        let mut s = NmfState::with_factors(x, vt.clone(), w.clone()).unwrap();
        s.apg(5).unwrap();
        assert_eq!(s.vt.local(), vt.local());
        assert_eq!(s.w.local(), w.local());
        assert_eq!(s.trace.last(), Some(0.0));
    }

    #[test]
    fn rejects_negative_data_and_bad_rank() {
        let out = run_inproc(2, |c| {
            let mut x = DistArray::<f64>::new(&c, &[3, 3]).unwrap();
            if c.rank() == 1 {
                x.local_mut()[0] = -1.0;
            }
            let neg = matches!(NmfState::new(x.clone(), 1, 0), Err(Error::Input(_)));
            x.fill(1.0);
            let rank = NmfState::new(x, 4, 0).is_err();
            (neg, rank)
        });
        assert_eq!(out, vec![(true, true); 2]);
    }
}
