//! l1-penalized Cox proportional hazards regression by proximal gradient.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::{soft_threshold, ConvergenceMonitor, Trace};
use crate::comm::{Communicator, ReduceOp};
use crate::dense::DenseArray;
use crate::distarray::DistArray;
use crate::error::{Error, Result};
use crate::linalg::{matmul, opnorm, Norm};
use crate::partition::Partition;
use crate::scalar::Real;

/// Handling of tied observed times.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Ties {
    /// Ties are rejected.
    #[default]
    Reject,
    /// Tied subjects share the risk-set sum of the whole tied block.
    Breslow,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoxOptions {
    pub lambda: f64,
    /// Step size; `1 / (2 ||X||_2^2)` when absent.
    pub sigma: Option<f64>,
    pub ties: Ties,
}

impl Default for CoxOptions {
    fn default() -> Self {
        CoxOptions {
            lambda: 0.0,
            sigma: None,
            ties: Ties::Reject,
        }
    }
}

/// `out = P delta` with `P_ij = [y_i >= y_j] w_i / W_j`, where `W_j` is
/// the risk-set sum of subject `j`. Rows are in nonincreasing time order
/// and `risk_end[j]` is the last row whose time is `>= y_j` (`j` itself
/// when absent). Each rank handles its block of `j` and the partial
/// results are summed.
pub fn pi_delta<T: Real>(
    comm: &Communicator,
    out: &mut [T],
    w: &[T],
    wsum: &[T],
    delta: &[T],
    risk_end: Option<&[usize]>,
) -> Result<()> {
    let m = out.len();
    if w.len() != m || wsum.len() != m || delta.len() != m || risk_end.is_some_and(|r| r.len() != m) {
        return Err(Error::Shape(format!(
            "pi_delta lengths {m}, {}, {}, {}",
            w.len(),
            wsum.len(),
            delta.len()
        )));
    }
    out.fill(T::zero());
    // out[k] collects delta_j / W_j for blocks ending at k, then a suffix sum
    // turns it into sum over all j with risk_end[j] >= i.
    for j in Partition::new(m, comm.size()).range(comm.rank()) {
        if delta[j] != T::zero() {
            let k = risk_end.map_or(j, |r| r[j]);
            out[k] += delta[j] / wsum[j];
        }
    }
    let mut acc = T::zero();
    for i in (0..m).rev() {
        acc += out[i];
        out[i] = acc * w[i];
    }
    comm.allreduce(out, ReduceOp::Sum)
}

/// Data, coefficients and workspaces of a Cox fit.
#[derive(Debug, Clone)]
pub struct CoxState<T> {
    /// `m x n` covariates, rows in nonincreasing time order.
    pub x: DistArray<T>,
    pub y: Vec<T>,
    pub delta: Vec<T>,
    /// Length-`n` coefficients.
    pub beta: DistArray<T>,
    pub lambda: T,
    pub sigma: T,
    pub ties: Ties,
    pub trace: Trace<T>,
    risk_end: Vec<usize>,
    xbeta: DenseArray<T>,
    w: Vec<T>,
    wsum: Vec<T>,
    pd: Vec<T>,
    resid: DenseArray<T>,
    grad: DistArray<T>,
}

impl<T: Real> CoxState<T> {
    /// Start from `beta = 0`.
    pub fn new(x: DistArray<T>, y: Vec<T>, delta: Vec<T>, opts: &CoxOptions) -> Result<Self> {
        let (m, n) = match *x.shape() {
            [m, n] => (m, n),
            _ => {
                return Err(Error::Shape(format!(
                    "covariates must be a matrix, got {:?}",
                    x.shape()
                )))
            }
        };
        if y.len() != m || delta.len() != m {
            return Err(Error::Shape(format!(
                "{m} subjects but {} times and {} event flags",
                y.len(),
                delta.len()
            )));
        }
        if m == 0 || n == 0 {
            return Err(Error::Input("empty covariate matrix".into()));
        }
        if let Some(d) = delta.iter().find(|&&d| d != T::zero() && d != T::one()) {
            return Err(Error::Input(format!("event flag {d:?} is not 0 or 1")));
        }
        let risk_end = risk_ends(&y, opts.ties)?;
        if opts.lambda.is_nan() || opts.lambda < 0.0 {
            return Err(Error::Input(format!("penalty {} must be nonnegative", opts.lambda)));
        }
        let sigma = match opts.sigma {
            Some(s) => T::lit(s),
            None => {
                let norm = opnorm(&x, Norm::l2())?;
                T::one() / (T::lit(2.0) * norm * norm)
            }
        };
        if !(sigma.is_finite() && sigma > T::zero()) {
            return Err(Error::Input(format!("step size {sigma:?} must be positive and finite")));
        }
        let comm = x.comm().clone();
        Ok(CoxState {
            beta: DistArray::new(&comm, &[n])?,
            grad: DistArray::new(&comm, &[n])?,
            lambda: T::lit(opts.lambda),
            sigma,
            ties: opts.ties,
            trace: Trace::default(),
            risk_end,
            xbeta: DenseArray::zeros(&[m]),
            w: vec![T::zero(); m],
            wsum: vec![T::zero(); m],
            pd: vec![T::zero(); m],
            resid: DenseArray::zeros(&[m]),
            x,
            y,
            delta,
        })
    }

    /// `L(beta) = sum_i delta_i (x_i beta - log W_i)`.
    pub fn partial_loglik(&mut self, beta: &DistArray<T>) -> Result<T> {
        matmul(&mut self.xbeta, &self.x, beta, None)?;
        self.weights()?;
        Ok(self.loglik_from_weights())
    }

    /// Gradient of `L` at the current `beta`, `X^T (delta - P delta)`.
    pub fn gradient(&mut self) -> Result<&DistArray<T>> {
        matmul(&mut self.xbeta, &self.x, &self.beta, None)?;
        self.weights()?;
        self.gradient_from_weights()?;
        Ok(&self.grad)
    }

    /// `-L(beta) + lambda ||beta||_1` at the current `beta`.
    pub fn objective(&mut self) -> Result<T> {
        matmul(&mut self.xbeta, &self.x, &self.beta, None)?;
        self.weights()?;
        self.penalized()
    }

    /// Up to `iters` steps `beta <- S_lambda(beta + sigma grad)`. Returns the
    /// number of steps taken, fewer when `monitor` fires.
    pub fn fit(&mut self, iters: usize, mut monitor: Option<&mut ConvergenceMonitor>) -> Result<usize> {
        self.trace.start();
        let base = self.trace.iterations();
        matmul(&mut self.xbeta, &self.x, &self.beta, None)?;
        self.weights()?;
        for it in 1..=iters {
            self.gradient_from_weights()?;
            let (sigma, lambda) = (self.sigma, self.lambda);
            for (b, &g) in self.beta.local_mut().iter_mut().zip(self.grad.local()) {
                *b = soft_threshold(*b + sigma * g, lambda);
            }
            matmul(&mut self.xbeta, &self.x, &self.beta, None)?;
            self.weights()?;
            let f = self.penalized()?;
            let stop = match monitor.as_deref_mut() {
                Some(m) => m.converged(f.to_f64().unwrap_or(f64::NAN)),
                None => false,
            };
            if self.trace.wants(it, it == iters || stop) {
                self.trace.record(base + it, f);
            }
            if stop {
                return Ok(it);
            }
        }
        Ok(iters)
    }

    /// Number of nonzero coefficients.
    pub fn support_size(&self) -> Result<usize> {
        let mut c = [self.beta.local().iter().filter(|&&b| b != T::zero()).count() as i64];
        self.beta.comm().allreduce(&mut c, ReduceOp::Sum)?;
        Ok(c[0] as usize)
    }

    fn weights(&mut self) -> Result<()> {
        let clamp = T::EXP_CLAMP;
        let mut clamped = 0usize;
        for (w, &xb) in self.w.iter_mut().zip(self.xbeta.data()) {
            if xb > clamp {
                clamped += 1;
            }
            *w = xb.min(clamp).exp();
        }
        if clamped > 0 {
            log::warn!("clamped {clamped} linear predictors at {clamp:?} before exponentiation");
        }
        if let Some(i) = self.w.iter().position(|w| !w.is_finite()) {
            return Err(Error::Numeric(format!(
                "hazard weight of subject {i} is {:?} (linear predictor {:?})",
                self.w[i],
                self.xbeta.data()[i]
            )));
        }
        let mut acc = T::zero();
        let cum: Vec<T> = self
            .w
            .iter()
            .map(|&w| {
                acc += w;
                acc
            })
            .collect();
        for (s, &k) in self.wsum.iter_mut().zip(&self.risk_end) {
            *s = cum[k];
        }
        if !acc.is_finite() {
            return Err(Error::Numeric(format!("risk-set sum overflowed to {acc:?}")));
        }
        Ok(())
    }

    fn loglik_from_weights(&self) -> T {
        self.delta
            .iter()
            .zip(self.xbeta.data())
            .zip(&self.wsum)
            .filter(|((&d, _), _)| d != T::zero())
            .map(|((&d, &xb), &s)| d * (xb - s.ln()))
            .sum()
    }

    fn penalized(&self) -> Result<T> {
        let mut l1 = [self.beta.local().iter().map(|b| b.abs()).sum::<T>()];
        self.beta.comm().allreduce(&mut l1, ReduceOp::Sum)?;
        Ok(-self.loglik_from_weights() + self.lambda * l1[0])
    }

    fn gradient_from_weights(&mut self) -> Result<()> {
        let risk_end = match self.ties {
            Ties::Breslow => Some(&self.risk_end[..]),
            Ties::Reject => None,
        };
        pi_delta(self.x.comm(), &mut self.pd, &self.w, &self.wsum, &self.delta, risk_end)?;
        for ((r, &d), &p) in self.resid.data_mut().iter_mut().zip(&self.delta).zip(&self.pd) {
            *r = d - p;
        }
        matmul(&mut self.grad, self.x.t(), &self.resid, None)?;
        Ok(())
    }
}

fn risk_ends<T: Real>(y: &[T], ties: Ties) -> Result<Vec<usize>> {
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::Input(format!("observed time {i} is not finite")));
    }
    for (i, pair) in y.windows(2).enumerate() {
        if pair[1] > pair[0] {
            return Err(Error::Input(format!(
                "observed times must be nonincreasing, but y[{}] > y[{i}]",
                i + 1
            )));
        }
        if pair[1] == pair[0] && ties == Ties::Reject {
            return Err(Error::Input(format!(
                "tied times at rows {i} and {}; use Breslow ties",
                i + 1
            )));
        }
    }
    let mut end = vec![0; y.len()];
    let mut last = y.len();
    for i in (0..y.len()).rev() {
        if i + 1 == y.len() || y[i + 1] != y[i] {
            last = i;
        }
        end[i] = last;
    }
    Ok(end)
}

/// A synthetic survival data set.
#[derive(Debug, Clone)]
pub struct CoxData<T> {
    /// `m x n`, rows sorted by decreasing observed time.
    pub x: DenseArray<T>,
    pub y: Vec<T>,
    pub delta: Vec<T>,
    /// Coefficients used to generate event times; `k` entries are `+-1`.
    pub beta_true: Vec<T>,
}

/// Standard normal covariates, exponential event times with rate
/// `exp(x_i beta_true)`, and about 30% of subjects censored at a uniform
/// fraction of their event time.
pub fn synthetic_cox<T: Real>(m: usize, n: usize, k: usize, seed: u64) -> CoxData<T> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let k = k.min(n);
    let mut beta_true = vec![0.0f64; n];
    for b in beta_true.iter_mut().take(k) {
        *b = if rng.random::<bool>() { 1.0 } else { -1.0 };
    }
    let rows: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..n).map(|_| f64::sample_normal(&mut rng)).collect())
        .collect();
    let mut subjects: Vec<(f64, f64, usize)> = rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let eta: f64 = row.iter().zip(&beta_true).map(|(a, b)| a * b).sum();
            let u: f64 = 1.0 - rng.random::<f64>();
            let t = -u.ln() / eta.exp();
            if rng.random::<f64>() < 0.3 {
                (t * (1.0 - rng.random::<f64>()), 0.0, i)
            } else {
                (t, 1.0, i)
            }
        })
        .collect();
    subjects.sort_by(|a, b| b.0.total_cmp(&a.0));
    let x = DenseArray::from_fn(&[m, n], |idx| T::lit(rows[subjects[idx[0]].2][idx[1]]));
    CoxData {
        x,
        y: subjects.iter().map(|s| T::lit(s.0)).collect(),
        delta: subjects.iter().map(|s| T::lit(s.1)).collect(),
        beta_true: beta_true.into_iter().map(T::lit).collect(),
    }
}
