//! Iterative statistical solvers written purely in terms of distributed
//! arrays and products: NMF, MDS and l1-penalized Cox regression.

mod cox;
mod mds;
mod nmf;

use std::time::Instant;

pub use cox::{pi_delta, synthetic_cox, CoxData, CoxOptions, CoxState, Ties};
pub use mds::{mds_stress, MdsState};
pub use nmf::{nmf_objective, NmfState};

use crate::scalar::Real;

/// `S_lambda(x)`: shrink `x` toward zero by `lambda`.
#[inline]
pub fn soft_threshold<T: Real>(x: T, lambda: T) -> T {
    if x > lambda {
        x - lambda
    } else if x < -lambda {
        x + lambda
    } else {
        T::zero()
    }
}

/// One recorded objective value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry<T> {
    /// 1-based iteration count after which the value was taken.
    pub iter: usize,
    pub objective: T,
    /// Seconds since the solver call started.
    pub elapsed_s: f64,
}

/// Objective history of a solver, with an optional recording stride.
#[derive(Debug, Clone)]
pub struct Trace<T> {
    pub entries: Vec<TraceEntry<T>>,
    /// Record every `stride`-th iteration (and always the last one).
    pub stride: usize,
    started: Option<Instant>,
}

impl<T: Copy> Default for Trace<T> {
    fn default() -> Self {
        Trace {
            entries: Vec::new(),
            stride: 1,
            started: None,
        }
    }
}

impl<T: Copy> Trace<T> {
    fn start(&mut self) {
        self.started.get_or_insert_with(Instant::now);
    }

    fn wants(&self, iter: usize, last: bool) -> bool {
        last || iter.is_multiple_of(self.stride.max(1))
    }

    fn record(&mut self, iter: usize, objective: T) {
        let elapsed_s = self.started.map_or(0.0, |t| t.elapsed().as_secs_f64());
        self.entries.push(TraceEntry {
            iter,
            objective,
            elapsed_s,
        });
    }

    pub fn objectives(&self) -> Vec<T> {
        self.entries.iter().map(|e| e.objective).collect()
    }

    pub fn last(&self) -> Option<T> {
        self.entries.last().map(|e| e.objective)
    }

    /// Iterations run so far, across calls.
    pub fn iterations(&self) -> usize {
        self.entries.last().map_or(0, |e| e.iter)
    }
}

/// Stops an iteration once the objective has stalled: with `f_n` the
/// newest value, fires when `|f_n - f_(n-window)| / |f_n + 1| < rel_tol`.
#[derive(Debug, Clone)]
pub struct ConvergenceMonitor {
    pub window: usize,
    pub rel_tol: f64,
    history: Vec<f64>,
}

impl Default for ConvergenceMonitor {
    fn default() -> Self {
        ConvergenceMonitor::new(10, 1e-5)
    }
}

impl ConvergenceMonitor {
    pub fn new(window: usize, rel_tol: f64) -> Self {
        ConvergenceMonitor {
            window,
            rel_tol,
            history: Vec::new(),
        }
    }

    /// Record `f_new` and report whether the criterion holds. Needs more
    /// than `window` values.
    pub fn converged(&mut self, f_new: f64) -> bool {
        self.history.push(f_new);
        let n = self.history.len();
        if n <= self.window {
            return false;
        }
        let old = self.history[n - 1 - self.window];
        (f_new - old).abs() / (f_new + 1.0).abs() < self.rel_tol
    }

    pub fn history(&self) -> &[f64] {
        &self.history
    }

    pub fn reset(&mut self) {
        self.history.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn soft_threshold_examples() {
        assert!((soft_threshold(0.7, 0.5) - 0.2f64).abs() < 1e-15);
        assert!((soft_threshold(-0.7, 0.5) + 0.2f64).abs() < 1e-15);
        assert_eq!(soft_threshold(0.3, 0.5), 0.0f64);
    }

    #[test]
    fn monitor_needs_more_than_window_values() {
        let mut m = ConvergenceMonitor::default();
        for _ in 0..10 {
            assert!(!m.converged(3.0));
        }
        assert!(m.converged(3.0));
    }

    #[test]
    fn monitor_on_harmonic_sequence() {
        let mut m = ConvergenceMonitor::default();
        let fired = (1..10_000)
            .map(|n| 1.0 / n as f64)
            .position(|f| m.converged(f))
            .map(|i| i + 1)
            .unwrap();
        let want = (11..)
            .find(|&n| {
                let (f, g) = (1.0 / n as f64, 1.0 / (n - 10) as f64);
                (f - g).abs() / (f + 1.0).abs() < 1e-5
            })
            .unwrap();
        assert_eq!(fired, want);
    }

    #[test]
    fn trace_stride_keeps_last() {
        let mut t = Trace::<f64> {
            stride: 3,
            ..Default::default()
        };
        for i in 1..=7 {
            if t.wants(i, i == 7) {
                t.record(i, i as f64);
            }
        }
        let iters: Vec<_> = t.entries.iter().map(|e| e.iter).collect();
        assert_eq!(iters, vec![3, 6, 7]);
        assert_eq!(t.iterations(), 7);
    }

    proptest! {
        #[test]
        fn soft_threshold_properties(x in -10.0f64..10.0, lambda in 0.0f64..5.0) {
            let s = soft_threshold(x, lambda);
            prop_assert!(s.abs() <= (x.abs() - lambda).max(0.0) + 1e-15);
            prop_assert!(s == 0.0 || s.signum() == x.signum());
            prop_assert_eq!(soft_threshold(x, 0.0), x);
        }
    }
}
