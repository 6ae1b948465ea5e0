//! Linear algebra on distributed matrices.

mod matmul;

pub use matmul::{matmul, Kind, MatIn, MatOut, Scenario, Transposed, TransposedMut};

use crate::comm::ReduceOp;
use crate::dense::DenseArray;
use crate::distarray::{DistArray, RandFill};
use crate::error::{Error, Result};
use crate::scalar::{Real, Scalar};

/// Sum of the elementwise product. Same value on every rank.
pub fn dot<T: Scalar>(a: &DistArray<T>, b: &DistArray<T>) -> Result<T> {
    if !a.same_layout(b) {
        return Err(Error::Shape(format!("dot of {:?} and {:?}", a.shape(), b.shape())));
    }
    let mut acc = [a.local().iter().zip(b.local()).fold(T::zero(), |s, (&x, &y)| s + x * y)];
    a.comm().allreduce(&mut acc, ReduceOp::Sum)?;
    Ok(acc[0])
}

fn square_extent<T: Scalar>(m: &DistArray<T>) -> Result<usize> {
    match *m.shape() {
        [a, b] if a == b => Ok(a),
        _ => Err(Error::Shape(format!("expected a square matrix, got {:?}", m.shape()))),
    }
}

/// Where [`diag_get`] writes.
pub enum DiagTarget<'a, T> {
    /// A `1 x n` row sharing the matrix's column partition.
    Dist(&'a mut DistArray<T>),
    /// A length-`n` vector on every rank.
    Replicated(&'a mut DenseArray<T>),
}

/// The locally owned diagonal entries of a square matrix.
fn local_diag<T: Scalar>(m: &DistArray<T>, n: usize) -> Vec<T> {
    let start = m.local_range().start;
    (0..m.local_width()).map(|j| m.local()[j * n + start + j]).collect()
}

/// Copy the main diagonal of `m` into `dest`.
pub fn diag_get<T: Scalar>(dest: DiagTarget<'_, T>, m: &DistArray<T>) -> Result<()> {
    let n = square_extent(m)?;
    let mine = local_diag(m, n);
    match dest {
        DiagTarget::Dist(d) => {
            if d.shape() != [1, n] {
                return Err(Error::Shape(format!(
                    "diagonal of a {n} x {n} matrix into {:?}",
                    d.shape()
                )));
            }
            d.local_mut().copy_from_slice(&mine);
        }
        DiagTarget::Replicated(d) => {
            if d.len() != n || d.ncols() != 1 {
                return Err(Error::Shape(format!(
                    "diagonal of a {n} x {n} matrix into {:?}",
                    d.shape()
                )));
            }
            m.comm().allgatherv(&mine, d.data_mut(), &m.partition().counts(1))?;
        }
    }
    Ok(())
}

/// Set the main diagonal of a square matrix to `x`.
pub fn diag_fill<T: Scalar>(m: &mut DistArray<T>, x: T) -> Result<()> {
    let n = square_extent(m)?;
    let start = m.local_range().start;
    let w = m.local_width();
    let local = m.local_mut();
    for j in 0..w {
        local[j * n + start + j] = x;
    }
    Ok(())
}

/// Settings of the power method for the spectral norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerOptions {
    pub tol: f64,
    pub maxiter: usize,
    pub seed: u64,
}

impl Default for PowerOptions {
    fn default() -> Self {
        PowerOptions {
            tol: 1e-6,
            maxiter: 1000,
            seed: 95376,
        }
    }
}

/// Which operator norm [`opnorm`] computes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Norm {
    /// Largest absolute column sum.
    L1,
    /// Largest absolute row sum.
    Linf,
    /// Largest singular value by power iteration on `A^T A`.
    L2Power(PowerOptions),
    /// `sqrt(l1 * linf)`, a cheap upper bound on the spectral norm.
    L2Quick,
}

impl Norm {
    pub fn l2() -> Norm {
        Norm::L2Power(PowerOptions::default())
    }
}

pub fn opnorm<T: Real>(a: &DistArray<T>, which: Norm) -> Result<T> {
    let (m, n) = match *a.shape() {
        [m, n] => (m, n),
        _ => return Err(Error::Shape(format!("opnorm of shape {:?}", a.shape()))),
    };
    if m == 0 || n == 0 {
        return Err(Error::Shape("opnorm of an empty matrix".into()));
    }
    match which {
        Norm::L1 => {
            let mut best = [a
                .local()
                .chunks_exact(m)
                .map(|c| c.iter().map(|x| x.abs()).sum::<T>())
                .fold(T::zero(), T::max)];
            a.comm().allreduce(&mut best, ReduceOp::Max)?;
            Ok(best[0])
        }
        Norm::Linf => {
            let mut rows = vec![T::zero(); m];
            for col in a.local().chunks_exact(m) {
                for (r, &x) in rows.iter_mut().zip(col) {
                    *r += x.abs();
                }
            }
            a.comm().allreduce(&mut rows, ReduceOp::Sum)?;
            Ok(rows.into_iter().fold(T::zero(), T::max))
        }
        Norm::L2Quick => Ok((opnorm(a, Norm::L1)? * opnorm(a, Norm::Linf)?).sqrt()),
        Norm::L2Power(opts) => power_norm(a, m, n, opts),
    }
}

fn power_norm<T: Real>(a: &DistArray<T>, m: usize, n: usize, opts: PowerOptions) -> Result<T> {
    if opts.tol.is_nan() || opts.tol <= 0.0 || opts.maxiter == 0 {
        return Err(Error::Input(format!(
            "power iteration needs tol > 0 and maxiter >= 1, got {} and {}",
            opts.tol, opts.maxiter
        )));
    }
    let comm = a.comm();
    let mut v = DistArray::<T>::new(comm, &[n])?;
    v.rand_fill(&RandFill::common(opts.seed))?;
    let mut u = DenseArray::<T>::zeros(&[m]);
    let tol = T::lit(opts.tol);
    let normalize = |v: &mut DistArray<T>| -> Result<T> {
        let norm = v.sum_abs2()?.sqrt();
        if norm > T::zero() {
            v.map_inplace(|x| x / norm);
        }
        Ok(norm)
    };
    if normalize(&mut v)? == T::zero() {
        v.fill(T::one());
        normalize(&mut v)?;
    }
    let mut sigma = T::zero();
    let mut last_step = T::infinity();
    for _ in 0..opts.maxiter {
        matmul(&mut u, a, &v, None)?;
        let next = u.data().iter().map(|&x| x * x).sum::<T>().sqrt();
        matmul(&mut v, a.t(), &u, None)?;
        let znorm = normalize(&mut v)?;
        if znorm == T::zero() {
            // A v = 0 with v a unit vector only happens for A = 0
            return Ok(next);
        }
        // ||A^T A v - next^2 v||, zero once v is a right singular vector
        let sq = next * next;
        let residual = (znorm * znorm - sq * sq).max(T::zero()).sqrt();
        // The estimates converge geometrically with ratio rho = step /
        // last_step, so the distance still to go is about step * rho / (1 - rho).
        let step = (next - sigma).abs();
        let rho = step / last_step;
        let remaining = if rho < T::one() {
            step * rho / (T::one() - rho)
        } else {
            T::infinity()
        };
        let done = step <= tol * next && (step == T::zero() || remaining <= tol * next) && residual <= tol * sq;
        sigma = next;
        last_step = step;
        if done {
            break;
        }
    }
    Ok(sigma)
}

/// Default number of point columns gathered per round by
/// [`pairwise_euclidean`].
pub const DEFAULT_CHUNK: usize = 64;

/// `Y[i, j] = ||x_i - x_j||` for the point columns of the `m x n` matrix
/// `x`. Points are gathered `chunk` columns at a time.
pub fn pairwise_euclidean<T: Real>(y: &mut DistArray<T>, x: &DistArray<T>, chunk: usize) -> Result<()> {
    let (m, n) = match *x.shape() {
        [m, n] => (m, n),
        _ => return Err(Error::Shape(format!("points must form a matrix, got {:?}", x.shape()))),
    };
    if y.shape() != [n, n] {
        return Err(Error::Shape(format!(
            "distances of {n} points need an {n} x {n} output, got {:?}",
            y.shape()
        )));
    }
    if chunk == 0 {
        return Err(Error::Input("chunk width must be at least 1".into()));
    }
    let comm = x.comm();
    let bounds = x.partition().boundaries().to_vec();
    let own = x.local();
    let mine = x.local_range();
    let mut buf = Vec::new();
    let mut start = 0;
    while start < n {
        let end = (start + chunk).min(n);
        // each rank ships its share of points start..end
        let counts: Vec<usize> = bounds
            .windows(2)
            .map(|w| w[1].min(end).saturating_sub(w[0].max(start)) * m)
            .collect();
        let lo = mine.start.max(start).min(mine.end);
        let hi = mine.end.min(end).max(lo);
        let send = &own[(lo - mine.start) * m..(hi - mine.start) * m];
        buf.resize((end - start) * m, T::zero());
        comm.allgatherv(send, &mut buf, &counts)?;
        let yl = y.local_mut();
        for (jl, xj) in own.chunks_exact(m.max(1)).enumerate().take(mine.len()) {
            for (ii, xi) in buf.chunks_exact(m.max(1)).enumerate().take(end - start) {
                let d2: T = xi.iter().zip(xj).map(|(&a, &b)| (a - b) * (a - b)).sum();
                yl[jl * n + start + ii] = d2.sqrt();
            }
        }
        start = end;
    }
    if m == 0 {
        y.fill(T::zero());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::comm::{run_inproc, Communicator};

    fn dist(c: &Communicator, full: &DenseArray<f64>) -> DistArray<f64> {
        let src = if c.is_root() {
            full.clone()
        } else {
            DenseArray::placeholder(full.ndim())
        };
        DistArray::distribute(c, &src, 0).unwrap()
    }

    #[test]
    fn dot_examples() {
        let out = run_inproc(2, |c| {
            let a = dist(&c, &DenseArray::vector(vec![1.0, 2.0, 3.0]));
            let e1 = dist(&c, &DenseArray::vector(vec![1.0, 0.0]));
            let e2 = dist(&c, &DenseArray::vector(vec![0.0, 1.0]));
            (dot(&a, &a).unwrap(), dot(&e1, &e2).unwrap(), dot(&a, &e1).is_err())
        });
        assert!(out.iter().all(|&x| x == (14.0, 0.0, true)));
    }

    #[test]
    fn diagonal_examples() {
        let out = run_inproc(2, |c| {
            let m = dist(&c, &DenseArray::from_rows(2, 2, &[1.0, 2.0, 3.0, 4.0]));
            let mut row = DistArray::new(&c, &[1, 2]).unwrap();
            diag_get(DiagTarget::Dist(&mut row), &m).unwrap();
            let mut rep = DenseArray::zeros(&[2]);
            diag_get(DiagTarget::Replicated(&mut rep), &m).unwrap();
            let mut bad = DenseArray::zeros(&[3]);
            assert!(diag_get(DiagTarget::Replicated(&mut bad), &m).is_err());
            (row.gather_full().unwrap().into_vec(), rep.into_vec())
        });
        assert!(out.iter().all(|(a, b)| *a == [1.0, 4.0] && *b == [1.0, 4.0]));

        let out = run_inproc(3, |c| {
            let mut m = DistArray::<f64>::new(&c, &[3, 3]).unwrap();
            diag_fill(&mut m, 1.0).unwrap();
            let mut nonsq = DistArray::<f64>::new(&c, &[2, 3]).unwrap();
            assert!(diag_fill(&mut nonsq, 1.0).is_err());
            m.gather_full().unwrap()
        });
        let eye = DenseArray::from_fn(&[3, 3], |i| f64::from(u8::from(i[0] == i[1])));
        assert_eq!(out[0], eye);
    }

    #[test]
    fn norms_of_simple_matrices() {
        let out = run_inproc(2, |c| {
            let eye = dist(&c, &DenseArray::from_fn(&[4, 4], |i| f64::from(u8::from(i[0] == i[1]))));
            let d = dist(
                &c,
                &DenseArray::from_fn(&[3, 3], |i| if i[0] == i[1] { (i[0] + 1) as f64 } else { 0.0 }),
            );
            [
                opnorm(&eye, Norm::L1).unwrap(),
                opnorm(&eye, Norm::Linf).unwrap(),
                opnorm(&eye, Norm::l2()).unwrap(),
                opnorm(&eye, Norm::L2Quick).unwrap(),
                opnorm(&d, Norm::l2()).unwrap(),
            ]
        });
        for v in out {
            assert_eq!(&v[..2], &[1.0, 1.0]);
            assert!((v[2] - 1.0).abs() < 1e-6);
            assert_eq!(v[3], 1.0);
            assert!((v[4] - 3.0).abs() < 1e-6 * 3.0);
        }
    }

    #[test]
    fn norms_reject_empty() {
        let c = Communicator::solo();
        let e = DistArray::<f64>::new(&c, &[0, 3]).unwrap();
        assert!(opnorm(&e, Norm::L1).is_err());
        let z = DistArray::<f64>::new(&c, &[2, 2]).unwrap();
        assert_eq!(opnorm(&z, Norm::l2()).unwrap(), 0.0);
        let bad = Norm::L2Power(PowerOptions {
            tol: 0.0,
            ..Default::default()
        });
        assert!(opnorm(&z, bad).is_err());
    }

    #[test]
    fn pairwise_small_cases() {
        let out = run_inproc(2, |c| {
            let x = dist(&c, &DenseArray::from_rows(2, 2, &[0.0, 3.0, 0.0, 4.0]));
            let mut y = DistArray::new(&c, &[2, 2]).unwrap();
            pairwise_euclidean(&mut y, &x, 1).unwrap();
            let same = dist(&c, &DenseArray::filled(&[3, 5], 2.0));
            let mut z = DistArray::new(&c, &[5, 5]).unwrap();
            z.fill(9.0);
            pairwise_euclidean(&mut z, &same, DEFAULT_CHUNK).unwrap();
            (y.gather_full().unwrap(), z.sum().unwrap())
        });
        assert_eq!(out[0].0, DenseArray::from_rows(2, 2, &[0.0, 5.0, 5.0, 0.0]));
        assert_eq!(out[0].1, 0.0);
    }
}
