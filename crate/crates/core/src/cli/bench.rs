use std::time::Instant;

use clap::{Args, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::comm::Communicator;
use crate::dense::DenseArray;
use crate::distarray::DistArray;
use crate::error::{Error, Result};
use crate::linalg::{matmul, Kind, MatIn, MatOut, Scenario};
use crate::partition::Partition;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BenchOp {
    Matmul,
    Scan,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_enum)]
    pub op: BenchOp,
    /// Matmul scenario letter, `a` to `q`.
    #[arg(long, default_value = "a")]
    pub scenario: String,
    #[arg(long, default_value_t = 64)]
    pub rows: usize,
    #[arg(long, default_value_t = 64)]
    pub inner: usize,
    #[arg(long, default_value_t = 64)]
    pub cols: usize,
    /// Scan axis, 0 or 1.
    #[arg(long, default_value_t = 1)]
    pub axis: usize,
    #[arg(long, default_value_t = 1)]
    pub reps: usize,
}

pub(super) fn bench<T: Real>(comm: &Communicator, a: &BenchArgs, seed: u64) -> Result<String> {
    match a.op {
        BenchOp::Matmul => bench_matmul::<T>(comm, a, seed),
        BenchOp::Scan => bench_scan::<T>(comm, a, seed),
    }
}

fn random<T: Real>(rng: &mut ChaCha20Rng, shape: &[usize]) -> DenseArray<T> {
    DenseArray::from_fn(shape, |_| T::sample_normal(rng))
}

fn transpose<T: Real>(a: &DenseArray<T>) -> DenseArray<T> {
    DenseArray::from_fn(&[a.ncols(), a.nrows()], |i| a.get(&[i[1], i[0]]))
}

/// This rank's block of an array every rank holds in full.
fn split<T: Real>(comm: &Communicator, full: &DenseArray<T>) -> Result<DistArray<T>> {
    let shape = full.shape();
    let (last, lead) = (
        shape[shape.len() - 1],
        shape[..shape.len() - 1].iter().product::<usize>(),
    );
    let r = Partition::new(last, comm.size()).range(comm.rank());
    DistArray::from_local(comm, shape, full.data()[r.start * lead..r.end * lead].to_vec())
}

enum Store<T> {
    Dist(DistArray<T>),
    Rep(DenseArray<T>),
}

impl<T: Real> Store<T> {
    /// Hold a logical `rows x cols` matrix in layout `kind`.
    fn new(comm: &Communicator, kind: Kind, full: &DenseArray<T>) -> Result<Self> {
        let vec = || full.clone().reshape(&[full.len()]);
        Ok(match kind {
            Kind::Dist => Store::Dist(split(comm, full)?),
            Kind::Trans => Store::Dist(split(comm, &transpose(full))?),
            Kind::Rep => Store::Rep(full.clone()),
            Kind::DistVec => Store::Dist(split(comm, &vec()?)?),
            Kind::RepVec => Store::Rep(vec()?),
        })
    }

    fn input(&self, kind: Kind) -> MatIn<'_, T> {
        match (self, kind) {
            (Store::Dist(d), Kind::Trans) => MatIn::Trans(d.t()),
            (Store::Dist(d), _) => d.into(),
            (Store::Rep(d), _) => d.into(),
        }
    }

    fn output(&mut self, kind: Kind) -> MatOut<'_, T> {
        match (self, kind) {
            (Store::Dist(d), Kind::Trans) => MatOut::Trans(d.t_mut()),
            (Store::Dist(d), _) => d.into(),
            (Store::Rep(d), _) => d.into(),
        }
    }

    fn logical(&self, kind: Kind, rows: usize, cols: usize) -> Result<DenseArray<T>> {
        let full = match self {
            Store::Dist(d) => d.gather_full()?,
            Store::Rep(d) => d.clone(),
        };
        match kind {
            Kind::Trans => Ok(transpose(&full)),
            _ => full.reshape(&[rows, cols]),
        }
    }
}

fn bench_matmul<T: Real>(comm: &Communicator, a: &BenchArgs, seed: u64) -> Result<String> {
    let scen = a
        .scenario
        .chars()
        .next()
        .filter(|_| a.scenario.len() == 1)
        .and_then(Scenario::from_letter)
        .ok_or_else(|| Error::Input(format!("unknown scenario {:?}", a.scenario)))?;
    let (m, k, n) = (a.rows, a.inner, a.cols);
    if scen.is_vector() && n != 1 {
        return Err(Error::Input(format!(
            "scenario {scen} multiplies by a vector; use --cols 1"
        )));
    }
    let [ka, kb, kc] = scen.kinds();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let af = random::<T>(&mut rng, &[m, k]);
    let bf = random::<T>(&mut rng, &[k, n]);
    let sa = Store::new(comm, ka, &af)?;
    let sb = Store::new(comm, kb, &bf)?;
    let mut sc = Store::new(comm, kc, &DenseArray::zeros(&[m, n]))?;
    comm.barrier()?;
    let start = Instant::now();
    for _ in 0..a.reps.max(1) {
        matmul(sc.output(kc), sa.input(ka), sb.input(kb), None)?;
    }
    comm.barrier()?;
    let secs = start.elapsed().as_secs_f64() / a.reps.max(1) as f64;
    let got = sc.logical(kc, m, n)?;
    let mut dev = T::zero();
    for i in 0..m {
        for j in 0..n {
            let want = (0..k).fold(T::zero(), |s, l| s + af.get(&[i, l]) * bf.get(&[l, j]));
            dev = dev.max((got.get(&[i, j]) - want).abs());
        }
    }
    Ok(format!(
        "op=matmul scenario={scen} rows={m} inner={k} cols={n} ranks={} seconds={secs:.6e} max_abs_dev={:e}\n",
        comm.size(),
        dev.to_f64().unwrap_or(f64::NAN)
    ))
}

fn bench_scan<T: Real>(comm: &Communicator, a: &BenchArgs, seed: u64) -> Result<String> {
    if a.axis > 1 {
        return Err(Error::Input(format!("scan axis {} is not 0 or 1", a.axis)));
    }
    let (m, n) = (a.rows, a.cols);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let full = random::<T>(&mut rng, &[m, n]);
    let x = split(comm, &full)?;
    let mut out = x.zeros_like();
    comm.barrier()?;
    let start = Instant::now();
    for _ in 0..a.reps.max(1) {
        x.scan_into(&mut out, a.axis, crate::ReduceOp::Sum)?;
    }
    comm.barrier()?;
    let secs = start.elapsed().as_secs_f64() / a.reps.max(1) as f64;
    let got = out.gather_full()?;
    let mut dev = T::zero();
    for i in 0..m {
        for j in 0..n {
            let want = if a.axis == 0 {
                (0..=i).fold(T::zero(), |s, r| s + full.get(&[r, j]))
            } else {
                (0..=j).fold(T::zero(), |s, c| s + full.get(&[i, c]))
            };
            dev = dev.max((got.get(&[i, j]) - want).abs());
        }
    }
    Ok(format!(
        "op=scan axis={} rows={m} cols={n} ranks={} seconds={secs:.6e} max_abs_dev={:e}\n",
        a.axis,
        comm.size(),
        dev.to_f64().unwrap_or(f64::NAN)
    ))
}
