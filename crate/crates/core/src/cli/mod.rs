//! The `diststat` command-line driver.
//!
//! Every subcommand runs on all ranks of the chosen world; only rank 0
//! writes files and prints. Exit codes: 0 success, 1 runtime or I/O
//! failure, 2 usage error, 3 collective contract violation.

mod bench;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::comm::{self, BackendSpec, Communicator, TcpOptions};
use crate::dense::DenseArray;
use crate::distarray::{DistArray, RandFill};
use crate::error::{Error, Result};
use crate::io::{read_matrix, write_matrix, write_on_root, write_replicated};
use crate::linalg::{pairwise_euclidean, DEFAULT_CHUNK};
use crate::scalar::Real;
use crate::solvers::{synthetic_cox, ConvergenceMonitor, CoxOptions, CoxState, MdsState, NmfState, Ties, Trace};

/// Overrides `--backend` when set.
pub const BACKEND_ENV: &str = "DISTSTAT_BACKEND";

#[derive(Debug, Parser)]
#[command(
    name = "diststat",
    version,
    about = "Distributed dense arrays and statistical solvers"
)]
pub struct RunConfig {
    /// `inproc:<P>`, `tcp-local:<P>` or `tcp:<host:port>,...,rank=<r>`.
    #[arg(long, global = true, default_value = "inproc:1")]
    pub backend: String,
    #[arg(long, global = true, value_enum, default_value_t = Precision::F64)]
    pub precision: Precision,
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Precision {
    F32,
    F64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic data set.
    Gen(GenArgs),
    /// Nonnegative matrix factorization.
    Nmf(NmfArgs),
    /// Multidimensional scaling of a distance matrix.
    Mds(MdsArgs),
    /// l1-penalized Cox regression.
    Cox(CoxArgs),
    /// Time a distributed kernel and check it against a dense computation.
    Bench(bench::BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GenKind {
    /// Entries uniform in [0, 1).
    Uniform,
    /// Standard normal entries.
    Normal,
    /// `rows x rows` Euclidean distances between random points in `--dim` dimensions.
    Distances,
    /// Covariates (`--out`) and a `2 x rows` survival matrix of times and event flags (`--surv`).
    Cox,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum, default_value_t = GenKind::Uniform)]
    pub kind: GenKind,
    #[arg(long, value_parser = positive)]
    pub rows: usize,
    #[arg(long, value_parser = positive, required_if_eq_any([("kind", "uniform"), ("kind", "normal"), ("kind", "cox")]))]
    pub cols: Option<usize>,
    #[arg(long, value_parser = positive, default_value_t = 2)]
    pub dim: usize,
    /// Number of nonzero true coefficients for `--kind cox`.
    #[arg(long, default_value_t = 10)]
    pub nonzero: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, required_if_eq("kind", "cox"))]
    pub surv: Option<PathBuf>,
    #[arg(long, value_parser = positive, default_value_t = DEFAULT_CHUNK)]
    pub chunk: usize,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    #[arg(long, value_parser = positive, default_value_t = 100)]
    pub iters: usize,
    /// Trace CSV path; printed to stdout when absent.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Record every n-th iteration.
    #[arg(long, value_parser = positive, default_value_t = 1)]
    pub stride: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NmfAlgo {
    Mult,
    Apg,
}

#[derive(Debug, Args)]
pub struct NmfArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_parser = positive)]
    pub rank: usize,
    #[arg(long, value_enum, default_value_t = NmfAlgo::Mult)]
    pub algo: NmfAlgo,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Where to write `Vt` (`r x m`).
    #[arg(long)]
    pub out_vt: Option<PathBuf>,
    /// Where to write `W` (`r x n`).
    #[arg(long)]
    pub out_w: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MdsArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_parser = positive, default_value_t = 2)]
    pub dim: usize,
    /// Nudge coincident points apart instead of failing.
    #[arg(long)]
    pub perturb: bool,
    #[arg(long, value_parser = positive, default_value_t = DEFAULT_CHUNK)]
    pub chunk: usize,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CoxArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// `2 x m` matrix: observed times, then event flags.
    #[arg(long)]
    pub surv: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub breslow: bool,
    /// Stop once the objective stalls over 10 iterations.
    #[arg(long)]
    pub monitor: bool,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn positive(s: &str) -> std::result::Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

/// Parse `args` (program name first), run, and return the exit status.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cfg = match RunConfig::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let backend = std::env::var(BACKEND_ENV).unwrap_or_else(|_| cfg.backend.clone());
    let world = match World::parse(&backend) {
        Ok(w) => w,
        Err(e) => {
            eprintln!("diststat: {e}");
            return 2;
        }
    };
    match world.run(|c| execute(&c, &cfg)) {
        Ok(out) => {
            if let Some(text) = out {
                print!("{text}");
            }
            0
        }
        Err(e) => {
            eprintln!("diststat: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Contract(_) => 3,
        _ => 1,
    }
}

enum World {
    Spec(BackendSpec),
    TcpLocal(usize),
}

impl World {
    fn parse(s: &str) -> Result<World> {
        if let Some(n) = s.trim().strip_prefix("tcp-local:") {
            return match n.parse() {
                Ok(p) if p > 0 => Ok(World::TcpLocal(p)),
                _ => Err(Error::Init(format!("bad rank count in {s:?}"))),
            };
        }
        s.parse().map(World::Spec)
    }

    /// Run `f` on every hosted rank; returns rank 0's output if hosted here.
    fn run<F>(&self, f: F) -> Result<Option<String>>
    where
        F: Fn(Communicator) -> Result<String> + Sync,
    {
        let tagged = |c: Communicator| (c.rank(), f(c));
        let results = match self {
            World::Spec(spec) => comm::launch(spec, &TcpOptions::default(), tagged)?,
            World::TcpLocal(p) => comm::run_tcp_local(*p, tagged)?,
        };
        let mut root = None;
        for (rank, r) in results {
            let text = r?;
            if rank == 0 {
                root = Some(text);
            }
        }
        Ok(root)
    }
}

fn execute(comm: &Communicator, cfg: &RunConfig) -> Result<String> {
    match cfg.precision {
        Precision::F32 => execute_typed::<f32>(comm, cfg),
        Precision::F64 => execute_typed::<f64>(comm, cfg),
    }
}

fn execute_typed<T: Real>(comm: &Communicator, cfg: &RunConfig) -> Result<String> {
    match &cfg.command {
        Command::Gen(a) => generate::<T>(comm, a, cfg.seed),
        Command::Nmf(a) => nmf::<T>(comm, a, cfg.seed),
        Command::Mds(a) => mds::<T>(comm, a, cfg.seed),
        Command::Cox(a) => cox::<T>(comm, a),
        Command::Bench(a) => bench::bench::<T>(comm, a, cfg.seed),
    }
}

fn generate<T: Real>(comm: &Communicator, a: &GenArgs, seed: u64) -> Result<String> {
    let cols = a.cols.unwrap_or(a.rows);
    match a.kind {
        GenKind::Uniform | GenKind::Normal => {
            let mut x = DistArray::<T>::new(comm, &[a.rows, cols])?;
            let fill = RandFill::common(seed);
            x.rand_fill(&if a.kind == GenKind::Normal { fill.normal() } else { fill })?;
            write_matrix(comm, &a.out, &x)?;
            Ok(format!("wrote {} x {cols} to {}\n", a.rows, a.out.display()))
        }
        GenKind::Distances => {
            let mut pts = DistArray::<T>::new(comm, &[a.dim, a.rows])?;
            pts.rand_fill(&RandFill::common(seed))?;
            let mut y = DistArray::new(comm, &[a.rows, a.rows])?;
            pairwise_euclidean(&mut y, &pts, a.chunk)?;
            write_matrix(comm, &a.out, &y)?;
            Ok(format!("wrote {0} x {0} distances to {1}\n", a.rows, a.out.display()))
        }
        GenKind::Cox => {
            let surv_path = a.surv.as_deref().expect("clap requires --surv for cox");
            let data = synthetic_cox::<T>(a.rows, cols, a.nonzero, seed);
            write_replicated(comm, &a.out, &data.x)?;
            let mut surv = DenseArray::zeros(&[2, a.rows]);
            for (i, (&y, &d)) in data.y.iter().zip(&data.delta).enumerate() {
                surv.set(&[0, i], y);
                surv.set(&[1, i], d);
            }
            write_replicated(comm, surv_path, &surv)?;
            Ok(format!(
                "wrote {} x {cols} covariates to {} and survival to {}\n",
                a.rows,
                a.out.display(),
                surv_path.display()
            ))
        }
    }
}

fn nmf<T: Real>(comm: &Communicator, a: &NmfArgs, seed: u64) -> Result<String> {
    let x = read_matrix::<T>(comm, &a.input)?;
    let mut s = NmfState::new(x, a.rank, seed)?;
    s.trace.stride = a.solver.stride;
    match a.algo {
        NmfAlgo::Mult => s.multiplicative(a.solver.iters)?,
        NmfAlgo::Apg => s.apg(a.solver.iters)?,
    }
    if let Some(p) = &a.out_vt {
        write_matrix(comm, p, &s.vt)?;
    }
    if let Some(p) = &a.out_w {
        write_matrix(comm, p, &s.w)?;
    }
    emit_trace(comm, a.solver.trace.as_deref(), &s.trace)
}

fn mds<T: Real>(comm: &Communicator, a: &MdsArgs, seed: u64) -> Result<String> {
    let y = read_matrix::<T>(comm, &a.input)?;
    let mut s = MdsState::new(y, a.dim, seed)?;
    s.perturb = a.perturb;
    s.chunk = a.chunk;
    s.trace.stride = a.solver.stride;
    s.fit(a.solver.iters)?;
    if let Some(p) = &a.out {
        write_matrix(comm, p, &s.theta)?;
    }
    emit_trace(comm, a.solver.trace.as_deref(), &s.trace)
}

fn cox<T: Real>(comm: &Communicator, a: &CoxArgs) -> Result<String> {
    let x = read_matrix::<T>(comm, &a.input)?;
    let surv = read_matrix::<T>(comm, &a.surv)?.gather_full()?;
    let m = x.shape()[0];
    if surv.shape() != [2, m] {
        return Err(Error::Shape(format!(
            "survival matrix is {:?}, expected [2, {m}]",
            surv.shape()
        )));
    }
    let y = (0..m).map(|i| surv.get(&[0, i])).collect();
    let delta = (0..m).map(|i| surv.get(&[1, i])).collect();
    let opts = CoxOptions {
        lambda: a.lambda,
        sigma: a.sigma,
        ties: if a.breslow { Ties::Breslow } else { Ties::Reject },
    };
    let mut s = CoxState::new(x, y, delta, &opts)?;
    s.trace.stride = a.solver.stride;
    let mut monitor = ConvergenceMonitor::default();
    s.fit(a.solver.iters, a.monitor.then_some(&mut monitor))?;
    if let Some(p) = &a.out {
        write_matrix(comm, p, &s.beta)?;
    }
    emit_trace(comm, a.solver.trace.as_deref(), &s.trace)
}

pub fn trace_csv<T: Real>(trace: &Trace<T>) -> String {
    let mut out = String::from("iter,objective,elapsed_s\n");
    for e in &trace.entries {
        let _ = writeln!(out, "{},{:?},{:.6}", e.iter, e.objective, e.elapsed_s);
    }
    out
}

fn emit_trace<T: Real>(comm: &Communicator, path: Option<&Path>, trace: &Trace<T>) -> Result<String> {
    let csv = trace_csv(trace);
    match path {
        None => Ok(csv),
        Some(p) => {
            write_on_root(comm, p, |p| Ok(std::fs::write(p, &csv)?))?;
            let last = trace.entries.last();
            Ok(format!(
                "iterations {} objective {}\n",
                last.map_or(0, |e| e.iter),
                last.map_or_else(|| "n/a".to_string(), |e| format!("{:?}", e.objective))
            ))
        }
    }
}
