//! Reference implementations used by the integration tests. Everything
//! here works on plain column-major `Vec<f64>` and never calls into the
//! library's numerical code.

#![allow(dead_code)]

use diststat::linalg::{matmul, Kind, Scenario};
use diststat::{Communicator, DenseArray, DistArray};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Column-major `rows x cols` matrix with entries in [-1, 1).
pub fn rand_mat(rng: &mut impl Rng, rows: usize, cols: usize) -> Vec<f64> {
    (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn transpose(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut t = vec![0.0; a.len()];
    for j in 0..cols {
        for i in 0..rows {
            t[i * cols + j] = a[j * rows + i];
        }
    }
    t
}

/// Triple-loop product of column-major `p x q` and `q x r`.
pub fn naive_mm(a: &[f64], b: &[f64], p: usize, q: usize, r: usize) -> Vec<f64> {
    let mut c = vec![0.0; p * r];
    for j in 0..r {
        for i in 0..p {
            let mut s = 0.0;
            for k in 0..q {
                s += a[k * p + i] * b[j * q + k];
            }
            c[j * p + i] = s;
        }
    }
    c
}

/// Largest elementwise deviation, scaled by the largest magnitude of the
/// reference (or 1, whichever is bigger).
pub fn max_rel_err(got: &[f64], want: &[f64]) -> f64 {
    assert_eq!(got.len(), want.len(), "length mismatch");
    let scale = want.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    got.iter()
        .zip(want)
        .map(|(a, b)| (a - b).abs() / scale)
        .fold(0.0, f64::max)
}

pub fn distribute(comm: &Communicator, full: &DenseArray<f64>) -> DistArray<f64> {
    let src = if comm.is_root() {
        full.clone()
    } else {
        DenseArray::placeholder(full.ndim())
    };
    DistArray::distribute(comm, &src, 0).unwrap()
}

pub fn dense(rows: usize, cols: usize, col_major: Vec<f64>) -> DenseArray<f64> {
    DenseArray::from_vec(&[rows, cols], col_major).unwrap()
}

/// Run one product in the layout of `scen` for column-major `a` (p x q) and
/// `b` (q x r; a length-q vector for vector scenarios) and return the
/// gathered logical `C` (p x r, column-major).
pub fn run_scenario(
    comm: &Communicator,
    scen: Scenario,
    a: &[f64],
    b: &[f64],
    (p, q, r): (usize, usize, usize),
    with_tmp: bool,
) -> Vec<f64> {
    let [ka, kb, kc] = scen.kinds();
    let r = if scen.is_vector() { 1 } else { r };

    let a_dist;
    let a_rep;
    let a_in: diststat::linalg::MatIn<f64> = match ka {
        Kind::Dist => {
            a_dist = distribute(comm, &dense(p, q, a.to_vec()));
            (&a_dist).into()
        }
        Kind::Trans => {
            a_dist = distribute(comm, &dense(q, p, transpose(a, p, q)));
            a_dist.t().into()
        }
        Kind::Rep => {
            a_rep = dense(p, q, a.to_vec());
            (&a_rep).into()
        }
        _ => unreachable!(),
    };

    let b_dist;
    let b_rep;
    let b_in: diststat::linalg::MatIn<f64> = match kb {
        Kind::Dist => {
            b_dist = distribute(comm, &dense(q, r, b.to_vec()));
            (&b_dist).into()
        }
        Kind::Trans => {
            b_dist = distribute(comm, &dense(r, q, transpose(b, q, r)));
            b_dist.t().into()
        }
        Kind::Rep => {
            b_rep = dense(q, r, b.to_vec());
            (&b_rep).into()
        }
        Kind::DistVec => {
            b_dist = distribute(comm, &DenseArray::vector(b.to_vec()));
            (&b_dist).into()
        }
        Kind::RepVec => {
            b_rep = DenseArray::vector(b.to_vec());
            (&b_rep).into()
        }
    };

    let mut tmp = scen
        .tmp_shape(p, q, r)
        .filter(|_| with_tmp)
        .map(|s| DenseArray::filled(&s, f64::NAN));

    match kc {
        Kind::Dist => {
            let mut c = DistArray::new(comm, &[p, r]).unwrap();
            assert_eq!(matmul(&mut c, a_in, b_in, tmp.as_mut()).unwrap(), scen);
            c.gather_full().unwrap().into_vec()
        }
        Kind::Trans => {
            let mut c = DistArray::new(comm, &[r, p]).unwrap();
            assert_eq!(matmul(c.t_mut(), a_in, b_in, tmp.as_mut()).unwrap(), scen);
            transpose(c.gather_full().unwrap().data(), r, p)
        }
        Kind::Rep => {
            let mut c = DenseArray::zeros(&[p, r]);
            assert_eq!(matmul(&mut c, a_in, b_in, tmp.as_mut()).unwrap(), scen);
            c.into_vec()
        }
        Kind::DistVec => {
            let mut c = DistArray::new(comm, &[p]).unwrap();
            assert_eq!(matmul(&mut c, a_in, b_in, tmp.as_mut()).unwrap(), scen);
            c.gather_full().unwrap().into_vec()
        }
        Kind::RepVec => {
            let mut c = DenseArray::zeros(&[p]);
            assert_eq!(matmul(&mut c, a_in, b_in, tmp.as_mut()).unwrap(), scen);
            c.into_vec()
        }
    }
}
