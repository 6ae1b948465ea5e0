//! Distributed matrix products.
//!
//! Operands come in five layouts: column-split [`DistArray`]s, row-split
//! transposed views of them, replicated dense matrices, and distributed or
//! replicated vectors. Each admissible `(A, B, C)` combination is one
//! [`Scenario`]; the output layout chosen by the caller decides which
//! communication pattern is used.

use std::fmt;

use ndarray::linalg::general_mat_mul;
use ndarray::{s, ArrayView2, ArrayViewMut2, ShapeBuilder};

use crate::comm::{Communicator, ReduceOp};
use crate::dense::DenseArray;
use crate::distarray::DistArray;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-split, row-major view of a column-split matrix: logically
/// `parent^T`, with no data moved.
#[derive(Debug, Clone, Copy)]
pub struct Transposed<'a, T> {
    parent: &'a DistArray<T>,
}

/// Mutable counterpart of [`Transposed`], used as a product output.
#[derive(Debug)]
pub struct TransposedMut<'a, T> {
    parent: &'a mut DistArray<T>,
}

impl<'a, T: Scalar> Transposed<'a, T> {
    pub fn parent(&self) -> &'a DistArray<T> {
        self.parent
    }

    /// Logical shape, i.e. the parent's shape reversed.
    pub fn shape(&self) -> [usize; 2] {
        let s = self.parent.shape();
        [s[1], s[0]]
    }
}

impl<T: Scalar> TransposedMut<'_, T> {
    pub fn parent(&mut self) -> &mut DistArray<T> {
        self.parent
    }
}

impl<T: Scalar> DistArray<T> {
    /// Lazy transpose of a matrix.
    pub fn t(&self) -> Transposed<'_, T> {
        Transposed { parent: self }
    }

    pub fn t_mut(&mut self) -> TransposedMut<'_, T> {
        TransposedMut { parent: self }
    }
}

/// Layout of one matmul operand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kind {
    /// Column-split distributed matrix.
    Dist,
    /// Transposed (row-split) distributed matrix.
    Trans,
    /// Replicated matrix.
    Rep,
    /// Distributed column vector.
    DistVec,
    /// Replicated vector.
    RepVec,
}

/// An input of [`matmul`].
#[derive(Debug, Clone, Copy)]
pub enum MatIn<'a, T> {
    Dist(&'a DistArray<T>),
    Trans(Transposed<'a, T>),
    Rep(&'a DenseArray<T>),
    /// A 1-D array or a `1 x n` row; either way `n` entries split like the
    /// columns of an `m x n` matrix.
    DistVec(&'a DistArray<T>),
    RepVec(&'a DenseArray<T>),
}

/// The output of [`matmul`].
#[derive(Debug)]
pub enum MatOut<'a, T> {
    Dist(&'a mut DistArray<T>),
    Trans(TransposedMut<'a, T>),
    Rep(&'a mut DenseArray<T>),
    DistVec(&'a mut DistArray<T>),
    RepVec(&'a mut DenseArray<T>),
}

impl<'a, T: Scalar> From<&'a DistArray<T>> for MatIn<'a, T> {
    fn from(a: &'a DistArray<T>) -> Self {
        if a.ndim() == 1 {
            MatIn::DistVec(a)
        } else {
            MatIn::Dist(a)
        }
    }
}

impl<'a, T> From<Transposed<'a, T>> for MatIn<'a, T> {
    fn from(a: Transposed<'a, T>) -> Self {
        MatIn::Trans(a)
    }
}

impl<'a, T: Scalar> From<&'a DenseArray<T>> for MatIn<'a, T> {
    fn from(a: &'a DenseArray<T>) -> Self {
        if a.ndim() == 1 {
            MatIn::RepVec(a)
        } else {
            MatIn::Rep(a)
        }
    }
}

impl<'a, T: Scalar> From<&'a mut DistArray<T>> for MatOut<'a, T> {
    fn from(a: &'a mut DistArray<T>) -> Self {
        if a.ndim() == 1 {
            MatOut::DistVec(a)
        } else {
            MatOut::Dist(a)
        }
    }
}

impl<'a, T> From<TransposedMut<'a, T>> for MatOut<'a, T> {
    fn from(a: TransposedMut<'a, T>) -> Self {
        MatOut::Trans(a)
    }
}

impl<'a, T: Scalar> From<&'a mut DenseArray<T>> for MatOut<'a, T> {
    fn from(a: &'a mut DenseArray<T>) -> Self {
        if a.ndim() == 1 {
            MatOut::RepVec(a)
        } else {
            MatOut::Rep(a)
        }
    }
}

impl<T> MatIn<'_, T> {
    pub fn kind(&self) -> Kind {
        match self {
            MatIn::Dist(_) => Kind::Dist,
            MatIn::Trans(_) => Kind::Trans,
            MatIn::Rep(_) => Kind::Rep,
            MatIn::DistVec(_) => Kind::DistVec,
            MatIn::RepVec(_) => Kind::RepVec,
        }
    }
}

impl<T> MatOut<'_, T> {
    pub fn kind(&self) -> Kind {
        match self {
            MatOut::Dist(_) => Kind::Dist,
            MatOut::Trans(_) => Kind::Trans,
            MatOut::Rep(_) => Kind::Rep,
            MatOut::DistVec(_) => Kind::DistVec,
            MatOut::RepVec(_) => Kind::RepVec,
        }
    }
}

/// The seventeen supported layout combinations, `a` through `q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    A,
    B,
    C,
    D,
    E,
    F,
    G,
    H,
    I,
    J,
    K,
    L,
    M,
    N,
    O,
    P,
    Q,
}

use Kind::{Dist, DistVec, Rep, RepVec, Trans};

const TABLE: [(Scenario, [Kind; 3]); 17] = [
    (Scenario::A, [Dist, Dist, Dist]),
    (Scenario::B, [Dist, Trans, Dist]),
    (Scenario::C, [Dist, Trans, Trans]),
    (Scenario::D, [Dist, Trans, Rep]),
    (Scenario::E, [Dist, Rep, Rep]),
    (Scenario::F, [Trans, Dist, Dist]),
    (Scenario::G, [Trans, Dist, Trans]),
    (Scenario::H, [Trans, Trans, Trans]),
    (Scenario::I, [Trans, Rep, Trans]),
    (Scenario::J, [Rep, Dist, Dist]),
    (Scenario::K, [Rep, Trans, Rep]),
    (Scenario::L, [Dist, DistVec, DistVec]),
    (Scenario::M, [Dist, DistVec, RepVec]),
    (Scenario::N, [Dist, RepVec, RepVec]),
    (Scenario::O, [Trans, DistVec, DistVec]),
    (Scenario::P, [Trans, RepVec, DistVec]),
    (Scenario::Q, [Trans, RepVec, RepVec]),
];

impl Scenario {
    pub const ALL: [Scenario; 17] = {
        let mut out = [Scenario::A; 17];
        let mut i = 0;
        while i < 17 {
            out[i] = TABLE[i].0;
            i += 1;
        }
        out
    };

    /// Scenario for operand kinds `(A, B, C)`, if admissible.
    pub fn classify(a: Kind, b: Kind, c: Kind) -> Option<Scenario> {
        TABLE.iter().find(|(_, k)| *k == [a, b, c]).map(|(s, _)| *s)
    }

    /// Operand kinds `[A, B, C]`.
    pub fn kinds(self) -> [Kind; 3] {
        TABLE[self as usize].1
    }

    pub fn letter(self) -> char {
        (b'a' + self as u8) as char
    }

    pub fn from_letter(c: char) -> Option<Scenario> {
        let i = (c.to_ascii_lowercase() as u32).checked_sub('a' as u32)? as usize;
        Scenario::ALL.get(i).copied()
    }

    /// Whether the product is a matrix-vector one.
    pub fn is_vector(self) -> bool {
        self as usize >= Scenario::L as usize
    }

    /// Shape of the replicated scratch buffer for a `p x q` by `q x r`
    /// product (`r` is ignored for vector scenarios), or `None` when the
    /// scenario needs none.
    pub fn tmp_shape(self, p: usize, q: usize, r: usize) -> Option<Vec<usize>> {
        match self {
            Scenario::A => Some(vec![p, q]),
            Scenario::B => Some(vec![p, r]),
            Scenario::C => Some(vec![r, p]),
            Scenario::F => Some(vec![q, p]),
            Scenario::G => Some(vec![q, r]),
            Scenario::H => Some(vec![r, q]),
            Scenario::L => Some(vec![p]),
            Scenario::O => Some(vec![q]),
            _ => None,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

/// Column-major `rows x cols` view.
fn view<T: Scalar>(data: &[T], rows: usize, cols: usize) -> ArrayView2<'_, T> {
    ArrayView2::from_shape((rows, cols).f(), data).expect("column-major view")
}

fn view_mut<T: Scalar>(data: &mut [T], rows: usize, cols: usize) -> ArrayViewMut2<'_, T> {
    ArrayViewMut2::from_shape((rows, cols).f(), data).expect("column-major view")
}

/// `c = a * b` into column-major storage.
fn gemm<T: Scalar>(c: &mut [T], a: ArrayView2<'_, T>, b: ArrayView2<'_, T>) {
    let (m, n) = (a.nrows(), b.ncols());
    debug_assert_eq!(c.len(), m * n);
    if a.ncols() == 0 {
        c.fill(T::zero());
        return;
    }
    if m == 0 || n == 0 {
        return;
    }
    let mut cv = view_mut(c, m, n);
    general_mat_mul(T::one(), &a, &b, T::zero(), &mut cv);
}

fn matrix_shape(what: &str, shape: &[usize]) -> Result<(usize, usize)> {
    match *shape {
        [m, n] => Ok((m, n)),
        _ => Err(Error::Shape(format!("{what} must be a matrix, got shape {shape:?}"))),
    }
}

fn vector_len(what: &str, shape: &[usize], dist: bool) -> Result<usize> {
    match *shape {
        [n] => Ok(n),
        [1, n] if dist => Ok(n),
        [n, 1] if !dist => Ok(n),
        _ => Err(Error::Shape(format!("{what} must be a vector, got shape {shape:?}"))),
    }
}

/// Logical `(rows, cols)` of an input; vectors are `(n, 1)`.
fn in_dims<T: Scalar>(what: &str, x: &MatIn<'_, T>) -> Result<(usize, usize)> {
    match x {
        MatIn::Dist(a) => matrix_shape(what, a.shape()),
        MatIn::Trans(t) => {
            let (m, n) = matrix_shape(what, t.parent.shape())?;
            Ok((n, m))
        }
        MatIn::Rep(a) => matrix_shape(what, a.shape()),
        MatIn::DistVec(a) => Ok((vector_len(what, a.shape(), true)?, 1)),
        MatIn::RepVec(a) => Ok((vector_len(what, a.shape(), false)?, 1)),
    }
}

fn out_dims<T: Scalar>(c: &MatOut<'_, T>) -> Result<(usize, usize)> {
    match c {
        MatOut::Dist(a) => matrix_shape("C", a.shape()),
        MatOut::Trans(t) => {
            let (m, n) = matrix_shape("C", t.parent.shape())?;
            Ok((n, m))
        }
        MatOut::Rep(a) => matrix_shape("C", a.shape()),
        MatOut::DistVec(a) => Ok((vector_len("C", a.shape(), true)?, 1)),
        MatOut::RepVec(a) => Ok((vector_len("C", a.shape(), false)?, 1)),
    }
}

fn comms<T: Scalar>(a: &MatIn<'_, T>, b: &MatIn<'_, T>, c: &MatOut<'_, T>) -> Vec<Communicator> {
    let mut out = Vec::new();
    for x in [a, b] {
        match x {
            MatIn::Dist(d) | MatIn::DistVec(d) => out.push(d.comm().clone()),
            MatIn::Trans(t) => out.push(t.parent.comm().clone()),
            _ => {}
        }
    }
    match c {
        MatOut::Dist(d) | MatOut::DistVec(d) => out.push(d.comm().clone()),
        MatOut::Trans(t) => out.push(t.parent.comm().clone()),
        _ => {}
    }
    out
}

/// Local block of a distributed input, whatever its layout.
fn local<'a, T: Scalar>(x: &MatIn<'a, T>) -> &'a [T] {
    match *x {
        MatIn::Dist(d) | MatIn::DistVec(d) => d.local(),
        MatIn::Trans(t) => t.parent.local(),
        MatIn::Rep(r) | MatIn::RepVec(r) => r.data(),
    }
}

fn out_local<'a, T: Scalar>(c: &'a mut MatOut<'_, T>) -> &'a mut [T] {
    match c {
        MatOut::Dist(d) | MatOut::DistVec(d) => d.local_mut(),
        MatOut::Trans(t) => t.parent.local_mut(),
        MatOut::Rep(r) | MatOut::RepVec(r) => r.data_mut(),
    }
}

/// `C = A * B` for any admissible layout triple. Returns the scenario
/// used.
///
/// `tmp`, if given, must have exactly the shape from
/// [`Scenario::tmp_shape`]; it is allocated internally otherwise. Passing a
/// buffer to a scenario that needs none is an error.
pub fn matmul<'a, T: Scalar>(
    c: impl Into<MatOut<'a, T>>,
    a: impl Into<MatIn<'a, T>>,
    b: impl Into<MatIn<'a, T>>,
    tmp: Option<&mut DenseArray<T>>,
) -> Result<Scenario> {
    let mut c = c.into();
    let (a, b) = (a.into(), b.into());
    let scen = Scenario::classify(a.kind(), b.kind(), c.kind())
        .ok_or_else(|| Error::Scenario(format!("A: {:?}, B: {:?}, C: {:?}", a.kind(), b.kind(), c.kind())))?;

    let (p, q) = in_dims("A", &a)?;
    let (q2, r) = in_dims("B", &b)?;
    let (cp, cr) = out_dims(&c)?;
    if q != q2 || cp != p || cr != r {
        return Err(Error::Shape(format!(
            "cannot store ({p} x {q}) * ({q2} x {r}) into {cp} x {cr}"
        )));
    }

    let cs = comms(&a, &b, &c);
    let comm = cs[0].clone();
    if cs.iter().any(|x| x.size() != comm.size() || x.rank() != comm.rank()) {
        return Err(Error::Distribution("operands live on different worlds".into()));
    }

    let need = scen.tmp_shape(p, q, r);
    let mut own;
    let tmp: &mut [T] = match (need, tmp) {
        (None, None) => &mut [],
        (None, Some(_)) => return Err(Error::Scenario(format!("scenario {scen} takes no temporary buffer"))),
        (Some(shape), Some(t)) => {
            if t.shape() != shape.as_slice() {
                return Err(Error::Shape(format!(
                    "scenario {scen} needs tmp of shape {shape:?}, got {:?}",
                    t.shape()
                )));
            }
            t.data_mut()
        }
        (Some(shape), None) => {
            own = vec![T::zero(); shape.iter().product()];
            &mut own
        }
    };

    let size = comm.size();
    let rank = comm.rank();
    // block ranges along P, Q, R for this rank
    let part = |n: usize| crate::Partition::new(n, size);
    let (pp, qp, rp) = (part(p), part(q), part(r));
    let (pr, qr, rr) = (pp.range(rank), qp.range(rank), rp.range(rank));
    let (pw, qw, rw) = (pr.len(), qr.len(), rr.len());

    let al = local(&a);
    let bl = local(&b);
    let sum = ReduceOp::Sum;

    match scen {
        Scenario::A => {
            comm.allgatherv(al, tmp, &qp.counts(p))?;
            gemm(out_local(&mut c), view(tmp, p, q), view(bl, q, rw));
        }
        Scenario::B => {
            gemm(tmp, view(al, p, qw), view(bl, r, qw).t());
            comm.allreduce(tmp, sum)?;
            out_local(&mut c).copy_from_slice(&tmp[rr.start * p..rr.end * p]);
        }
        Scenario::C => {
            gemm(tmp, view(bl, r, qw), view(al, p, qw).t());
            comm.allreduce(tmp, sum)?;
            out_local(&mut c).copy_from_slice(&tmp[pr.start * r..pr.end * r]);
        }
        Scenario::D => {
            let cl = out_local(&mut c);
            gemm(cl, view(al, p, qw), view(bl, r, qw).t());
            comm.allreduce(cl, sum)?;
        }
        Scenario::E => {
            let cl = out_local(&mut c);
            let brows = view(bl, q, r);
            gemm(cl, view(al, p, qw), brows.slice(s![qr.clone(), ..]));
            comm.allreduce(cl, sum)?;
        }
        Scenario::F => {
            comm.allgatherv(al, tmp, &pp.counts(q))?;
            gemm(out_local(&mut c), view(tmp, q, p).t(), view(bl, q, rw));
        }
        Scenario::G => {
            comm.allgatherv(bl, tmp, &rp.counts(q))?;
            gemm(out_local(&mut c), view(tmp, q, r).t(), view(al, q, pw));
        }
        Scenario::H => {
            comm.allgatherv(bl, tmp, &qp.counts(r))?;
            gemm(out_local(&mut c), view(tmp, r, q), view(al, q, pw));
        }
        Scenario::I => {
            gemm(out_local(&mut c), view(bl, q, r).t(), view(al, q, pw));
        }
        Scenario::J => {
            gemm(out_local(&mut c), view(al, p, q), view(bl, q, rw));
        }
        Scenario::K => {
            let cl = out_local(&mut c);
            let acols = view(al, p, q);
            gemm(cl, acols.slice(s![.., qr.clone()]), view(bl, r, qw).t());
            comm.allreduce(cl, sum)?;
        }
        Scenario::L => {
            gemm(tmp, view(al, p, qw), view(bl, qw, 1));
            comm.allreduce(tmp, sum)?;
            out_local(&mut c).copy_from_slice(&tmp[pr]);
        }
        Scenario::M => {
            let cl = out_local(&mut c);
            gemm(cl, view(al, p, qw), view(bl, qw, 1));
            comm.allreduce(cl, sum)?;
        }
        Scenario::N => {
            let cl = out_local(&mut c);
            gemm(cl, view(al, p, qw), view(&bl[qr], qw, 1));
            comm.allreduce(cl, sum)?;
        }
        Scenario::O => {
            comm.allgatherv(bl, tmp, &qp.counts(1))?;
            gemm(out_local(&mut c), view(al, q, pw).t(), view(tmp, q, 1));
        }
        Scenario::P => {
            gemm(out_local(&mut c), view(al, q, pw).t(), view(bl, q, 1));
        }
        Scenario::Q => {
            let mut mine = vec![T::zero(); pw];
            gemm(&mut mine, view(al, q, pw).t(), view(bl, q, 1));
            comm.allgatherv(&mine, out_local(&mut c), &pp.counts(1))?;
        }
    }
    Ok(scen)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::comm::run_inproc;

    #[test]
    fn table_round_trips() {
        for s in Scenario::ALL {
            let [a, b, c] = s.kinds();
            assert_eq!(Scenario::classify(a, b, c), Some(s));
            assert_eq!(Scenario::from_letter(s.letter()), Some(s));
        }
        assert_eq!(Scenario::classify(Rep, Rep, Rep), None);
        assert_eq!(Scenario::from_letter('r'), None);
        assert_eq!(Scenario::Q.letter(), 'q');
    }

    #[test]
    fn two_by_two_example() {
        let a = DenseArray::from_rows(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let b = DenseArray::from_rows(2, 2, &[3.0, 4.0, 5.0, 6.0]);
        let comm = Communicator::solo();
        let ad = DistArray::distribute(&comm, &a, 0).unwrap();
        let bd = DistArray::distribute(&comm, &b, 0).unwrap();
        let mut c = DistArray::new(&comm, &[2, 2]).unwrap();
        assert_eq!(matmul(&mut c, &ad, &bd, None).unwrap(), Scenario::A);
        assert_eq!(
            c.gather_full().unwrap(),
            DenseArray::from_rows(2, 2, &[13.0, 16.0, 29.0, 36.0])
        );
        let mut cr = DenseArray::zeros(&[2, 2]);
        assert_eq!(matmul(&mut cr, &ad, &b, None).unwrap(), Scenario::E);
        assert_eq!(cr, c.gather_full().unwrap());
    }

    #[test]
    fn identity_times_b() {
        let out = run_inproc(3, |comm| {
            let eye = DenseArray::<f64>::from_fn(&[4, 4], |i| f64::from(u8::from(i[0] == i[1])));
            let b = DenseArray::<f64>::from_fn(&[4, 5], |i| (i[0] * 5 + i[1]) as f64);
            let src = |x: &DenseArray<f64>| {
                if comm.is_root() {
                    x.clone()
                } else {
                    DenseArray::placeholder(2)
                }
            };
            let ed = DistArray::distribute(&comm, &src(&eye), 0).unwrap();
            let bd = DistArray::distribute(&comm, &src(&b), 0).unwrap();
            let mut c = DistArray::new(&comm, &[4, 5]).unwrap();
            matmul(&mut c, &ed, &bd, None).unwrap();
            c.gather_full().unwrap() == b
        });
        assert!(out.into_iter().all(|x| x));
    }

    #[test]
    fn rejects_bad_layouts_and_tmp() {
        let comm = Communicator::solo();
        let a = DistArray::<f64>::new(&comm, &[2, 3]).unwrap();
        let b = DistArray::<f64>::new(&comm, &[3, 4]).unwrap();
        let rep = DenseArray::<f64>::zeros(&[2, 3]);
        let mut c = DistArray::<f64>::new(&comm, &[2, 4]).unwrap();
        let mut crep = DenseArray::<f64>::zeros(&[2, 4]);

        assert!(matches!(
            matmul(&mut crep, &rep, &DenseArray::zeros(&[3, 4]), None),
            Err(Error::Scenario(_))
        ));
        let mut wrong = DenseArray::zeros(&[3, 3]);
        assert!(matches!(matmul(&mut c, &a, &b, Some(&mut wrong)), Err(Error::Shape(_))));
        let mut right = DenseArray::zeros(&[2, 3]);
        assert!(matmul(&mut c, &a, &b, Some(&mut right)).is_ok());
        assert!(matches!(
            matmul(&mut crep, &a, &DenseArray::zeros(&[3, 4]), Some(&mut right)),
            Err(Error::Scenario(_))
        ));
        assert!(matches!(matmul(&mut c, &a, &a, None), Err(Error::Shape(_))));
    }

    #[test]
    fn tmp_shapes_follow_table() {
        assert_eq!(Scenario::A.tmp_shape(6, 5, 4), Some(vec![6, 5]));
        assert_eq!(Scenario::C.tmp_shape(6, 5, 4), Some(vec![4, 6]));
        assert_eq!(Scenario::H.tmp_shape(6, 5, 4), Some(vec![4, 5]));
        assert_eq!(Scenario::O.tmp_shape(6, 5, 1), Some(vec![5]));
        assert_eq!(Scenario::E.tmp_shape(6, 5, 4), None);
    }
}
