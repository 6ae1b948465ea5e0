//! Plain dense arrays held in full by a single rank.
//!
//! Used for replicated operands (identical on every rank), for gathered
//! results and as the root-side input of [`DistArray::distribute`](crate::DistArray::distribute).

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense N-dimensional array in column-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseArray<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

/// A dense array that every rank holds with identical contents.
pub type ReplicatedArray<T> = DenseArray<T>;

impl<T: Scalar> DenseArray<T> {
    pub fn zeros(shape: &[usize]) -> Self {
        DenseArray {
            shape: shape.to_vec(),
            data: vec![T::zero(); shape.iter().product()],
        }
    }

    pub fn filled(shape: &[usize], x: T) -> Self {
        DenseArray {
            shape: shape.to_vec(),
            data: vec![x; shape.iter().product()],
        }
    }

    /// Wrap column-major `data`.
    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} needs {n} elements, got {}",
                data.len()
            )));
        }
        Ok(DenseArray {
            shape: shape.to_vec(),
            data,
        })
    }

    /// Build a matrix from row-major data, which reads naturally in source.
    pub fn from_rows(rows: usize, cols: usize, row_major: &[T]) -> Self {
        assert_eq!(rows * cols, row_major.len(), "row-major data length");
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(row_major[i * cols + j]);
            }
        }
        DenseArray {
            shape: vec![rows, cols],
            data,
        }
    }

    pub fn vector(data: Vec<T>) -> Self {
        DenseArray {
            shape: vec![data.len()],
            data,
        }
    }

    /// An empty stand-in with the right number of dimensions, passed by
    /// non-root ranks to collective constructors.
    pub fn placeholder(ndims: usize) -> Self {
        DenseArray {
            shape: vec![0; ndims],
            data: Vec::new(),
        }
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(&[usize]) -> T) -> Self {
        let n: usize = shape.iter().product();
        let mut idx = vec![0; shape.len()];
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(f(&idx));
            for (k, i) in idx.iter_mut().enumerate() {
                *i += 1;
                if *i < shape[k] {
                    break;
                }
                *i = 0;
            }
        }
        DenseArray {
            shape: shape.to_vec(),
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    /// Column-major linear offset of a multi-index.
    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        let mut off = 0;
        let mut stride = 1;
        for (&i, &n) in idx.iter().zip(&self.shape) {
            debug_assert!(i < n);
            off += i * stride;
            stride *= n;
        }
        off
    }

    pub fn get(&self, idx: &[usize]) -> T {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], x: T) {
        let o = self.offset(idx);
        self.data[o] = x;
    }

    /// Rows of a matrix; the length of a vector.
    pub fn nrows(&self) -> usize {
        self.shape.first().copied().unwrap_or(1)
    }

    /// Columns of a matrix; 1 for a vector.
    pub fn ncols(&self) -> usize {
        self.shape[1..].iter().product()
    }

    pub fn fill(&mut self, x: T) {
        self.data.fill(x);
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        if shape.iter().product::<usize>() != self.data.len() {
            return Err(Error::Shape(format!("cannot reshape {:?} into {shape:?}", self.shape)));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }
}
