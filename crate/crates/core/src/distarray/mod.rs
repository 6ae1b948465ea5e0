//! Dense N-dimensional arrays split along their last dimension.
//!
//! Each rank stores the block of the last dimension given by
//! [`Partition::new`]`(shape[last], size)` as a column-major local array of
//! shape `(shape[0], .., shape[N-2], local_width)`.

mod broadcast;
mod reduce;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub use broadcast::Operand;
pub use reduce::{reduce_into, ReduceTarget, Reduced};

use crate::comm::Communicator;
use crate::dense::DenseArray;
use crate::error::{Error, Result};
use crate::partition::Partition;
use crate::scalar::{Real, Scalar};

/// A block-distributed dense array. One instance lives on every rank; the
/// global shape and partition are the same everywhere.
#[derive(Debug, Clone)]
pub struct DistArray<T> {
    shape: Vec<usize>,
    partition: Partition,
    local: Vec<T>,
    comm: Communicator,
}

/// Distribution random fills draw from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RandDist {
    /// Uniform on `[0, 1)`.
    #[default]
    Uniform01,
    StandardNormal,
}

/// Options for [`DistArray::rand_fill`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RandFill {
    /// Without a seed the stream is seeded from the OS.
    pub seed: Option<u64>,
    /// Generate the whole array on `root` and scatter it, so the content does
    /// not depend on the number of ranks. Otherwise every rank draws its own
    /// block from a stream seeded with `seed + rank`.
    pub common_init: bool,
    pub root: usize,
    pub dist: RandDist,
}

impl RandFill {
    /// Rank-count independent fill from `seed`.
    pub fn common(seed: u64) -> Self {
        RandFill {
            seed: Some(seed),
            common_init: true,
            ..Default::default()
        }
    }

    pub fn normal(mut self) -> Self {
        self.dist = RandDist::StandardNormal;
        self
    }
}

/// Stream used by rank-local random fills: `seed + rank`.
pub fn rank_rng(seed: u64, rank: usize) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed.wrapping_add(rank as u64))
}

fn seeded(seed: Option<u64>) -> ChaCha20Rng {
    match seed {
        Some(s) => ChaCha20Rng::seed_from_u64(s),
        None => ChaCha20Rng::from_os_rng(),
    }
}

fn check_shape(shape: &[usize]) -> Result<()> {
    if shape.is_empty() {
        return Err(Error::Shape("distributed arrays need at least one dimension".into()));
    }
    Ok(())
}

impl<T: Scalar> DistArray<T> {
    /// Allocate an array of the given global shape. Contents start at zero,
    /// but callers should treat them as unspecified.
    pub fn new(comm: &Communicator, shape: &[usize]) -> Result<Self> {
        check_shape(shape)?;
        let partition = Partition::new(*shape.last().unwrap(), comm.size());
        let lead: usize = shape[..shape.len() - 1].iter().product();
        let local = vec![T::zero(); lead * partition.len_of(comm.rank())];
        Ok(DistArray {
            shape: shape.to_vec(),
            partition,
            local,
            comm: comm.clone(),
        })
    }

    /// Wrap an already computed local block.
    pub fn from_local(comm: &Communicator, shape: &[usize], local: Vec<T>) -> Result<Self> {
        let mut a = DistArray::new(comm, shape)?;
        if local.len() != a.local.len() {
            return Err(Error::Shape(format!(
                "rank {} block of {shape:?} needs {} elements, got {}",
                comm.rank(),
                a.local.len(),
                local.len()
            )));
        }
        a.local = local;
        Ok(a)
    }

    /// New array with the same shape and partition, zero-filled.
    pub fn zeros_like(&self) -> Self {
        DistArray {
            shape: self.shape.clone(),
            partition: self.partition.clone(),
            local: vec![T::zero(); self.local.len()],
            comm: self.comm.clone(),
        }
    }

    /// Spread an array held by `root` over all ranks. The other ranks pass a
    /// [`DenseArray::placeholder`] with the same number of dimensions.
    pub fn distribute(comm: &Communicator, data: &DenseArray<T>, root: usize) -> Result<Self> {
        let is_root = comm.rank() == root;
        let mut ndims = [data.ndim() as i64];
        comm.broadcast(&mut ndims, root)?;
        let ndims = ndims[0] as usize;
        let mut extents: Vec<i64> = if is_root {
            data.shape().iter().map(|&n| n as i64).collect()
        } else {
            vec![0; ndims]
        };
        comm.broadcast(&mut extents, root)?;
        let shape: Vec<usize> = extents.iter().map(|&n| n as usize).collect();
        let local_ok = if is_root {
            ndims >= 1
        } else {
            data.ndim() == ndims && data.is_empty()
        };
        if !comm.all_ok(local_ok)? {
            return Err(Error::Shape(format!(
                "distribute: placeholders disagree with root's announced shape {shape:?}"
            )));
        }
        let mut out = DistArray::new(comm, &shape)?;
        let counts = out.partition.counts(out.lead_len());
        comm.scatterv(data.data(), &mut out.local, &counts, root)?;
        Ok(out)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn comm(&self) -> &Communicator {
        &self.comm
    }

    /// This rank's block, column-major.
    pub fn local(&self) -> &[T] {
        &self.local
    }

    pub fn local_mut(&mut self) -> &mut [T] {
        &mut self.local
    }

    /// Product of all but the last extent: the number of elements per index
    /// of the distributed dimension.
    pub fn lead_len(&self) -> usize {
        self.shape[..self.shape.len() - 1].iter().product()
    }

    /// Number of indices of the distributed dimension held here.
    pub fn local_width(&self) -> usize {
        self.partition.len_of(self.comm.rank())
    }

    /// Global indices of the distributed dimension held here.
    pub fn local_range(&self) -> std::ops::Range<usize> {
        self.partition.range(self.comm.rank())
    }

    pub fn local_shape(&self) -> Vec<usize> {
        let mut s = self.shape.clone();
        *s.last_mut().unwrap() = self.local_width();
        s
    }

    /// Rows of a matrix.
    pub fn nrows(&self) -> usize {
        self.shape[0]
    }

    /// Same global shape and therefore the same partition.
    pub fn same_layout<U>(&self, other: &DistArray<U>) -> bool {
        self.shape == other.shape && self.partition == other.partition
    }

    pub fn fill(&mut self, x: T) {
        self.local.fill(x);
    }

    /// Copy another array's contents (same shape required).
    pub fn assign(&mut self, other: &DistArray<T>) -> Result<()> {
        if !self.same_layout(other) {
            return Err(Error::Shape(format!(
                "cannot assign {:?} into {:?}",
                other.shape, self.shape
            )));
        }
        self.local.copy_from_slice(&other.local);
        Ok(())
    }

    /// The full array on every rank.
    pub fn gather_full(&self) -> Result<DenseArray<T>> {
        let counts = self.partition.counts(self.lead_len());
        let mut full = vec![T::zero(); self.len()];
        self.comm.allgatherv(&self.local, &mut full, &counts)?;
        DenseArray::from_vec(&self.shape, full)
    }

    /// Reinterpret with a new shape that keeps the distributed extent,
    /// e.g. a length-`n` vector as a `1 x n` row.
    pub fn reshape(self, shape: &[usize]) -> Result<Self> {
        check_shape(shape)?;
        let lead: usize = shape[..shape.len() - 1].iter().product();
        if shape.last() != self.shape.last() || lead != self.lead_len() {
            return Err(Error::Shape(format!(
                "reshape {:?} -> {shape:?} would move data between ranks",
                self.shape
            )));
        }
        Ok(DistArray {
            shape: shape.to_vec(),
            ..self
        })
    }
}

impl<T: Real> DistArray<T> {
    pub fn rand_fill(&mut self, opts: &RandFill) -> Result<()> {
        let draw = |rng: &mut ChaCha20Rng| match opts.dist {
            RandDist::Uniform01 => T::sample_uniform(rng),
            RandDist::StandardNormal => T::sample_normal(rng),
        };
        if opts.common_init {
            let full: Vec<T> = if self.comm.rank() == opts.root {
                let mut rng = seeded(opts.seed);
                (0..self.len()).map(|_| draw(&mut rng)).collect()
            } else {
                Vec::new()
            };
            let counts = self.partition.counts(self.lead_len());
            self.comm.scatterv(&full, &mut self.local, &counts, opts.root)?;
        } else {
            let mut rng = match opts.seed {
                Some(s) => rank_rng(s, self.comm.rank()),
                None => seeded(None),
            };
            for x in &mut self.local {
                *x = draw(&mut rng);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;
