//! Block-distributed dense arrays over a set of communicating ranks.
//!
//! * [`comm`]: rank-based collectives over in-process or TCP backends.
//! * [`DistArray`]: arrays split along their last dimension, with
//!   broadcasting maps, reductions and scans.
//! * [`linalg`]: dot products, diagonals, distributed matrix products,
//!   operator norms and pairwise distances.
//! * [`solvers`]: NMF, MDS and l1-penalized Cox regression built on the above.
//! * [`io`] and [`cli`]: the on-disk matrix format and the `diststat` binary.

pub mod cli;
pub mod comm;
pub mod dense;
pub mod distarray;
pub mod error;
pub mod io;
pub mod linalg;
pub mod partition;
pub mod scalar;
pub mod solvers;

pub use comm::{Backend, BackendSpec, Communicator, Endpoint, ReduceOp};
pub use dense::{DenseArray, ReplicatedArray};
pub use distarray::{DistArray, Operand, RandDist, RandFill};
pub use error::{Error, ErrorKind, Result};
pub use partition::Partition;
pub use scalar::{DType, Real, Scalar};
