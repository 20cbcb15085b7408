//! Dense and sparse numeric kernels the rest of the pipeline builds on.
//!
//! Everything here is deterministic: parallelism is only ever applied
//! across independent output slots and every reduction runs in a fixed
//! order, so repeated runs produce bitwise-identical results.

mod dense;
mod ops;
mod sparse;

pub use dense::DenseMatrix;
pub use ops::{gram, sparse_dense_matmul, sparse_transpose_dense_matmul, spd_solve};
pub(crate) use ops::{cholesky, cholesky_solve_vec};
pub use sparse::SparseMatrix;

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, NumAssign, NumCast};

/// Floating-point scalar the kernels are generic over.
///
/// Implemented for `f32` and `f64`; the production pipeline uses `f64`
/// (see [`crate::Real`]).
pub trait Scalar:
    Float + NumAssign + Sum + NumCast + Send + Sync + Debug + Display + 'static
{
    fn from_f64(x: f64) -> Self {
        NumCast::from(x).expect("f64 conversion")
    }

    fn from_usize(x: usize) -> Self {
        NumCast::from(x).expect("usize conversion")
    }

    fn to_f64_lossy(self) -> f64 {
        NumCast::from(self).expect("to f64")
    }
}

impl<T> Scalar for T where
    T: Float + NumAssign + Sum + NumCast + Send + Sync + Debug + Display + 'static
{
}
