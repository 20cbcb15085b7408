//! One-class collaborative filtering from implicit feedback.
//!
//! The pipeline: binarize a ratings table into a sparse interaction
//! matrix, optionally reweight it with a closed-form noise-contrastive
//! depopularization, factorize with randomized truncated SVD, learn
//! linear per-item weights in closed form, and evaluate top-K rankings.
//!
//! Numeric kernels are generic over the scalar type ([`Scalar`], `f32`
//! or `f64`); the shipped pipeline runs on the [`Real`] (= `f64`)
//! aliases below.

pub mod cli;
pub mod dataio;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod models;
pub mod numkit;

pub use error::{Error, Result};
pub use numkit::{DenseMatrix, Scalar, SparseMatrix};

/// Scalar type used by the end-to-end pipeline.
pub type Real = f64;

/// Dense matrix over [`Real`].
pub type Dense = DenseMatrix<Real>;

/// Sparse matrix over [`Real`].
pub type Sparse = SparseMatrix<Real>;
