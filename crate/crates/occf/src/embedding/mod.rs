//! Noise-contrastive item embeddings.
//!
//! Observed interactions are replaced by the closed-form optimum of a
//! contrastive objective whose noise distribution is item popularity:
//! an observed `(user, item)` entry becomes
//! `max(ln(total) - beta * ln(count_item), 0)` and everything else
//! stays zero. Factorizing the resulting "depopularized" matrix with a
//! randomized truncated SVD and scaling both factor sides by
//! `sqrt(sigma)` yields the user/item embeddings downstream models
//! project through.

mod svd;

pub use svd::{randomized_truncated_svd, TruncatedFactorization};

use crate::error::{Error, Result};
use crate::numkit::{DenseMatrix, Scalar, SparseMatrix};

/// Per-item interaction counts and the popularity distribution they
/// induce. Always computed from the training matrix only.
#[derive(Debug, Clone)]
pub struct PopularityProfile<F> {
    item_counts: Vec<usize>,
    total: usize,
    probabilities: Vec<F>,
}

impl<F: Scalar> PopularityProfile<F> {
    pub fn item_counts(&self) -> &[usize] {
        &self.item_counts
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn probabilities(&self) -> &[F] {
        &self.probabilities
    }

    pub fn probability(&self, item: usize) -> F {
        self.probabilities[item]
    }
}

/// Counts observed interactions per item and normalizes to a
/// probability distribution.
pub fn item_popularity<F: Scalar>(r: &SparseMatrix<F>) -> Result<PopularityProfile<F>> {
    if r.nnz() == 0 {
        return Err(Error::EmptyMatrix);
    }
    let item_counts = r.col_counts();
    let total = r.nnz();
    let total_f = F::from_usize(total);
    let probabilities = item_counts
        .iter()
        .map(|&c| F::from_usize(c) / total_f)
        .collect();
    Ok(PopularityProfile {
        item_counts,
        total,
        probabilities,
    })
}

/// Rewrites every observed entry of `r` with the contrastive optimum
/// `max(ln(total) - beta * ln(count_item), 0)`.
///
/// Entries clamped to zero are dropped from the sparsity pattern: they
/// are indistinguishable from unobserved entries downstream, and
/// dropping them keeps the factorization sparse. The output can
/// legitimately be empty (a single item holding every interaction maps
/// to all zeros).
pub fn nce_transform<F: Scalar>(r: &SparseMatrix<F>, beta: F) -> Result<SparseMatrix<F>> {
    if !(beta > F::zero()) {
        return Err(Error::InvalidHyperparameter(format!(
            "beta must be positive, got {beta}"
        )));
    }
    if r.nnz() == 0 {
        return Err(Error::EmptyMatrix);
    }

    let ln_total = F::from_usize(r.nnz()).ln();
    // One value per item; every observed entry of an item shares it.
    let item_values: Vec<F> = r
        .col_counts()
        .iter()
        .map(|&c| {
            if c == 0 {
                F::zero()
            } else {
                (ln_total - beta * F::from_usize(c).ln()).max(F::zero())
            }
        })
        .collect();

    let mut row_ptr = Vec::with_capacity(r.rows() + 1);
    row_ptr.push(0usize);
    let mut col_idx = Vec::new();
    let mut values = Vec::new();
    for i in 0..r.rows() {
        let (cols, _) = r.row(i);
        for &j in cols {
            let v = item_values[j];
            if v > F::zero() {
                col_idx.push(j);
                values.push(v);
            }
        }
        row_ptr.push(col_idx.len());
    }
    Ok(SparseMatrix::from_csr_unchecked(
        r.rows(),
        r.cols(),
        row_ptr,
        col_idx,
        values,
    ))
}

/// Derivative of the per-entry contrastive objective at dot product
/// `d`: `sigmoid(-d) - p * sigmoid(d)`. Zero exactly at the value
/// `nce_transform` assigns (for beta = 1), which tests verify.
pub fn nce_gradient<F: Scalar>(d: F, popularity_prob: F) -> F {
    sigmoid(-d) - popularity_prob * sigmoid(d)
}

/// Numerically stable logistic function.
pub fn sigmoid<F: Scalar>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

/// User and item embeddings scaled by the square root of the singular
/// values.
#[derive(Debug, Clone)]
pub struct EmbeddingPair<F> {
    pub user: DenseMatrix<F>,
    pub item: DenseMatrix<F>,
}

/// Splits `diag(sigma)` evenly across the two factors:
/// `U* = U sqrt(diag(sigma))`, `V* = V sqrt(diag(sigma))`.
pub fn scale_embeddings<F: Scalar>(f: &TruncatedFactorization<F>) -> EmbeddingPair<F> {
    let roots: Vec<F> = f.singular_values.iter().map(|&s| s.sqrt()).collect();
    EmbeddingPair {
        user: f.u.scale_columns(&roots).expect("rank matches"),
        item: f.v.scale_columns(&roots).expect("rank matches"),
    }
}
