use rayon::prelude::*;

use crate::embedding::{
    nce_transform, randomized_truncated_svd, scale_embeddings, TruncatedFactorization,
};
use crate::error::{Error, Result};
use crate::numkit::{
    cholesky, cholesky_solve_vec, gram, sparse_dense_matmul, sparse_transpose_dense_matmul,
    spd_solve, DenseMatrix, Scalar, SparseMatrix,
};

use super::{Hyperparameters, ModelKind, TrainedModel};

/// Trains the requested model kind.
pub fn train<F: Scalar>(
    kind: ModelKind,
    r: &SparseMatrix<F>,
    hyper: &Hyperparameters,
) -> Result<TrainedModel<F>> {
    if kind == ModelKind::Pop {
        return train_pop(r);
    }
    let fact = item_factorization(kind, r, hyper)?;
    train_from_factorization(kind, r, hyper, &fact)
}

fn check_input<F: Scalar>(r: &SparseMatrix<F>, hyper: &Hyperparameters) -> Result<()> {
    hyper.validate()?;
    if r.nnz() == 0 {
        return Err(Error::EmptyMatrix);
    }
    Ok(())
}

fn pop_counts<F: Scalar>(r: &SparseMatrix<F>) -> Vec<u64> {
    r.col_counts().iter().map(|&c| c as u64).collect()
}

/// The factorization stage a model kind builds on: the raw matrix for
/// the plain projected recommender and PureSVD, the contrastive
/// transform for the depopularized family.
///
/// Split out from training so a hyperparameter sweep can reuse one
/// factorization across every regularization value.
pub fn item_factorization<F: Scalar>(
    kind: ModelKind,
    r: &SparseMatrix<F>,
    hyper: &Hyperparameters,
) -> Result<TruncatedFactorization<F>> {
    check_input(r, hyper)?;
    match kind {
        ModelKind::NcePlrec | ModelKind::NcePlrecWeighted | ModelKind::NceSvd => {
            let d = nce_transform(r, F::from_f64(hyper.beta))?;
            randomized_truncated_svd(&d, hyper.k, hyper.power_iterations, hyper.seed)
        }
        ModelKind::Plrec | ModelKind::PureSvd => {
            randomized_truncated_svd(r, hyper.k, hyper.power_iterations, hyper.seed)
        }
        ModelKind::Pop => Err(Error::Unsupported(
            "the popularity baseline has no factorization stage".into(),
        )),
    }
}

/// Assembles a model from a factorization produced by
/// [`item_factorization`] for the same kind and hyperparameters.
pub fn train_from_factorization<F: Scalar>(
    kind: ModelKind,
    r: &SparseMatrix<F>,
    hyper: &Hyperparameters,
    fact: &TruncatedFactorization<F>,
) -> Result<TrainedModel<F>> {
    check_input(r, hyper)?;
    let (item_embedding, weights, user_factor) = match kind {
        ModelKind::NcePlrec => {
            let v_star = scale_embeddings(fact).item;
            let q = sparse_dense_matmul(r, &v_star)?;
            let w = solve_global(&q, r, F::from_f64(hyper.lambda))?;
            (Some(v_star), Some(w), None)
        }
        ModelKind::NcePlrecWeighted => {
            let v_star = scale_embeddings(fact).item;
            let q = sparse_dense_matmul(r, &v_star)?;
            let w = solve_weighted(&q, r, F::from_f64(hyper.alpha), F::from_f64(hyper.lambda))?;
            (Some(v_star), Some(w), None)
        }
        ModelKind::Plrec => {
            let q = sparse_dense_matmul(r, &fact.v)?;
            let w = solve_global(&q, r, F::from_f64(hyper.lambda))?;
            (Some(fact.v.clone()), Some(w), None)
        }
        ModelKind::PureSvd => {
            let user_factor = fact.u.scale_columns(&fact.singular_values)?;
            (Some(fact.v.clone()), None, Some(user_factor))
        }
        ModelKind::NceSvd => {
            let pair = scale_embeddings(fact);
            (Some(pair.item), None, Some(pair.user))
        }
        ModelKind::Pop => {
            return Err(Error::Unsupported(
                "the popularity baseline has no factorization stage".into(),
            ))
        }
    };
    Ok(TrainedModel {
        kind,
        item_embedding,
        weights,
        user_factor,
        pop_counts: pop_counts(r),
        hyper: hyper.clone(),
        item_ids: None,
    })
}

/// Contrastive embedding followed by the globally closed-form
/// regression `W = (Q^T Q + lambda I)^{-1} Q^T R`. The `alpha` field
/// is ignored here; weighting lives in [`train_nce_plrec_weighted`].
pub fn train_nce_plrec<F: Scalar>(
    r: &SparseMatrix<F>,
    hyper: &Hyperparameters,
) -> Result<TrainedModel<F>> {
    train(ModelKind::NcePlrec, r, hyper)
}

/// Contrastive embedding followed by per-item weighted regression,
/// observed entries weighted `1 + alpha`.
pub fn train_nce_plrec_weighted<F: Scalar>(
    r: &SparseMatrix<F>,
    hyper: &Hyperparameters,
) -> Result<TrainedModel<F>> {
    train(ModelKind::NcePlrecWeighted, r, hyper)
}

/// Plain projected linear recommender: truncated SVD of the raw
/// interaction matrix, projection through the unscaled `V`, then the
/// global closed form.
pub fn train_plrec<F: Scalar>(
    r: &SparseMatrix<F>,
    hyper: &Hyperparameters,
) -> Result<TrainedModel<F>> {
    train(ModelKind::Plrec, r, hyper)
}

/// Truncated SVD of the raw matrix, scored directly as `(U Sigma) V^T`.
pub fn train_puresvd<F: Scalar>(
    r: &SparseMatrix<F>,
    hyper: &Hyperparameters,
) -> Result<TrainedModel<F>> {
    train(ModelKind::PureSvd, r, hyper)
}

/// Depopularized ablation: scores with the scaled factors of the
/// contrastive matrix, `U* V*^T`.
pub fn train_nce_svd<F: Scalar>(
    r: &SparseMatrix<F>,
    hyper: &Hyperparameters,
) -> Result<TrainedModel<F>> {
    train(ModelKind::NceSvd, r, hyper)
}

/// Popularity baseline: every user gets items ranked by training
/// interaction count.
pub fn train_pop<F: Scalar>(r: &SparseMatrix<F>) -> Result<TrainedModel<F>> {
    if r.nnz() == 0 {
        return Err(Error::EmptyMatrix);
    }
    Ok(TrainedModel {
        kind: ModelKind::Pop,
        item_embedding: None,
        weights: None,
        user_factor: None,
        pop_counts: pop_counts(r),
        hyper: Hyperparameters::default(),
        item_ids: None,
    })
}

/// `W = (Q^T Q + lambda I)^{-1} Q^T R`, returned item-major (n x k).
pub(crate) fn solve_global<F: Scalar>(
    q: &DenseMatrix<F>,
    r: &SparseMatrix<F>,
    lambda: F,
) -> Result<DenseMatrix<F>> {
    let mut g = gram(q);
    g.add_to_diagonal(lambda);
    let t = sparse_transpose_dense_matmul(r, q)?; // (Q^T R)^T, n x k
    let x = spd_solve(&g, &t.transpose())?; // k x n
    Ok(x.transpose())
}

/// Per-item weighted ridge solve.
///
/// With weights `c_i = 1 + alpha * r_{i,j}` only observed rows differ
/// from the unweighted Gram matrix, so each item applies a
/// rank-|observed| update to the shared `Q^T Q` rather than forming the
/// m x m weight matrix:
/// `Q^T C_j Q = Q^T Q + alpha * sum_i r_{i,j} q_i q_i^T`.
pub(crate) fn solve_weighted<F: Scalar>(
    q: &DenseMatrix<F>,
    r: &SparseMatrix<F>,
    alpha: F,
    lambda: F,
) -> Result<DenseMatrix<F>> {
    let k = q.cols();
    let n = r.cols();
    let g0 = gram(q);
    let t = sparse_transpose_dense_matmul(r, q)?; // rows are Q^T r_{:,j}

    let mut w = DenseMatrix::zeros(n, k);
    let results: Vec<Result<()>> = w
        .par_rows_mut()
        .enumerate()
        .map(|(j, w_row)| {
            let mut a = g0.clone();
            let mut rhs: Vec<F> = t.row(j).to_vec();
            if alpha != F::zero() {
                let (rows, vals) = r.col(j);
                for (&i, &rv) in rows.iter().zip(vals) {
                    let qi = q.row(i);
                    let scale = alpha * rv;
                    for a_idx in 0..k {
                        let s = scale * qi[a_idx];
                        for b_idx in 0..k {
                            let cur = a.get(a_idx, b_idx);
                            a.set(a_idx, b_idx, cur + s * qi[b_idx]);
                        }
                    }
                    // rhs gains alpha * r^2 * q_i on top of Q^T r.
                    let rs = scale * rv;
                    for (acc, &qv) in rhs.iter_mut().zip(qi) {
                        *acc += rs * qv;
                    }
                }
            }
            a.add_to_diagonal(lambda);
            let l = cholesky(&a)?;
            let solved = cholesky_solve_vec(&l, &rhs);
            w_row.copy_from_slice(&solved);
            Ok(())
        })
        .collect();
    for res in results {
        res?;
    }
    Ok(w)
}
