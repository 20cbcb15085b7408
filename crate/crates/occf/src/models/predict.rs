use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::numkit::{Scalar, SparseMatrix};

use super::{ModelKind, TrainedModel};

/// Ordered top-K recommendations for one user. Scores are
/// nonincreasing, training items are excluded, ties are broken by
/// training popularity and then by item index.
#[derive(Debug, Clone)]
pub struct RecommendationList<F> {
    pub user: usize,
    pub items: Vec<(usize, F)>,
}

/// Scores every item for a training user.
///
/// Regression models project the user's interaction row through the
/// item embedding and apply the learned weights; SVD models read their
/// stored user factor; the popularity baseline returns the counts.
pub fn score_user<F: Scalar>(
    model: &TrainedModel<F>,
    train: &SparseMatrix<F>,
    user: usize,
) -> Result<Vec<F>> {
    if user >= train.rows() {
        return Err(Error::InvalidInput(format!(
            "unknown user {user} (training matrix has {} rows)",
            train.rows()
        )));
    }
    match model.kind {
        ModelKind::NcePlrec | ModelKind::NcePlrecWeighted | ModelKind::Plrec => {
            let (cols, vals) = train.row(user);
            let row: Vec<(usize, F)> = cols.iter().copied().zip(vals.iter().copied()).collect();
            project_and_weigh(model, &row)
        }
        ModelKind::PureSvd | ModelKind::NceSvd => {
            let uf = model.user_factor.as_ref().expect("svd model");
            if user >= uf.rows() {
                return Err(Error::InvalidInput(format!(
                    "user {user} outside stored factor ({} rows)",
                    uf.rows()
                )));
            }
            let v = model.item_embedding.as_ref().expect("svd model");
            v.mat_vec(uf.row(user))
        }
        ModelKind::Pop => Ok(model
            .pop_counts
            .iter()
            .map(|&c| F::from_usize(c as usize))
            .collect()),
    }
}

/// Scores a user who was not part of training from their raw
/// interaction row: project through `V*`, then apply `W`.
///
/// Only models that carry regression weights support this.
pub fn coldstart_scores<F: Scalar>(
    model: &TrainedModel<F>,
    new_user_row: &[(usize, F)],
) -> Result<Vec<F>> {
    if !model.kind.has_weights() {
        return Err(Error::Unsupported(format!(
            "cold-start unsupported for model kind {}",
            model.kind
        )));
    }
    project_and_weigh(model, new_user_row)
}

fn project_and_weigh<F: Scalar>(
    model: &TrainedModel<F>,
    row: &[(usize, F)],
) -> Result<Vec<F>> {
    let v = model
        .item_embedding
        .as_ref()
        .ok_or_else(|| Error::Unsupported("model has no item embedding".into()))?;
    let w = model
        .weights
        .as_ref()
        .ok_or_else(|| Error::Unsupported("model has no weights".into()))?;
    let k = v.cols();
    let mut q = vec![F::zero(); k];
    for &(j, val) in row {
        if j >= v.rows() {
            return Err(Error::InvalidInput(format!(
                "item index {j} outside catalog of {}",
                v.rows()
            )));
        }
        for (acc, &vj) in q.iter_mut().zip(v.row(j)) {
            *acc += val * vj;
        }
    }
    w.mat_vec(&q)
}

/// Top-K items by score over the non-excluded catalog.
///
/// `exclude` must be sorted ascending (training rows already are).
/// Ties go to the higher training popularity, then the lower item
/// index. Fewer than K candidates yield a shorter list.
pub fn recommend_topk<F: Scalar>(
    user: usize,
    scores: &[F],
    k: usize,
    exclude: &[usize],
    pop_counts: &[u64],
) -> RecommendationList<F> {
    debug_assert_eq!(scores.len(), pop_counts.len());
    let mut candidates: Vec<usize> = (0..scores.len())
        .filter(|j| exclude.binary_search(j).is_err())
        .collect();
    candidates.sort_unstable_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(Ordering::Equal)
            .then_with(|| pop_counts[b].cmp(&pop_counts[a]))
            .then_with(|| a.cmp(&b))
    });
    candidates.truncate(k);
    RecommendationList {
        user,
        items: candidates.into_iter().map(|j| (j, scores[j])).collect(),
    }
}
