//! The in-scope recommenders: projected linear regression on
//! noise-contrastive embeddings (globally closed form and per-item
//! weighted), the vanilla projected linear recommender, plain and
//! depopularized truncated-SVD scoring, and the popularity baseline.

mod predict;
mod train;

pub use predict::{coldstart_scores, recommend_topk, score_user, RecommendationList};
pub use train::{
    item_factorization, train, train_from_factorization, train_nce_plrec,
    train_nce_plrec_weighted, train_nce_svd, train_plrec, train_pop, train_puresvd,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{DenseMatrix, Scalar};

/// Which recommender a [`TrainedModel`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "nce-plrec")]
    NcePlrec,
    #[serde(rename = "nce-plrec-w")]
    NcePlrecWeighted,
    #[serde(rename = "plrec")]
    Plrec,
    #[serde(rename = "puresvd")]
    PureSvd,
    #[serde(rename = "nce-svd")]
    NceSvd,
    #[serde(rename = "pop")]
    Pop,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::NcePlrec,
        ModelKind::NcePlrecWeighted,
        ModelKind::Plrec,
        ModelKind::PureSvd,
        ModelKind::NceSvd,
        ModelKind::Pop,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::NcePlrec => "nce-plrec",
            ModelKind::NcePlrecWeighted => "nce-plrec-w",
            ModelKind::Plrec => "plrec",
            ModelKind::PureSvd => "puresvd",
            ModelKind::NceSvd => "nce-svd",
            ModelKind::Pop => "pop",
        }
    }

    /// Regression models carry per-item weights and support cold-start
    /// scoring.
    pub fn has_weights(&self) -> bool {
        matches!(
            self,
            ModelKind::NcePlrec | ModelKind::NcePlrecWeighted | ModelKind::Plrec
        )
    }

    pub fn has_user_factor(&self) -> bool {
        matches!(self, ModelKind::PureSvd | ModelKind::NceSvd)
    }

    pub fn has_item_embedding(&self) -> bool {
        !matches!(self, ModelKind::Pop)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .iter()
            .find(|k| k.as_str() == s)
            .copied()
            .ok_or_else(|| Error::InvalidInput(format!("unknown model kind {s:?}")))
    }
}

/// Training hyperparameters shared by all models; each model reads the
/// subset that affects it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    /// Latent dimension.
    pub k: usize,
    /// Popularity sensitivity of the contrastive transform.
    pub beta: f64,
    /// Loss weighting: observed entries weigh `1 + alpha`.
    pub alpha: f64,
    /// Ridge regularization added to the Gram diagonal.
    pub lambda: f64,
    /// Power iterations of the randomized SVD.
    pub power_iterations: usize,
    /// Seed of the randomized SVD sketch.
    pub seed: u64,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            k: 100,
            beta: 1.0,
            alpha: 0.0,
            lambda: 1.0,
            power_iterations: 7,
            seed: 42,
        }
    }
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidHyperparameter("k must be >= 1".into()));
        }
        if !(self.beta > 0.0) {
            return Err(Error::InvalidHyperparameter(format!(
                "beta must be > 0, got {}",
                self.beta
            )));
        }
        if !(self.lambda > 0.0) {
            return Err(Error::InvalidHyperparameter(format!(
                "lambda must be > 0, got {}",
                self.lambda
            )));
        }
        if !(self.alpha >= -1.0) {
            return Err(Error::InvalidHyperparameter(format!(
                "alpha must be >= -1 (weights stay nonnegative), got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// A trained recommender. Which optional fields are present is
/// determined exactly by `kind`; see [`TrainedModel::check_fields`].
#[derive(Debug, Clone)]
pub struct TrainedModel<F> {
    pub kind: ModelKind,
    /// Item embedding (n x k): scaled `V*` for the contrastive models,
    /// unscaled `V` for the plain projected recommender and PureSVD.
    pub item_embedding: Option<DenseMatrix<F>>,
    /// Per-item regression weights `W` (n x k), rows are items.
    pub weights: Option<DenseMatrix<F>>,
    /// Per-user factor (m x k) for the direct SVD scorers.
    pub user_factor: Option<DenseMatrix<F>>,
    /// Per-item training interaction counts; the popularity baseline
    /// scores with these and every model tie-breaks with them.
    pub pop_counts: Vec<u64>,
    pub hyper: Hyperparameters,
    /// External item ids by internal index, when known.
    pub item_ids: Option<Vec<String>>,
}

impl<F: Scalar> TrainedModel<F> {
    pub fn n_items(&self) -> usize {
        self.pop_counts.len()
    }

    /// Verifies the field-presence contract and shared column counts.
    pub fn check_fields(&self) -> Result<()> {
        let kind = self.kind;
        if self.item_embedding.is_some() != kind.has_item_embedding()
            || self.weights.is_some() != kind.has_weights()
            || self.user_factor.is_some() != kind.has_user_factor()
        {
            return Err(Error::Format(format!(
                "model fields inconsistent with kind {kind}"
            )));
        }
        if let (Some(v), Some(w)) = (&self.item_embedding, &self.weights) {
            if v.cols() != w.cols() {
                return Err(Error::Format(format!(
                    "embedding dimension {} != weight dimension {}",
                    v.cols(),
                    w.cols()
                )));
            }
            if v.rows() != w.rows() {
                return Err(Error::Format(format!(
                    "embedding rows {} != weight rows {}",
                    v.rows(),
                    w.rows()
                )));
            }
        }
        if let Some(v) = &self.item_embedding {
            if v.rows() != self.pop_counts.len() {
                return Err(Error::Format(format!(
                    "embedding rows {} != item count {}",
                    v.rows(),
                    self.pop_counts.len()
                )));
            }
        }
        if let Some(ids) = &self.item_ids {
            if ids.len() != self.pop_counts.len() {
                return Err(Error::Format(format!(
                    "{} item ids for {} items",
                    ids.len(),
                    self.pop_counts.len()
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_kind_round_trips_through_strings() {
        for kind in ModelKind::ALL {
            assert_eq!(kind.as_str().parse::<ModelKind>().unwrap(), kind);
        }
        assert!("svd++".parse::<ModelKind>().is_err());
    }

    #[test]
    fn hyperparameter_validation() {
        let mut h = Hyperparameters::default();
        assert!(h.validate().is_ok());
        h.alpha = -1.0;
        assert!(h.validate().is_ok());
        h.alpha = -1.5;
        assert!(h.validate().is_err());
        h = Hyperparameters {
            k: 0,
            ..Default::default()
        };
        assert!(h.validate().is_err());
        h = Hyperparameters {
            lambda: 0.0,
            ..Default::default()
        };
        assert!(h.validate().is_err());
        h = Hyperparameters {
            beta: 0.0,
            ..Default::default()
        };
        assert!(h.validate().is_err());
    }
}
