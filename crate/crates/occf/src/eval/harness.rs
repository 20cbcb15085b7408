use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::models::{recommend_topk, score_user, TrainedModel};
use crate::{Real, Sparse};

use super::metrics::{aggregate, rank_metrics, MetricId, MetricsReport};

/// Which cutoffs and NDCG depth an evaluation run reports.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub ks: Vec<usize>,
    pub ndcg_depth: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            ks: vec![5, 10, 20, 50],
            ndcg_depth: 50,
        }
    }
}

impl EvalConfig {
    fn list_length(&self) -> usize {
        self.ks
            .iter()
            .copied()
            .chain(std::iter::once(self.ndcg_depth))
            .max()
            .unwrap_or(1)
    }

    /// Metric ids in report order.
    pub fn metric_ids(&self) -> Vec<MetricId> {
        let mut ids = vec![MetricId::Ndcg, MetricId::RPrecision];
        ids.extend(self.ks.iter().map(|&k| MetricId::PrecisionAt(k)));
        ids.extend(self.ks.iter().map(|&k| MetricId::RecallAt(k)));
        ids
    }
}

/// Ranks held-out items for every evaluatable user and aggregates the
/// per-user metrics.
///
/// A user is evaluated when they have at least one training
/// interaction (otherwise they are a cold-start case) and at least one
/// item in `target`. Training items are excluded from the ranked
/// lists. Per-user work runs in parallel; results are collected in
/// user order, so output is deterministic.
pub fn evaluate_model(
    model: &TrainedModel<Real>,
    train: &Sparse,
    target: &Sparse,
    split_name: &str,
    cfg: &EvalConfig,
) -> Result<MetricsReport> {
    if train.rows() != target.rows() || train.cols() != target.cols() {
        return Err(Error::Shape(format!(
            "train is {}x{} but target is {}x{}",
            train.rows(),
            train.cols(),
            target.rows(),
            target.cols()
        )));
    }
    let users: Vec<usize> = (0..train.rows())
        .filter(|&u| train.row_nnz(u) > 0 && target.row_nnz(u) > 0)
        .collect();
    if users.is_empty() {
        return Err(Error::InvalidInput(
            "no users with both training and held-out interactions".into(),
        ));
    }

    let list_len = cfg.list_length();
    let per_user: Vec<Vec<(MetricId, f64)>> = users
        .par_iter()
        .map(|&u| -> Result<Vec<(MetricId, f64)>> {
            let scores = score_user(model, train, u)?;
            let exclude = train.row(u).0;
            let rec = recommend_topk(u, &scores, list_len, exclude, &model.pop_counts);
            let ranked: Vec<usize> = rec.items.iter().map(|&(j, _)| j).collect();
            let relevant = target.row(u).0;
            rank_metrics(&ranked, relevant, &cfg.ks, cfg.ndcg_depth)
                .ok_or_else(|| Error::InvalidInput("empty relevant set slipped through".into()))
        })
        .collect::<Result<_>>()?;

    let metric_ids = cfg.metric_ids();
    let mut per_metric: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for id in &metric_ids {
        per_metric.insert(id.to_string(), Vec::with_capacity(users.len()));
    }
    for row in &per_user {
        for (id, value) in row {
            per_metric
                .get_mut(&id.to_string())
                .expect("known metric")
                .push(*value);
        }
    }

    let mut summaries = BTreeMap::new();
    for (name, values) in &per_metric {
        summaries.insert(name.clone(), aggregate(values)?);
    }

    Ok(MetricsReport {
        model: model.kind.to_string(),
        split: split_name.to_string(),
        user_count: users.len(),
        metrics: summaries,
        evaluated_users: users,
        per_user: per_metric,
    })
}

/// Each evaluatable user's rank-1 item.
///
/// With `exclude_train = false` the result describes what the scorer
/// itself favors (the popularity-distribution analysis wants this: the
/// popularity baseline then reports the maximum item count for every
/// user); with `true` it matches the recommendation lists users would
/// actually see.
pub fn top1_items(
    model: &TrainedModel<Real>,
    train: &Sparse,
    exclude_train: bool,
) -> Result<Vec<(usize, usize)>> {
    let users: Vec<usize> = (0..train.rows())
        .filter(|&u| train.row_nnz(u) > 0)
        .collect();
    users
        .par_iter()
        .map(|&u| -> Result<(usize, usize)> {
            let scores = score_user(model, train, u)?;
            let exclude: &[usize] = if exclude_train { train.row(u).0 } else { &[] };
            let rec = recommend_topk(u, &scores, 1, exclude, &model.pop_counts);
            let &(item, _) = rec
                .items
                .first()
                .ok_or_else(|| Error::InvalidInput(format!("no recommendable item for {u}")))?;
            Ok((u, item))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::train_pop;

    #[test]
    fn perfect_popularity_corpus_scores_one() {
        // Both users trained on item 2 only; the held-out item 0 is
        // exactly what the popularity baseline ranks first (count ties
        // break by index).
        let train = Sparse::from_triplets(2, 3, &[(0, 2, 1.0), (1, 2, 1.0)]).unwrap();
        let test = Sparse::from_triplets(2, 3, &[(0, 0, 1.0), (1, 0, 1.0)]).unwrap();
        let model = train_pop(&train).unwrap();
        let cfg = EvalConfig {
            ks: vec![1],
            ndcg_depth: 10,
        };
        let report = evaluate_model(&model, &train, &test, "test", &cfg).unwrap();
        assert_eq!(report.user_count, 2);
        assert_eq!(report.metrics["ndcg"].mean, 1.0);
        assert_eq!(report.metrics["precision@1"].mean, 1.0);
        assert_eq!(report.metrics["recall@1"].mean, 1.0);
        assert_eq!(report.metrics["r-precision"].mean, 1.0);
    }

    #[test]
    fn users_without_targets_are_skipped() {
        let train =
            Sparse::from_triplets(3, 3, &[(0, 0, 1.0), (1, 1, 1.0), (2, 2, 1.0)]).unwrap();
        // Only user 0 has a held-out item.
        let test = Sparse::from_triplets(3, 3, &[(0, 1, 1.0)]).unwrap();
        let model = train_pop(&train).unwrap();
        let report =
            evaluate_model(&model, &train, &test, "test", &EvalConfig::default()).unwrap();
        assert_eq!(report.user_count, 1);
        assert_eq!(report.evaluated_users, vec![0]);
        assert!(report.metrics["ndcg"].degenerate_ci);
    }

    #[test]
    fn cold_start_only_users_are_not_evaluated_warm() {
        // User 1 has no training interactions at all.
        let train = Sparse::from_triplets(2, 2, &[(0, 0, 1.0)]).unwrap();
        let test = Sparse::from_triplets(2, 2, &[(0, 1, 1.0), (1, 1, 1.0)]).unwrap();
        let model = train_pop(&train).unwrap();
        let report =
            evaluate_model(&model, &train, &test, "test", &EvalConfig::default()).unwrap();
        assert_eq!(report.evaluated_users, vec![0]);
    }

    #[test]
    fn pop_top1_without_exclusion_is_global_argmax() {
        let train = Sparse::from_triplets(
            2,
            3,
            &[(0, 0, 1.0), (0, 1, 1.0), (1, 1, 1.0)],
        )
        .unwrap();
        let model = train_pop(&train).unwrap();
        let top1 = top1_items(&model, &train, false).unwrap();
        for &(_, item) in &top1 {
            assert_eq!(item, 1, "item 1 has the max count");
        }
        // With exclusion, user 0 cannot receive item 1 again.
        let top1_ex = top1_items(&model, &train, true).unwrap();
        assert_eq!(top1_ex[0].1, 2);
        assert_eq!(top1_ex[1].1, 0);
    }
}
