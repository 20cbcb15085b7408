use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-bucket metric summary, users bucketed by the 25/50/75/100%
/// quantiles of their training interaction count.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BucketReport {
    pub metric: String,
    /// Nearest-rank quantile edges `[q25, q50, q75]` of the counts.
    pub edges: Vec<usize>,
    pub buckets: Vec<BucketSummary>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BucketSummary {
    pub label: String,
    pub user_count: usize,
    pub mean: f64,
    pub std_dev: f64,
}

/// Buckets per-user metric values by training-interaction quantiles.
///
/// `train_counts[i]` and `values[i]` describe the same user. Every
/// user lands in exactly one bucket; degenerate quantiles (all counts
/// equal) put everyone in the first bucket.
pub fn user_buckets(
    train_counts: &[usize],
    values: &[f64],
    metric: &str,
) -> Result<BucketReport> {
    if train_counts.len() != values.len() {
        return Err(Error::Shape(format!(
            "{} counts vs {} values",
            train_counts.len(),
            values.len()
        )));
    }
    if train_counts.is_empty() {
        return Err(Error::InvalidInput("no users to bucket".into()));
    }

    let mut sorted = train_counts.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    let nearest_rank = |p: f64| -> usize {
        let rank = (p * n as f64).ceil() as usize;
        sorted[rank.max(1) - 1]
    };
    let edges = vec![nearest_rank(0.25), nearest_rank(0.50), nearest_rank(0.75)];

    let mut grouped: [Vec<f64>; 4] = [Vec::new(), Vec::new(), Vec::new(), Vec::new()];
    for (&count, &value) in train_counts.iter().zip(values) {
        let bucket = if count <= edges[0] {
            0
        } else if count <= edges[1] {
            1
        } else if count <= edges[2] {
            2
        } else {
            3
        };
        grouped[bucket].push(value);
    }

    let labels = [
        format!("<={}", edges[0]),
        format!("({}, {}]", edges[0], edges[1]),
        format!("({}, {}]", edges[1], edges[2]),
        format!(">{}", edges[2]),
    ];
    let buckets = grouped
        .iter()
        .zip(labels)
        .map(|(vals, label)| {
            let count = vals.len();
            let mean = if count == 0 {
                0.0
            } else {
                vals.iter().sum::<f64>() / count as f64
            };
            let std_dev = if count < 2 {
                0.0
            } else {
                let ss: f64 = vals.iter().map(|v| (v - mean) * (v - mean)).sum();
                (ss / (count - 1) as f64).sqrt()
            };
            BucketSummary {
                label,
                user_count: count,
                mean,
                std_dev,
            }
        })
        .collect();

    Ok(BucketReport {
        metric: metric.to_string(),
        edges,
        buckets,
    })
}

/// Distribution of the training popularity of each user's rank-1
/// recommendation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PopularityReport {
    pub model: String,
    pub user_count: usize,
    /// One entry per evaluated user, in user order.
    pub top1_popularity: Vec<u64>,
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

/// Looks up the training count of every user's top recommendation and
/// summarizes the distribution (linearly interpolated quantiles).
pub fn top1_popularity_distribution(
    model: &str,
    top1: &[(usize, usize)],
    item_counts: &[usize],
) -> Result<PopularityReport> {
    if top1.is_empty() {
        return Err(Error::InvalidInput("no recommendations to analyze".into()));
    }
    let pops: Vec<u64> = top1
        .iter()
        .map(|&(_, item)| {
            item_counts
                .get(item)
                .map(|&c| c as u64)
                .ok_or_else(|| Error::InvalidInput(format!("item {item} outside catalog")))
        })
        .collect::<Result<_>>()?;

    let mut sorted: Vec<f64> = pops.iter().map(|&c| c as f64).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let quantile = |p: f64| -> f64 {
        let h = p * (sorted.len() - 1) as f64;
        let lo = h.floor() as usize;
        let hi = (lo + 1).min(sorted.len() - 1);
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    };

    Ok(PopularityReport {
        model: model.to_string(),
        user_count: pops.len(),
        min: sorted[0],
        q25: quantile(0.25),
        median: quantile(0.5),
        q75: quantile(0.75),
        max: *sorted.last().unwrap(),
        top1_popularity: pops,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_distinct_counts_fill_four_buckets() {
        let report = user_buckets(&[1, 2, 3, 4], &[0.1, 0.2, 0.3, 0.4], "ndcg").unwrap();
        assert_eq!(report.edges, vec![1, 2, 3]);
        for (i, bucket) in report.buckets.iter().enumerate() {
            assert_eq!(bucket.user_count, 1, "bucket {i}");
        }
        assert_eq!(report.buckets[0].mean, 0.1);
        assert_eq!(report.buckets[3].mean, 0.4);
    }

    #[test]
    fn equal_counts_collapse_to_one_bucket() {
        let report = user_buckets(&[7, 7, 7], &[0.5, 0.7, 0.9], "ndcg").unwrap();
        assert_eq!(report.buckets[0].user_count, 3);
        for bucket in &report.buckets[1..] {
            assert_eq!(bucket.user_count, 0);
            assert_eq!(bucket.mean, 0.0);
        }
    }

    #[test]
    fn buckets_partition_users() {
        let counts: Vec<usize> = (0..37).map(|i| (i * 13) % 29).collect();
        let values: Vec<f64> = (0..37).map(|i| i as f64 / 37.0).collect();
        let report = user_buckets(&counts, &values, "recall@5").unwrap();
        let total: usize = report.buckets.iter().map(|b| b.user_count).sum();
        assert_eq!(total, counts.len());
    }

    #[test]
    fn misaligned_inputs_rejected() {
        assert!(user_buckets(&[1, 2], &[0.5], "ndcg").is_err());
        assert!(user_buckets(&[], &[], "ndcg").is_err());
    }

    #[test]
    fn top1_popularity_median_of_two() {
        let report =
            top1_popularity_distribution("pop", &[(0, 0), (1, 1)], &[3, 1]).unwrap();
        assert_eq!(report.top1_popularity, vec![3, 1]);
        assert_eq!(report.median, 2.0);
        assert_eq!(report.min, 1.0);
        assert_eq!(report.max, 3.0);
    }

    #[test]
    fn top1_popularity_rejects_unknown_items() {
        assert!(top1_popularity_distribution("pop", &[(0, 5)], &[1, 2]).is_err());
    }
}
