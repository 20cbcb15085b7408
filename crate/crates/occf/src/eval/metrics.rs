use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One ranking metric. NDCG depth and the precision/recall cutoffs
/// come from the run configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MetricId {
    Ndcg,
    RPrecision,
    PrecisionAt(usize),
    RecallAt(usize),
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricId::Ndcg => write!(f, "ndcg"),
            MetricId::RPrecision => write!(f, "r-precision"),
            MetricId::PrecisionAt(k) => write!(f, "precision@{k}"),
            MetricId::RecallAt(k) => write!(f, "recall@{k}"),
        }
    }
}

impl FromStr for MetricId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ndcg" => return Ok(MetricId::Ndcg),
            "r-precision" => return Ok(MetricId::RPrecision),
            _ => {}
        }
        if let Some(k) = s.strip_prefix("precision@") {
            let k = k
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad cutoff in {s:?}")))?;
            return Ok(MetricId::PrecisionAt(k));
        }
        if let Some(k) = s.strip_prefix("recall@") {
            let k = k
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad cutoff in {s:?}")))?;
            return Ok(MetricId::RecallAt(k));
        }
        Err(Error::InvalidInput(format!("unknown metric {s:?}")))
    }
}

/// Per-user ranking metrics for one ranked list against the user's
/// held-out relevant set.
///
/// Returns `None` when `relevant` is empty: such users are skipped,
/// not scored as zero. `relevant` must be sorted ascending.
///
/// Definitions (binary gains):
/// - `precision@K`: hits in the top K, divided by K;
/// - `recall@K`: hits in the top K, divided by |relevant|;
/// - `r-precision`: hits in the top R over R, R = min(|relevant|, list length);
/// - `ndcg`: DCG with discount `1/log2(rank + 1)` truncated at
///   `ndcg_depth`, normalized by the ideal DCG over
///   `min(|relevant|, ndcg_depth)` hits.
pub fn rank_metrics(
    ranked: &[usize],
    relevant: &[usize],
    ks: &[usize],
    ndcg_depth: usize,
) -> Option<Vec<(MetricId, f64)>> {
    if relevant.is_empty() {
        return None;
    }
    debug_assert!(relevant.windows(2).all(|w| w[0] < w[1]));

    let is_hit = |item: usize| relevant.binary_search(&item).is_ok();

    let mut out = Vec::with_capacity(ks.len() * 2 + 2);

    let mut dcg = 0.0_f64;
    for (pos, &item) in ranked.iter().take(ndcg_depth).enumerate() {
        if is_hit(item) {
            dcg += 1.0 / (pos as f64 + 2.0).log2();
        }
    }
    let ideal_hits = relevant.len().min(ndcg_depth);
    let mut idcg = 0.0_f64;
    for pos in 0..ideal_hits {
        idcg += 1.0 / (pos as f64 + 2.0).log2();
    }
    out.push((MetricId::Ndcg, if idcg > 0.0 { dcg / idcg } else { 0.0 }));

    let r = relevant.len().min(ranked.len());
    let r_hits = ranked.iter().take(r).filter(|&&i| is_hit(i)).count();
    let r_precision = if r > 0 { r_hits as f64 / r as f64 } else { 0.0 };
    out.push((MetricId::RPrecision, r_precision));

    for &k in ks {
        let hits = ranked.iter().take(k).filter(|&&i| is_hit(i)).count();
        out.push((MetricId::PrecisionAt(k), hits as f64 / k as f64));
    }
    for &k in ks {
        let hits = ranked.iter().take(k).filter(|&&i| is_hit(i)).count();
        out.push((MetricId::RecallAt(k), hits as f64 / relevant.len() as f64));
    }
    Some(out)
}

/// Mean and 95% confidence half-width of per-user metric values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    /// `1.96 * s / sqrt(n)` with sample standard deviation `s`.
    pub ci_half_width: f64,
    pub user_count: usize,
    /// Set when `n = 1` and the interval is meaningless.
    pub degenerate_ci: bool,
}

/// Aggregates per-user values into mean and confidence interval.
///
/// Values are summed in sorted order so the result is exactly
/// permutation-invariant.
pub fn aggregate(values: &[f64]) -> Result<MetricSummary> {
    if values.is_empty() {
        return Err(Error::InvalidInput(
            "cannot aggregate an empty value list".into(),
        ));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("metric values are finite"));
    let n = sorted.len();
    let mean = sorted.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return Ok(MetricSummary {
            mean,
            ci_half_width: 0.0,
            user_count: 1,
            degenerate_ci: true,
        });
    }
    let ss: f64 = sorted.iter().map(|v| (v - mean) * (v - mean)).sum();
    let std_dev = (ss / (n - 1) as f64).sqrt();
    Ok(MetricSummary {
        mean,
        ci_half_width: 1.96 * std_dev / (n as f64).sqrt(),
        user_count: n,
        degenerate_ci: false,
    })
}

/// Full evaluation result: one summary per metric plus the per-user
/// values (aligned with `evaluated_users`) that the bucket and
/// popularity analyses consume.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub model: String,
    pub split: String,
    pub user_count: usize,
    pub metrics: BTreeMap<String, MetricSummary>,
    pub evaluated_users: Vec<usize>,
    pub per_user: BTreeMap<String, Vec<f64>>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_ids_round_trip() {
        for id in [
            MetricId::Ndcg,
            MetricId::RPrecision,
            MetricId::PrecisionAt(5),
            MetricId::RecallAt(20),
        ] {
            assert_eq!(id.to_string().parse::<MetricId>().unwrap(), id);
        }
        assert!("dcg".parse::<MetricId>().is_err());
        assert!("precision@x".parse::<MetricId>().is_err());
    }

    #[test]
    fn hand_example_from_five_item_list() {
        // relevant {a=0, b=2}, ranking [a, x, b, y, z].
        let ranked = [0usize, 7, 2, 8, 9];
        let relevant = [0usize, 2];
        let got = rank_metrics(&ranked, &relevant, &[5], 5).unwrap();
        let lookup = |id: MetricId| -> f64 {
            got.iter().find(|&&(m, _)| m == id).unwrap().1
        };
        assert_eq!(lookup(MetricId::PrecisionAt(5)), 0.4);
        assert_eq!(lookup(MetricId::RecallAt(5)), 1.0);
        assert_eq!(lookup(MetricId::RPrecision), 0.5);
        let want_ndcg = (1.0 + 1.0 / 4.0_f64.log2()) / (1.0 + 1.0 / 3.0_f64.log2());
        assert!((lookup(MetricId::Ndcg) - want_ndcg).abs() < 1e-12);
        assert!((lookup(MetricId::Ndcg) - 0.9197).abs() < 1e-4);
    }

    #[test]
    fn perfect_ranking_scores_one() {
        let ranked = [3usize, 1, 4];
        let relevant = [1usize, 3, 4];
        let got = rank_metrics(&ranked, &relevant, &[3], 10).unwrap();
        for (id, v) in got {
            match id {
                MetricId::Ndcg | MetricId::RPrecision => assert_eq!(v, 1.0, "{id}"),
                MetricId::PrecisionAt(_) | MetricId::RecallAt(_) => assert_eq!(v, 1.0, "{id}"),
            }
        }
    }

    #[test]
    fn no_hits_scores_zero() {
        let got = rank_metrics(&[5, 6, 7], &[0, 1], &[3], 10).unwrap();
        for (_, v) in got {
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn empty_relevant_set_skips_user() {
        assert!(rank_metrics(&[1, 2], &[], &[2], 10).is_none());
    }

    #[test]
    fn aggregate_zero_variance() {
        let s = aggregate(&[0.5, 0.5, 0.5]).unwrap();
        assert_eq!(s.mean, 0.5);
        assert_eq!(s.ci_half_width, 0.0);
        assert_eq!(s.user_count, 3);
        assert!(!s.degenerate_ci);
    }

    #[test]
    fn aggregate_two_point_interval() {
        let s = aggregate(&[0.0, 1.0]).unwrap();
        assert_eq!(s.mean, 0.5);
        assert!((s.ci_half_width - 0.98).abs() < 1e-10);
    }

    #[test]
    fn aggregate_single_user_is_degenerate() {
        let s = aggregate(&[0.25]).unwrap();
        assert_eq!(s.mean, 0.25);
        assert_eq!(s.ci_half_width, 0.0);
        assert!(s.degenerate_ci);
    }

    #[test]
    fn aggregate_rejects_empty() {
        assert!(aggregate(&[]).is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn metrics_stay_in_unit_interval(
                seed in 0u64..400,
                n_items in 2usize..40,
                depth in 1usize..30,
            ) {
                use rand::{seq::SliceRandom, Rng, SeedableRng};
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                let mut ranked: Vec<usize> = (0..n_items).collect();
                ranked.shuffle(&mut rng);
                let relevant: Vec<usize> =
                    (0..n_items).filter(|_| rng.gen_bool(0.3)).collect();
                prop_assume!(!relevant.is_empty());
                let ks = vec![1, 3, 7];
                let got = rank_metrics(&ranked, &relevant, &ks, depth).unwrap();
                for (id, v) in got {
                    prop_assert!((0.0..=1.0).contains(&v), "{} = {}", id, v);
                }
            }

            #[test]
            fn recall_monotone_and_hits_nondecreasing(
                seed in 0u64..400,
                n_items in 2usize..40,
            ) {
                use rand::{seq::SliceRandom, Rng, SeedableRng};
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                let mut ranked: Vec<usize> = (0..n_items).collect();
                ranked.shuffle(&mut rng);
                let relevant: Vec<usize> =
                    (0..n_items).filter(|_| rng.gen_bool(0.4)).collect();
                prop_assume!(!relevant.is_empty());
                let ks: Vec<usize> = (1..=n_items).collect();
                let got = rank_metrics(&ranked, &relevant, &ks, 10).unwrap();
                let recalls: Vec<f64> = got
                    .iter()
                    .filter_map(|&(id, v)| match id {
                        MetricId::RecallAt(_) => Some(v),
                        _ => None,
                    })
                    .collect();
                for w in recalls.windows(2) {
                    prop_assert!(w[1] >= w[0] - 1e-15);
                }
                // precision@K * K = hit count, nondecreasing in K.
                let hits: Vec<f64> = got
                    .iter()
                    .filter_map(|&(id, v)| match id {
                        MetricId::PrecisionAt(k) => Some(v * k as f64),
                        _ => None,
                    })
                    .collect();
                for w in hits.windows(2) {
                    prop_assert!(w[1] >= w[0] - 1e-9);
                }
            }

            #[test]
            fn aggregate_is_permutation_invariant(
                values in proptest::collection::vec(0.0f64..1.0, 1..40),
                swap_seed in 0u64..100,
            ) {
                use rand::{seq::SliceRandom, SeedableRng};
                let mut shuffled = values.clone();
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(swap_seed);
                shuffled.shuffle(&mut rng);
                let a = aggregate(&values).unwrap();
                let b = aggregate(&shuffled).unwrap();
                prop_assert_eq!(a.mean.to_bits(), b.mean.to_bits());
                prop_assert_eq!(a.ci_half_width.to_bits(), b.ci_half_width.to_bits());
            }
        }
    }
}
