//! The experimental protocol: binarization, per-user 50/20/30 splits,
//! ranking metrics with confidence intervals, interaction-level
//! buckets, recommendation-popularity analysis, and grid search.

mod analysis;
mod grid;
mod harness;
mod metrics;

pub use analysis::{top1_popularity_distribution, user_buckets, BucketReport, PopularityReport};
pub use grid::{beta_sweep, grid_search, GridPoint, GridReport};
pub use harness::{evaluate_model, top1_items, EvalConfig};
pub use metrics::{aggregate, rank_metrics, MetricId, MetricSummary, MetricsReport};

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataio::RatingRow;
use crate::error::{Error, Result};
use crate::{Real, Sparse};

/// One observed user-item interaction after index mapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interaction {
    pub user: usize,
    pub item: usize,
    pub timestamp: Option<i64>,
}

/// Keeps rows whose rating is strictly above the threshold.
pub fn binarize(rows: &[RatingRow], threshold: f64) -> Vec<&RatingRow> {
    rows.iter().filter(|r| r.rating > threshold).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitMode {
    #[serde(rename = "chronological")]
    Chronological,
    #[serde(rename = "random")]
    Random,
}

impl fmt::Display for SplitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitMode::Chronological => "chronological",
            SplitMode::Random => "random",
        })
    }
}

impl FromStr for SplitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chronological" => Ok(SplitMode::Chronological),
            "random" => Ok(SplitMode::Random),
            other => Err(Error::InvalidInput(format!("unknown split mode {other:?}"))),
        }
    }
}

/// Train/validation/test matrices over one shared index space.
///
/// Entry sets are pairwise disjoint and their union is the full
/// interaction set. Users with few interactions may have empty
/// validation or test rows; they stay in the training matrix and are
/// skipped at evaluation time.
#[derive(Debug, Clone)]
pub struct EvalSplit {
    pub train: Sparse,
    pub valid: Sparse,
    pub test: Sparse,
    pub mode: SplitMode,
}

/// Sorts each user's interactions by `(timestamp, item)` and cuts the
/// first 50% into train, the next 20% into validation, and the
/// remainder into test.
pub fn chronological_split(
    interactions: &[Interaction],
    users: usize,
    items: usize,
) -> Result<EvalSplit> {
    if interactions.iter().any(|i| i.timestamp.is_none()) {
        return Err(Error::InvalidInput(
            "chronological split requires timestamps on every interaction".into(),
        ));
    }
    let mut per_user: Vec<Vec<(i64, usize)>> = vec![Vec::new(); users];
    for i in interactions {
        per_user[i.user].push((i.timestamp.unwrap(), i.item));
    }
    for list in &mut per_user {
        list.sort_unstable();
    }
    cut_per_user(per_user, users, items, SplitMode::Chronological)
}

/// Shuffles each user's interactions with the seeded generator and
/// applies the same 50/20/30 cut.
pub fn random_split(
    interactions: &[Interaction],
    users: usize,
    items: usize,
    seed: u64,
) -> Result<EvalSplit> {
    let mut per_user: Vec<Vec<usize>> = vec![Vec::new(); users];
    for i in interactions {
        per_user[i.user].push(i.item);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keyed: Vec<Vec<(i64, usize)>> = Vec::with_capacity(users);
    for list in &mut per_user {
        // Sort first so the shuffle depends only on the seed, not on
        // input order.
        list.sort_unstable();
        list.shuffle(&mut rng);
        keyed.push(
            list.iter()
                .enumerate()
                .map(|(pos, &item)| (pos as i64, item))
                .collect(),
        );
    }
    cut_per_user(keyed, users, items, SplitMode::Random)
}

fn cut_per_user(
    per_user: Vec<Vec<(i64, usize)>>,
    users: usize,
    items: usize,
    mode: SplitMode,
) -> Result<EvalSplit> {
    let mut train = Vec::new();
    let mut valid = Vec::new();
    let mut test = Vec::new();
    for (user, list) in per_user.iter().enumerate() {
        let n = list.len();
        let n_train = n * 5 / 10;
        let n_valid = n * 2 / 10;
        for (pos, &(_, item)) in list.iter().enumerate() {
            let triplet = (user, item, 1.0 as Real);
            if pos < n_train {
                train.push(triplet);
            } else if pos < n_train + n_valid {
                valid.push(triplet);
            } else {
                test.push(triplet);
            }
        }
    }
    Ok(EvalSplit {
        train: Sparse::from_triplets(users, items, &train)?,
        valid: Sparse::from_triplets(users, items, &valid)?,
        test: Sparse::from_triplets(users, items, &test)?,
        mode,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(user: &str, item: &str, rating: f64, ts: Option<i64>) -> RatingRow {
        RatingRow {
            user: user.to_string(),
            item: item.to_string(),
            rating,
            timestamp: ts,
        }
    }

    #[test]
    fn binarize_keeps_strictly_above_threshold() {
        let rows = vec![
            row("a", "x", 3.0, None),
            row("a", "y", 4.0, None),
            row("a", "z", 5.0, None),
        ];
        let kept = binarize(&rows, 3.0);
        let ratings: Vec<f64> = kept.iter().map(|r| r.rating).collect();
        assert_eq!(ratings, vec![4.0, 5.0]);
    }

    #[test]
    fn binarize_can_drop_everything() {
        let rows = vec![row("a", "x", 2.0, None), row("b", "y", 3.0, None)];
        assert!(binarize(&rows, 3.0).is_empty());
    }

    #[test]
    fn binarize_with_large_threshold() {
        let rows = vec![row("a", "x", 40.0, None), row("a", "y", 60.0, None)];
        let kept = binarize(&rows, 50.0);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].rating, 60.0);
    }

    fn interactions_for_user(user: usize, n: usize) -> Vec<Interaction> {
        (0..n)
            .map(|i| Interaction {
                user,
                item: i,
                timestamp: Some(1000 + i as i64),
            })
            .collect()
    }

    #[test]
    fn chronological_sizes_follow_floor_arithmetic() {
        for (n, want) in [(10usize, (5usize, 2usize, 3usize)), (3, (1, 0, 2)), (1, (0, 0, 1))] {
            let ints = interactions_for_user(0, n);
            let split = chronological_split(&ints, 1, n.max(1)).unwrap();
            assert_eq!(
                (split.train.nnz(), split.valid.nnz(), split.test.nnz()),
                want,
                "n = {n}"
            );
        }
    }

    #[test]
    fn chronological_orders_by_timestamp() {
        // Items with decreasing timestamps: the earliest lands in train.
        let ints = vec![
            Interaction { user: 0, item: 0, timestamp: Some(30) },
            Interaction { user: 0, item: 1, timestamp: Some(20) },
            Interaction { user: 0, item: 2, timestamp: Some(10) },
        ];
        let split = chronological_split(&ints, 1, 3).unwrap();
        assert_eq!(split.train.row(0).0, &[2]);
        assert_eq!(split.test.row(0).0, &[0, 1]);
    }

    #[test]
    fn chronological_breaks_timestamp_ties_by_item() {
        let ints = vec![
            Interaction { user: 0, item: 2, timestamp: Some(5) },
            Interaction { user: 0, item: 1, timestamp: Some(5) },
            Interaction { user: 0, item: 0, timestamp: Some(5) },
        ];
        let split = chronological_split(&ints, 1, 3).unwrap();
        assert_eq!(split.train.row(0).0, &[0]);
    }

    #[test]
    fn chronological_requires_timestamps() {
        let ints = vec![Interaction { user: 0, item: 0, timestamp: None }];
        assert!(chronological_split(&ints, 1, 1).is_err());
    }

    #[test]
    fn random_split_is_reproducible_and_sized() {
        let ints: Vec<Interaction> = (0..10)
            .map(|i| Interaction { user: 0, item: i, timestamp: None })
            .collect();
        let a = random_split(&ints, 1, 10, 99).unwrap();
        let b = random_split(&ints, 1, 10, 99).unwrap();
        assert_eq!(a.train.row(0).0, b.train.row(0).0);
        assert_eq!(a.test.row(0).0, b.test.row(0).0);
        assert_eq!(
            (a.train.nnz(), a.valid.nnz(), a.test.nnz()),
            (5, 2, 3)
        );
        let c = random_split(&ints, 1, 10, 100).unwrap();
        let same = a.train.row(0).0 == c.train.row(0).0;
        assert!(!same || a.train.nnz() == 5, "different seeds may coincide but sizes hold");
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;
        use std::collections::HashSet;

        proptest! {
            #[test]
            fn splits_partition_the_interactions(
                seed in 0u64..300,
                users in 1usize..8,
                items in 2usize..12,
                density in 0.1f64..0.9,
            ) {
                use rand::{Rng, SeedableRng};
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                let mut ints = Vec::new();
                for u in 0..users {
                    for i in 0..items {
                        if rng.gen_bool(density) {
                            ints.push(Interaction {
                                user: u,
                                item: i,
                                timestamp: Some(rng.gen_range(0..1_000)),
                            });
                        }
                    }
                }
                for split in [
                    chronological_split(&ints, users, items).unwrap(),
                    random_split(&ints, users, items, seed).unwrap(),
                ] {
                    let collect = |m: &Sparse| -> HashSet<(usize, usize)> {
                        m.iter().map(|(u, i, _)| (u, i)).collect()
                    };
                    let tr = collect(&split.train);
                    let va = collect(&split.valid);
                    let te = collect(&split.test);
                    prop_assert!(tr.is_disjoint(&va));
                    prop_assert!(tr.is_disjoint(&te));
                    prop_assert!(va.is_disjoint(&te));
                    let mut union: HashSet<(usize, usize)> = HashSet::new();
                    union.extend(&tr);
                    union.extend(&va);
                    union.extend(&te);
                    let source: HashSet<(usize, usize)> =
                        ints.iter().map(|i| (i.user, i.item)).collect();
                    prop_assert_eq!(union, source);
                }
            }

            #[test]
            fn chronological_cut_respects_time_order(
                seed in 0u64..300,
                n in 1usize..20,
            ) {
                use rand::{Rng, SeedableRng};
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                let mut ints = Vec::new();
                let mut used = HashSet::new();
                for _ in 0..n {
                    let item = rng.gen_range(0..50usize);
                    if used.insert(item) {
                        ints.push(Interaction {
                            user: 0,
                            item,
                            timestamp: Some(rng.gen_range(0..10_000)),
                        });
                    }
                }
                let split = chronological_split(&ints, 1, 50).unwrap();
                let ts_of = |item: usize| -> i64 {
                    ints.iter().find(|i| i.item == item).unwrap().timestamp.unwrap()
                };
                let max_train = split.train.row(0).0.iter().map(|&i| ts_of(i)).max();
                let min_valid = split.valid.row(0).0.iter().map(|&i| ts_of(i)).min();
                let max_valid = split.valid.row(0).0.iter().map(|&i| ts_of(i)).max();
                let min_test = split.test.row(0).0.iter().map(|&i| ts_of(i)).min();
                if let (Some(a), Some(b)) = (max_train, min_valid) {
                    prop_assert!(a <= b);
                }
                if let (Some(a), Some(b)) = (max_valid, min_test) {
                    prop_assert!(a <= b);
                }
                if let (Some(a), Some(b)) = (max_train, min_test) {
                    prop_assert!(a <= b);
                }
            }
        }
    }
}
