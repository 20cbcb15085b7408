//! Shared test support: a deterministic ratings-corpus generator with
//! MovieLens-100K dimensions (943 users, 1682 items, ~100k events).
//!
//! The generator produces the two properties the directional
//! experiments need from real interaction data: a long-tailed item
//! popularity distribution and genuine low-rank taste structure
//! (genre-concentrated user preferences). Ratings correlate with
//! preference so binarization keeps the structure.
//!
//! Setting `OCCF_ML100K` to a real `u.data`-style file (tab-separated
//! `user item rating timestamp`) makes the scale tests use that
//! instead.

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub const SYNTH_USERS: usize = 943;
pub const SYNTH_ITEMS: usize = 1682;
const TOPICS: usize = 48;
const ZIPF_EXPONENT: f64 = 1.0;
/// Popularity exponent per phase of a user's history: interaction
/// starts mainstream and drifts toward the taste-driven tail, which a
/// chronological split pushes into the test set.
const PHASE_POP_EXPONENT: [f64; 3] = [1.2, 0.7, 0.3];

/// Renders a `user \t item \t rating \t timestamp` table.
pub fn generate_movielens_like(seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Popularity: a random permutation assigns each item a rank, and
    // weights decay like 1/(rank+1)^s.
    let mut ranks: Vec<usize> = (0..SYNTH_ITEMS).collect();
    for i in (1..ranks.len()).rev() {
        let j = rng.gen_range(0..=i);
        ranks.swap(i, j);
    }
    let pop_weight: Vec<f64> = ranks
        .iter()
        .map(|&r| 1.0 / (r as f64 + 1.0).powf(ZIPF_EXPONENT))
        .collect();
    let item_topic: Vec<usize> = (0..SYNTH_ITEMS).map(|_| rng.gen_range(0..TOPICS)).collect();
    let item_quality: Vec<f64> = (0..SYNTH_ITEMS)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * 0.35
        })
        .collect();

    let mut out = String::new();
    for user in 0..SYNTH_USERS {
        // Activity between 20 and 250 interactions, long-tailed.
        let draw: f64 = rng.gen();
        let activity = 20 + (draw * draw * 260.0) as usize;

        // A handful of preferred topics dominate this user's taste.
        let mut prefs = [0.015_f64; TOPICS];
        let mut chosen = Vec::new();
        while chosen.len() < 4 {
            let t = rng.gen_range(0..TOPICS);
            if !chosen.contains(&t) {
                chosen.push(t);
            }
        }
        prefs[chosen[0]] = 1.0;
        prefs[chosen[1]] = 0.65;
        prefs[chosen[2]] = 0.45;
        prefs[chosen[3]] = 0.3;

        let mut seen = vec![false; SYNTH_ITEMS];
        let mut picked = Vec::with_capacity(activity);
        for (phase, &gamma) in PHASE_POP_EXPONENT.iter().enumerate() {
            let quota = match phase {
                0 => activity / 2,
                1 => activity / 5,
                _ => activity - activity / 2 - activity / 5,
            };
            let weights: Vec<f64> = (0..SYNTH_ITEMS)
                .map(|j| pop_weight[j].powf(gamma) * (prefs[item_topic[j]] + 0.01))
                .collect();
            let mut cumulative = Vec::with_capacity(SYNTH_ITEMS);
            let mut acc = 0.0;
            for &w in &weights {
                acc += w;
                cumulative.push(acc);
            }
            let total = acc;
            let mut taken = 0;
            let mut attempts = 0;
            while taken < quota && attempts < quota * 60 {
                attempts += 1;
                let x = rng.gen::<f64>() * total;
                let j = cumulative.partition_point(|&c| c < x).min(SYNTH_ITEMS - 1);
                if !seen[j] {
                    seen[j] = true;
                    picked.push(j);
                    taken += 1;
                }
            }
        }

        let mut timestamp: i64 = 800_000_000 + rng.gen_range(0..50_000_000);
        for &item in &picked {
            timestamp += rng.gen_range(60..90_000);
            let noise: f64 = StandardNormal.sample(&mut rng);
            let raw = 2.9
                + 1.3 * prefs[item_topic[item]]
                + item_quality[item]
                + 0.6 * noise;
            let rating = raw.round().clamp(1.0, 5.0);
            out.push_str(&format!("{}\t{}\t{}\t{}\n", user + 1, item + 1, rating, timestamp));
        }
    }
    out
}

/// Writes the corpus for `seed` into `dir` and returns the path, or
/// returns the real dataset path when `OCCF_ML100K` is set.
pub fn corpus_path(dir: &Path, seed: u64) -> PathBuf {
    if let Ok(real) = std::env::var("OCCF_ML100K") {
        let p = PathBuf::from(real);
        if p.exists() {
            return p;
        }
    }
    let path = dir.join(format!("ratings_{seed}.tsv"));
    if !path.exists() {
        std::fs::write(&path, generate_movielens_like(seed)).expect("write corpus");
    }
    path
}
