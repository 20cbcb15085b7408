use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::rc::Rc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataio::{
    build_interactions, load_index_maps, load_model, load_ratings, load_sparse, save_index_maps,
    save_model, save_sparse, write_report, FormatDescriptor, IndexMaps,
};
use crate::embedding::TruncatedFactorization;
use crate::error::{Error, Result};
use crate::eval::{
    beta_sweep, chronological_split, evaluate_model, grid_search, random_split, rank_metrics,
    top1_items, top1_popularity_distribution, user_buckets, BucketReport, EvalConfig, EvalSplit,
    GridReport, MetricId, MetricsReport, PopularityReport, SplitMode,
};
use crate::models::{
    coldstart_scores, item_factorization, recommend_topk, train, train_from_factorization,
    train_pop, Hyperparameters, ModelKind, TrainedModel,
};
use crate::{Real, Sparse};

use super::{
    load_config, parse_columns, parse_delimiter, parse_ks, ColdstartArgs, EvaluateArgs,
    GridSearchArgs, PrepareArgs, ReportPopularityArgs, TrainArgs,
};

#[derive(Debug, Clone, Serialize)]
pub struct PrepareSummary {
    pub users: usize,
    pub items: usize,
    pub interactions: usize,
    pub nnz_train: usize,
    pub nnz_valid: usize,
    pub nnz_test: usize,
    pub theta: f64,
    pub split: String,
    pub seed: u64,
    pub dropped_unseen: usize,
    pub duplicates_collapsed: usize,
}

/// Parses, binarizes, splits, and persists `train.spm`, `valid.spm`,
/// `test.spm`, the id maps, and a `prepare.json` summary.
pub fn cmd_prepare(args: &PrepareArgs) -> Result<PrepareSummary> {
    let cfg = load_config(args.config.as_ref())?;

    let mut fmt = FormatDescriptor::default();
    if let Some(d) = args.delimiter.as_deref().or(cfg.delimiter.as_deref()) {
        fmt.delimiter = parse_delimiter(d)?;
    }
    if let Some(h) = args.header.or(cfg.header) {
        fmt.has_header = h;
    }
    if let Some(c) = args.columns.as_deref().or(cfg.columns.as_deref()) {
        let (u, i, r, t) = parse_columns(c)?;
        fmt.user_col = u;
        fmt.item_col = i;
        fmt.rating_col = r;
        fmt.timestamp_col = t;
    }
    let theta = args.theta.or(cfg.theta).unwrap_or(3.0);
    let mode: SplitMode = args
        .split
        .as_deref()
        .or(cfg.split.as_deref())
        .unwrap_or("chronological")
        .parse()?;
    let seed = args.seed.or(cfg.seed).unwrap_or(42);

    if mode == SplitMode::Chronological && fmt.timestamp_col.is_none() {
        return Err(Error::InvalidInput(
            "chronological split requires a timestamp column; \
             pass --columns user,item,rating,timestamp or use --split random"
                .into(),
        ));
    }

    let table = load_ratings(&args.input, &fmt)?;
    let (interactions, maps, stats) = build_interactions(&table, theta, None)?;
    let (users, items) = (maps.users.len(), maps.items.len());
    let split = match mode {
        SplitMode::Chronological => chronological_split(&interactions, users, items)?,
        SplitMode::Random => random_split(&interactions, users, items, seed)?,
    };

    std::fs::create_dir_all(&args.out_dir)?;
    save_sparse(&split.train, &args.out_dir.join("train.spm"))?;
    save_sparse(&split.valid, &args.out_dir.join("valid.spm"))?;
    save_sparse(&split.test, &args.out_dir.join("test.spm"))?;
    save_index_maps(&maps, &args.out_dir)?;

    let summary = PrepareSummary {
        users,
        items,
        interactions: interactions.len(),
        nnz_train: split.train.nnz(),
        nnz_valid: split.valid.nnz(),
        nnz_test: split.test.nnz(),
        theta,
        split: mode.to_string(),
        seed,
        dropped_unseen: stats.dropped_unseen,
        duplicates_collapsed: stats.duplicates_collapsed,
    };
    write_report(&summary, Some(&args.out_dir.join("prepare.json")))?;
    Ok(summary)
}

fn load_split_dir(dir: &Path) -> Result<(EvalSplit, Option<IndexMaps>)> {
    let split = EvalSplit {
        train: load_sparse(&dir.join("train.spm"))?,
        valid: load_sparse(&dir.join("valid.spm"))?,
        test: load_sparse(&dir.join("test.spm"))?,
        mode: SplitMode::Chronological,
    };
    let maps = if dir.join("users.txt").exists() && dir.join("items.txt").exists() {
        Some(load_index_maps(dir)?)
    } else {
        None
    };
    Ok((split, maps))
}

/// Trains the requested kind on `train.spm` and writes the model file.
/// The reported seconds cover training only, not IO.
pub fn cmd_train(args: &TrainArgs) -> Result<f64> {
    let cfg = load_config(args.config.as_ref())?;
    let kind: ModelKind = args.model.parse()?;
    let hyper = args.hyper.resolve(&cfg);
    hyper.validate()?;

    let train_matrix = load_sparse(&args.data_dir.join("train.spm"))?;
    let maps = if args.data_dir.join("items.txt").exists() {
        Some(load_index_maps(&args.data_dir)?)
    } else {
        None
    };

    let started = Instant::now();
    let mut model = train(kind, &train_matrix, &hyper)?;
    let seconds = started.elapsed().as_secs_f64();

    if let Some(maps) = maps {
        model.item_ids = Some(maps.items.ids().to_vec());
    }
    save_model(&model, &args.out)?;
    println!("training_seconds={seconds:.6}");
    Ok(seconds)
}

/// Metrics report plus optional per-bucket breakdown.
#[derive(Debug, Clone, Serialize)]
pub struct EvaluationDocument {
    pub report: MetricsReport,
    pub buckets: Option<Vec<BucketReport>>,
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<EvaluationDocument> {
    let cfg = load_config(args.config.as_ref())?;
    let eval_cfg = resolve_eval_config(args.ks.as_deref(), args.ndcg_depth, &cfg)?;
    let (split, _) = load_split_dir(&args.data_dir)?;
    let target = match args.split.as_str() {
        "valid" => &split.valid,
        "test" => &split.test,
        other => {
            return Err(Error::InvalidInput(format!(
                "unknown evaluation split {other:?} (want valid or test)"
            )))
        }
    };
    let model = load_model(&args.model_file)?;
    let report = evaluate_model(&model, &split.train, target, &args.split, &eval_cfg)?;

    let buckets = if args.buckets {
        let counts: Vec<usize> = report
            .evaluated_users
            .iter()
            .map(|&u| split.train.row_nnz(u))
            .collect();
        let mut reports = Vec::new();
        for (metric, values) in &report.per_user {
            reports.push(user_buckets(&counts, values, metric)?);
        }
        Some(reports)
    } else {
        None
    };

    let doc = EvaluationDocument { report, buckets };
    write_report(&doc, args.out.as_deref())?;
    Ok(doc)
}

fn resolve_eval_config(
    ks: Option<&str>,
    ndcg_depth: Option<usize>,
    cfg: &super::ConfigFile,
) -> Result<EvalConfig> {
    let default = EvalConfig::default();
    let ks = match ks {
        Some(s) => parse_ks(s)?,
        None => cfg.ks.clone().unwrap_or(default.ks),
    };
    Ok(EvalConfig {
        ks,
        ndcg_depth: ndcg_depth.or(cfg.ndcg_depth).unwrap_or(default.ndcg_depth),
    })
}

/// JSON grid file: one array of candidate values per hyperparameter.
/// Missing arrays fall back to the single default value.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridFile {
    #[serde(default)]
    k: Vec<usize>,
    #[serde(default)]
    alpha: Vec<f64>,
    #[serde(default)]
    beta: Vec<f64>,
    #[serde(default)]
    lambda: Vec<f64>,
    power_iterations: Option<usize>,
    seed: Option<u64>,
}

impl GridFile {
    fn expand(&self) -> Vec<Hyperparameters> {
        let d = Hyperparameters::default();
        let ks = if self.k.is_empty() { vec![d.k] } else { self.k.clone() };
        let alphas = if self.alpha.is_empty() { vec![d.alpha] } else { self.alpha.clone() };
        let betas = if self.beta.is_empty() { vec![d.beta] } else { self.beta.clone() };
        let lambdas = if self.lambda.is_empty() { vec![d.lambda] } else { self.lambda.clone() };
        let power_iterations = self.power_iterations.unwrap_or(d.power_iterations);
        let seed = self.seed.unwrap_or(d.seed);

        // Lambda innermost: points sharing an embedding sit together,
        // so the factorization cache stays a single slot.
        let mut grid = Vec::new();
        for &k in &ks {
            for &beta in &betas {
                for &alpha in &alphas {
                    for &lambda in &lambdas {
                        grid.push(Hyperparameters {
                            k,
                            beta,
                            alpha,
                            lambda,
                            power_iterations,
                            seed,
                        });
                    }
                }
            }
        }
        grid
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GridSearchDocument {
    pub report: GridReport,
    /// `(beta, score)` pairs across the winning `k`/`alpha`/`lambda`.
    pub beta_sweep: Vec<(f64, f64)>,
}

/// Trains and scores every grid point on the validation split.
/// Consecutive points that share an embedding reuse one factorization.
pub fn cmd_grid_search(args: &GridSearchArgs) -> Result<GridSearchDocument> {
    let cfg = load_config(args.config.as_ref())?;
    let kind: ModelKind = args.model.parse()?;
    let metric: MetricId = args.metric.parse()?;
    let mut eval_cfg = resolve_eval_config(args.ks.as_deref(), args.ndcg_depth, &cfg)?;
    if let MetricId::PrecisionAt(k) | MetricId::RecallAt(k) = metric {
        if !eval_cfg.ks.contains(&k) {
            eval_cfg.ks.push(k);
        }
    }

    let grid_file: GridFile = {
        let file = File::open(&args.grid)?;
        serde_json::from_reader(BufReader::new(file))?
    };
    let grid = grid_file.expand();
    let (split, _) = load_split_dir(&args.data_dir)?;

    let metric_name = metric.to_string();
    let mut cache = FactorizationCache::default();
    let report = grid_search(kind.as_str(), &metric_name, &grid, |hyper| {
        let model = cache.train(kind, &split.train, hyper)?;
        let report = evaluate_model(&model, &split.train, &split.valid, "valid", &eval_cfg)?;
        Ok(report.metrics[&metric_name].mean)
    })?;

    let doc = GridSearchDocument {
        beta_sweep: beta_sweep(&report),
        report,
    };
    if let Some(out) = &args.out {
        write_report(&doc.report.best, Some(out))?;
    }
    write_report(&doc, args.report.as_deref())?;
    Ok(doc)
}

/// Single-slot cache for the factorization stage: hyperparameter
/// sweeps vary `lambda` (and `alpha`) fastest, and those do not touch
/// the embedding.
#[derive(Default)]
struct FactorizationCache {
    slot: Option<(CacheKey, Rc<TruncatedFactorization<Real>>)>,
}

#[derive(PartialEq, Eq, Clone, Copy)]
struct CacheKey {
    k: usize,
    beta_bits: u64,
    power_iterations: usize,
    seed: u64,
}

impl FactorizationCache {
    fn train(
        &mut self,
        kind: ModelKind,
        r: &Sparse,
        hyper: &Hyperparameters,
    ) -> Result<TrainedModel<Real>> {
        if kind == ModelKind::Pop {
            return train_pop(r);
        }
        hyper.validate()?;
        let key = CacheKey {
            k: hyper.k,
            // The raw-SVD family ignores beta.
            beta_bits: if kind.has_item_embedding() && uses_contrastive(kind) {
                hyper.beta.to_bits()
            } else {
                0
            },
            power_iterations: hyper.power_iterations,
            seed: hyper.seed,
        };
        let fact = match &self.slot {
            Some((cached_key, fact)) if *cached_key == key => Rc::clone(fact),
            _ => {
                let fact = Rc::new(item_factorization(kind, r, hyper)?);
                self.slot = Some((key, Rc::clone(&fact)));
                fact
            }
        };
        train_from_factorization(kind, r, hyper, &fact)
    }
}

fn uses_contrastive(kind: ModelKind) -> bool {
    matches!(
        kind,
        ModelKind::NcePlrec | ModelKind::NcePlrecWeighted | ModelKind::NceSvd
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct ColdstartRow {
    pub user_index: usize,
    pub user_id: Option<String>,
    pub recall_a: f64,
    pub recall_b: f64,
    pub diff: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ColdstartReport {
    pub model_a: String,
    pub model_b: String,
    pub recall_k: usize,
    pub seed: u64,
    pub held_out: usize,
    pub evaluated: usize,
    pub mean_recall_a: f64,
    pub mean_recall_b: f64,
    /// Mean of `recall_a - recall_b`; positive favors model A.
    pub mean_diff: f64,
    pub per_user: Vec<ColdstartRow>,
}

/// Removes a fraction of users from training, retrains both models on
/// the remainder, and scores the held-out users from their raw train
/// rows against their test items.
pub fn cmd_coldstart(args: &ColdstartArgs) -> Result<ColdstartReport> {
    let cfg = load_config(args.config.as_ref())?;
    let kind_a: ModelKind = args.model_a.parse()?;
    let kind_b: ModelKind = args.model_b.parse()?;
    for kind in [kind_a, kind_b] {
        if !kind.has_weights() {
            return Err(Error::Unsupported(format!(
                "cold-start unsupported for model kind {kind}"
            )));
        }
    }
    let hyper = args.hyper.resolve(&cfg);
    hyper.validate()?;
    if !(args.holdout_fraction > 0.0 && args.holdout_fraction < 1.0)
        && args.holdout_users.is_none()
    {
        return Err(Error::InvalidInput(format!(
            "holdout fraction must be in (0, 1), got {}",
            args.holdout_fraction
        )));
    }

    let (split, maps) = load_split_dir(&args.data_dir)?;
    let train_matrix = &split.train;
    let eligible: Vec<usize> = (0..train_matrix.rows())
        .filter(|&u| train_matrix.row_nnz(u) > 0)
        .collect();

    let held_out: Vec<usize> = match &args.holdout_users {
        Some(path) => {
            let maps = maps.as_ref().ok_or_else(|| {
                Error::InvalidInput("holdout user file needs users.txt in the data dir".into())
            })?;
            let file = File::open(path)?;
            let mut users = Vec::new();
            for line in BufReader::new(file).lines() {
                let id = line?;
                let id = id.trim();
                if id.is_empty() {
                    continue;
                }
                let idx = maps.users.get(id).ok_or_else(|| {
                    Error::InvalidInput(format!("unknown user id {id:?} in holdout file"))
                })?;
                users.push(idx);
            }
            users.sort_unstable();
            users.dedup();
            users
        }
        None => {
            let mut shuffled = eligible.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
            shuffled.shuffle(&mut rng);
            let take = ((eligible.len() as f64 * args.holdout_fraction).round() as usize)
                .clamp(1, eligible.len().saturating_sub(1));
            let mut held: Vec<usize> = shuffled.into_iter().take(take).collect();
            held.sort_unstable();
            held
        }
    };
    let held_set: HashSet<usize> = held_out.iter().copied().collect();

    // Retained training matrix: drop held-out rows, reindex densely.
    let mut triplets = Vec::with_capacity(train_matrix.nnz());
    let mut next_row = 0usize;
    for u in 0..train_matrix.rows() {
        if held_set.contains(&u) {
            continue;
        }
        let (cols, vals) = train_matrix.row(u);
        for (&j, &v) in cols.iter().zip(vals) {
            triplets.push((next_row, j, v));
        }
        next_row += 1;
    }
    let retained = Sparse::from_triplets(next_row, train_matrix.cols(), &triplets)?;

    let model_a = train(kind_a, &retained, &hyper)?;
    let model_b = train(kind_b, &retained, &hyper)?;

    let mut rows = Vec::new();
    for &u in &held_out {
        let targets = split.test.row(u).0;
        if targets.is_empty() {
            continue;
        }
        let (cols, vals) = train_matrix.row(u);
        let input: Vec<(usize, Real)> = cols.iter().copied().zip(vals.iter().copied()).collect();
        let recall = |model: &TrainedModel<Real>| -> Result<f64> {
            let scores = coldstart_scores(model, &input)?;
            let rec = recommend_topk(u, &scores, args.recall_k, cols, &model.pop_counts);
            let ranked: Vec<usize> = rec.items.iter().map(|&(j, _)| j).collect();
            let metrics = rank_metrics(&ranked, targets, &[args.recall_k], args.recall_k)
                .expect("targets nonempty");
            Ok(metrics
                .iter()
                .find(|(id, _)| matches!(id, MetricId::RecallAt(_)))
                .expect("recall metric present")
                .1)
        };
        let recall_a = recall(&model_a)?;
        let recall_b = recall(&model_b)?;
        rows.push(ColdstartRow {
            user_index: u,
            user_id: maps.as_ref().map(|m| m.users.id(u).to_string()),
            recall_a,
            recall_b,
            diff: recall_a - recall_b,
        });
    }
    if rows.is_empty() {
        return Err(Error::InvalidInput(
            "no held-out user has test items to evaluate".into(),
        ));
    }

    let n = rows.len() as f64;
    let report = ColdstartReport {
        model_a: kind_a.to_string(),
        model_b: kind_b.to_string(),
        recall_k: args.recall_k,
        seed: hyper.seed,
        held_out: held_out.len(),
        evaluated: rows.len(),
        mean_recall_a: rows.iter().map(|r| r.recall_a).sum::<f64>() / n,
        mean_recall_b: rows.iter().map(|r| r.recall_b).sum::<f64>() / n,
        mean_diff: rows.iter().map(|r| r.diff).sum::<f64>() / n,
        per_user: rows,
    };
    write_report(&report, args.out.as_deref())?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct PopularityDocument {
    pub exclude_train: bool,
    pub models: Vec<PopularityReport>,
}

/// Per-model distribution of the training popularity of each user's
/// rank-1 item. Training items are not excluded by default, so the
/// number describes what each scorer favors.
pub fn cmd_report_popularity(args: &ReportPopularityArgs) -> Result<PopularityDocument> {
    let cfg = load_config(args.config.as_ref())?;
    let (split, _) = load_split_dir(&args.data_dir)?;
    let item_counts = split.train.col_counts();

    let mut models: Vec<TrainedModel<Real>> = Vec::new();
    if let Some(files) = &args.model_files {
        for path in files.split(',').filter(|s| !s.is_empty()) {
            models.push(load_model(Path::new(path.trim()))?);
        }
    }
    if let Some(kinds) = &args.models {
        let hyper = args.hyper.resolve(&cfg);
        hyper.validate()?;
        for name in kinds.split(',').filter(|s| !s.is_empty()) {
            let kind: ModelKind = name.trim().parse()?;
            models.push(train(kind, &split.train, &hyper)?);
        }
    }
    if models.is_empty() {
        return Err(Error::InvalidInput(
            "pass --models and/or --model-files".into(),
        ));
    }

    let mut reports = Vec::new();
    for model in &models {
        let top1 = top1_items(model, &split.train, args.exclude_train)?;
        reports.push(top1_popularity_distribution(
            model.kind.as_str(),
            &top1,
            &item_counts,
        )?);
    }
    let doc = PopularityDocument {
        exclude_train: args.exclude_train,
        models: reports,
    };
    write_report(&doc, args.out.as_deref())?;
    Ok(doc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cached_training_matches_direct_training_bitwise() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut triplets = Vec::new();
        for u in 0..25 {
            for i in 0..15 {
                if rng.gen_bool(0.3) {
                    triplets.push((u, i, 1.0));
                }
            }
        }
        let r = Sparse::from_triplets(25, 15, &triplets).unwrap();
        let mut cache = FactorizationCache::default();
        for kind in ModelKind::ALL {
            for lambda in [0.1, 1.0] {
                let hyper = Hyperparameters {
                    k: 4,
                    lambda,
                    ..Default::default()
                };
                let direct = train(kind, &r, &hyper).unwrap();
                let cached = cache.train(kind, &r, &hyper).unwrap();
                let bits = |m: &Option<crate::Dense>| -> Vec<u64> {
                    m.as_ref()
                        .map(|m| m.as_slice().iter().map(|v| v.to_bits()).collect())
                        .unwrap_or_default()
                };
                assert_eq!(bits(&direct.weights), bits(&cached.weights), "{kind}");
                assert_eq!(
                    bits(&direct.item_embedding),
                    bits(&cached.item_embedding),
                    "{kind}"
                );
                assert_eq!(
                    bits(&direct.user_factor),
                    bits(&cached.user_factor),
                    "{kind}"
                );
            }
        }
    }

    #[test]
    fn grid_file_expansion_order_and_defaults() {
        let grid: GridFile = serde_json::from_str(
            r#"{ "k": [2, 4], "beta": [0.8, 1.2], "lambda": [0.1, 1.0] }"#,
        )
        .unwrap();
        let points = grid.expand();
        assert_eq!(points.len(), 8);
        // Lambda varies fastest, then beta, then k; alpha defaulted.
        assert_eq!(points[0].k, 2);
        assert_eq!((points[0].beta, points[0].lambda), (0.8, 0.1));
        assert_eq!((points[1].beta, points[1].lambda), (0.8, 1.0));
        assert_eq!((points[2].beta, points[2].lambda), (1.2, 0.1));
        assert_eq!(points[4].k, 4);
        assert!(points.iter().all(|p| p.alpha == 0.0));
    }
}
