//! Command-line pipeline: prepare splits, train models, evaluate,
//! sweep hyperparameter grids, compare cold-start recall, and report
//! recommendation-popularity distributions.
//!
//! Option precedence everywhere: command-line flags override config
//! file values, which override built-in defaults (`alpha = 0`,
//! `beta = 1`, `lambda = 1`, `k = 100`, 7 power iterations).

mod commands;

pub use commands::{
    cmd_coldstart, cmd_evaluate, cmd_grid_search, cmd_prepare, cmd_report_popularity, cmd_train,
    ColdstartReport, ColdstartRow, EvaluationDocument, GridSearchDocument, PopularityDocument,
    PrepareSummary,
};

use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::models::Hyperparameters;

#[derive(Parser, Debug)]
#[command(
    name = "occf",
    version,
    about = "One-class collaborative filtering from implicit feedback"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Parse a ratings file, binarize, split 50/20/30 per user, and
    /// persist the split matrices plus index maps.
    Prepare(PrepareArgs),
    /// Train one model on a prepared split and write the model file.
    /// Prints `training_seconds=<secs>` on stdout.
    Train(TrainArgs),
    /// Rank held-out items with a trained model and report metrics
    /// with 95% confidence intervals.
    Evaluate(EvaluateArgs),
    /// Evaluate every point of a hyperparameter grid on the
    /// validation split and report the best.
    #[command(name = "grid-search")]
    GridSearch(GridSearchArgs),
    /// Hold out a fraction of users, retrain on the rest, and compare
    /// per-user cold-start recall between two models.
    Coldstart(ColdstartArgs),
    /// Distribution of the training popularity of each model's rank-1
    /// recommendation.
    #[command(name = "report-popularity")]
    ReportPopularity(ReportPopularityArgs),
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Prepare(args) => cmd_prepare(&args).map(|_| ()),
        Command::Train(args) => cmd_train(&args).map(|_| ()),
        Command::Evaluate(args) => cmd_evaluate(&args).map(|_| ()),
        Command::GridSearch(args) => cmd_grid_search(&args).map(|_| ()),
        Command::Coldstart(args) => cmd_coldstart(&args).map(|_| ()),
        Command::ReportPopularity(args) => cmd_report_popularity(&args).map(|_| ()),
    }
}

/// Exit status classes: 2 for configuration and input problems, 1 for
/// runtime failures.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidHyperparameter(_)
        | Error::InvalidInput(_)
        | Error::Parse { .. }
        | Error::Format(_)
        | Error::Shape(_)
        | Error::Unsupported(_)
        | Error::EmptyMatrix => 2,
        Error::NotPositiveDefinite { .. } | Error::Io(_) | Error::Json(_) => 1,
    }
}

/// Optional config file; any field a flag does not set falls back to
/// the value here, then to the built-in default.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub theta: Option<f64>,
    pub split: Option<String>,
    pub seed: Option<u64>,
    pub k: Option<usize>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub lambda: Option<f64>,
    pub power_iterations: Option<usize>,
    pub ks: Option<Vec<usize>>,
    pub ndcg_depth: Option<usize>,
    pub delimiter: Option<String>,
    pub header: Option<bool>,
    pub columns: Option<String>,
}

pub(crate) fn load_config(path: Option<&PathBuf>) -> Result<ConfigFile> {
    match path {
        None => Ok(ConfigFile::default()),
        Some(p) => {
            let file = File::open(p)?;
            Ok(serde_json::from_reader(BufReader::new(file))?)
        }
    }
}

/// Hyperparameter flags shared by every training-capable subcommand.
#[derive(Args, Debug, Clone, Default)]
pub struct HyperArgs {
    /// Latent dimension.
    #[arg(long)]
    pub k: Option<usize>,
    /// Popularity sensitivity of the contrastive transform.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Loss weighting for observed entries (must be >= -1).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Ridge regularization.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Randomized SVD power iterations.
    #[arg(long)]
    pub power_iterations: Option<usize>,
    /// Seed for every random choice in the run.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl HyperArgs {
    pub(crate) fn resolve(&self, cfg: &ConfigFile) -> Hyperparameters {
        let d = Hyperparameters::default();
        Hyperparameters {
            k: self.k.or(cfg.k).unwrap_or(d.k),
            beta: self.beta.or(cfg.beta).unwrap_or(d.beta),
            alpha: self.alpha.or(cfg.alpha).unwrap_or(d.alpha),
            lambda: self.lambda.or(cfg.lambda).unwrap_or(d.lambda),
            power_iterations: self
                .power_iterations
                .or(cfg.power_iterations)
                .unwrap_or(d.power_iterations),
            seed: self.seed.or(cfg.seed).unwrap_or(d.seed),
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct PrepareArgs {
    /// Delimited ratings file.
    #[arg(long)]
    pub input: PathBuf,
    /// Directory for the split matrices and index maps.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Field delimiter: `tab`, `comma`, `space`, or a single character.
    #[arg(long)]
    pub delimiter: Option<String>,
    /// Whether the first line is a header row.
    #[arg(long)]
    pub header: Option<bool>,
    /// Column positions as `user,item,rating[,timestamp]`.
    #[arg(long)]
    pub columns: Option<String>,
    /// Keep ratings strictly above this threshold.
    #[arg(long)]
    pub theta: Option<f64>,
    /// `chronological` or `random`.
    #[arg(long)]
    pub split: Option<String>,
    /// Seed for the random split mode.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug, Clone)]
pub struct TrainArgs {
    /// Directory produced by `prepare`.
    #[arg(long)]
    pub data_dir: PathBuf,
    /// nce-plrec | nce-plrec-w | plrec | puresvd | nce-svd | pop
    #[arg(long)]
    pub model: String,
    /// Output model file.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub hyper: HyperArgs,
}

#[derive(Args, Debug, Clone)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub data_dir: PathBuf,
    /// Trained model file.
    #[arg(long)]
    pub model_file: PathBuf,
    /// Which held-out split to rank: `valid` or `test`.
    #[arg(long, default_value = "test")]
    pub split: String,
    /// Precision/recall cutoffs, e.g. `5,10,20,50`.
    #[arg(long)]
    pub ks: Option<String>,
    #[arg(long)]
    pub ndcg_depth: Option<usize>,
    /// Also report metrics bucketed by training-interaction quantiles.
    #[arg(long)]
    pub buckets: bool,
    /// Report file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct GridSearchArgs {
    #[arg(long)]
    pub data_dir: PathBuf,
    #[arg(long)]
    pub model: String,
    /// JSON grid file with value arrays per hyperparameter.
    #[arg(long)]
    pub grid: PathBuf,
    /// Validation metric to maximize.
    #[arg(long, default_value = "ndcg")]
    pub metric: String,
    /// Where to write the winning hyperparameters.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Where to write the full grid report (includes the beta sweep).
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub ks: Option<String>,
    #[arg(long)]
    pub ndcg_depth: Option<usize>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct ColdstartArgs {
    #[arg(long)]
    pub data_dir: PathBuf,
    /// First model of the pairwise comparison.
    #[arg(long, default_value = "nce-plrec")]
    pub model_a: String,
    /// Second model of the pairwise comparison.
    #[arg(long, default_value = "plrec")]
    pub model_b: String,
    /// Fraction of training users to hold out.
    #[arg(long, default_value_t = 0.05)]
    pub holdout_fraction: f64,
    /// File of external user ids to hold out (overrides the fraction).
    #[arg(long)]
    pub holdout_users: Option<PathBuf>,
    /// Recall cutoff for the comparison.
    #[arg(long, default_value_t = 50)]
    pub recall_k: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub hyper: HyperArgs,
}

#[derive(Args, Debug, Clone)]
pub struct ReportPopularityArgs {
    #[arg(long)]
    pub data_dir: PathBuf,
    /// Comma-separated model kinds to train on the spot.
    #[arg(long)]
    pub models: Option<String>,
    /// Comma-separated trained model files to load instead.
    #[arg(long)]
    pub model_files: Option<String>,
    /// Exclude each user's training items before taking the top item.
    #[arg(long)]
    pub exclude_train: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub hyper: HyperArgs,
}

pub(crate) fn parse_delimiter(s: &str) -> Result<char> {
    match s {
        "tab" | "\\t" | "\t" => Ok('\t'),
        "comma" => Ok(','),
        "space" => Ok(' '),
        other => {
            let mut chars = other.chars();
            match (chars.next(), chars.next()) {
                (Some(c), None) => Ok(c),
                _ => Err(Error::InvalidInput(format!("bad delimiter {s:?}"))),
            }
        }
    }
}

pub(crate) fn parse_columns(s: &str) -> Result<(usize, usize, usize, Option<usize>)> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| {
            p.trim()
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad column index {p:?}")))
        })
        .collect::<Result<_>>()?;
    match parts.as_slice() {
        [u, i, r] => Ok((*u, *i, *r, None)),
        [u, i, r, t] => Ok((*u, *i, *r, Some(*t))),
        _ => Err(Error::InvalidInput(format!(
            "--columns wants 3 or 4 indices, got {s:?}"
        ))),
    }
}

pub(crate) fn parse_ks(s: &str) -> Result<Vec<usize>> {
    let ks: Vec<usize> = s
        .split(',')
        .map(|p| {
            p.trim()
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad cutoff {p:?}")))
        })
        .collect::<Result<_>>()?;
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::InvalidInput("cutoffs must be positive".into()));
    }
    Ok(ks)
}
