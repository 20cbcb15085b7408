use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::Hyperparameters;

/// One evaluated grid point: a validation score or the failure that
/// prevented one.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridPoint {
    pub hyper: Hyperparameters,
    pub score: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridReport {
    pub model: String,
    pub metric: String,
    pub best_index: usize,
    pub best: Hyperparameters,
    pub best_score: f64,
    /// Every point in input order, including failures.
    pub points: Vec<GridPoint>,
}

/// Evaluates `eval_fn` on every grid point and returns the argmax.
///
/// A failing point is recorded, not fatal. Ties go to the smaller
/// latent dimension, then the smaller regularizer, then input order.
pub fn grid_search<E>(
    model: &str,
    metric: &str,
    grid: &[Hyperparameters],
    mut eval_fn: E,
) -> Result<GridReport>
where
    E: FnMut(&Hyperparameters) -> Result<f64>,
{
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty hyperparameter grid".into()));
    }
    let mut points = Vec::with_capacity(grid.len());
    for hyper in grid {
        match eval_fn(hyper) {
            Ok(score) => points.push(GridPoint {
                hyper: hyper.clone(),
                score: Some(score),
                error: None,
            }),
            Err(err) => points.push(GridPoint {
                hyper: hyper.clone(),
                score: None,
                error: Some(err.to_string()),
            }),
        }
    }

    let mut best_index: Option<usize> = None;
    for (i, point) in points.iter().enumerate() {
        let Some(score) = point.score else { continue };
        let better = match best_index {
            None => true,
            Some(b) => {
                let best_score = points[b].score.unwrap();
                if score != best_score {
                    score > best_score
                } else if point.hyper.k != points[b].hyper.k {
                    point.hyper.k < points[b].hyper.k
                } else {
                    point.hyper.lambda < points[b].hyper.lambda
                }
            }
        };
        if better {
            best_index = Some(i);
        }
    }
    let best_index = best_index
        .ok_or_else(|| Error::InvalidInput("every grid point failed to train".into()))?;

    Ok(GridReport {
        model: model.to_string(),
        metric: metric.to_string(),
        best_index,
        best: points[best_index].hyper.clone(),
        best_score: points[best_index].score.unwrap(),
        points,
    })
}

/// The `(beta, score)` curve across points sharing the winning `k`,
/// `lambda`, and `alpha`, in input order.
pub fn beta_sweep(report: &GridReport) -> Vec<(f64, f64)> {
    report
        .points
        .iter()
        .filter(|p| {
            p.score.is_some()
                && p.hyper.k == report.best.k
                && p.hyper.lambda == report.best.lambda
                && p.hyper.alpha == report.best.alpha
        })
        .map(|p| (p.hyper.beta, p.score.unwrap()))
        .collect()
}
