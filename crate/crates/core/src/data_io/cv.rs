use serde::{Deserialize, Serialize};

use crate::analytics::{accuracy, mean_likelihood};
use crate::error::{Error, Result};
use crate::quantized_model::{ObservedResponses, Quantizer};
use crate::solver::{fit, SolverConfig};

use super::split::fold_assignment;

/// Validation metric used to pick the radius.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CvMetric {
    #[default]
    Likelihood,
    Accuracy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOptions {
    pub folds: usize,
    pub seed: u64,
    pub metric: CvMetric,
    /// Solver settings; its `lambda` is replaced by each grid value.
    pub solver: SolverConfig,
}

impl CvOptions {
    pub fn new(folds: usize, seed: u64) -> Self {
        CvOptions {
            folds,
            seed,
            metric: CvMetric::default(),
            solver: SolverConfig::new(1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub lambda_grid: Vec<f64>,
    /// Mean validation LIK per grid point.
    pub mean_lik: Vec<f64>,
    /// Mean validation COR per grid point.
    pub mean_cor: Vec<f64>,
    pub best_lambda: f64,
    pub folds: usize,
    pub metric: CvMetric,
}

/// `points` geometrically spaced radii spanning `[0.1, 100] · √(Q N)`.
pub fn default_lambda_grid(questions: usize, learners: usize, points: usize) -> Vec<f64> {
    let anchor = ((questions * learners) as f64).sqrt();
    let (lo, hi) = (0.1f64.ln(), 100f64.ln());
    match points {
        0 => Vec::new(),
        1 => vec![anchor],
        _ => (0..points)
            .map(|k| anchor * (lo + (hi - lo) * k as f64 / (points - 1) as f64).exp())
            .collect(),
    }
}

/// K-fold cross-validation over entries of `Ω_obs`. The winner maximizes the
/// chosen mean validation metric; ties go to the smaller radius.
pub fn cross_validate_lambda(
    responses: &ObservedResponses,
    quantizer: &Quantizer,
    lambda_grid: &[f64],
    options: &CvOptions,
) -> Result<CvReport> {
    if options.folds < 2 {
        return Err(Error::InvalidConfig(format!(
            "need at least 2 folds, got {}",
            options.folds
        )));
    }
    if lambda_grid.is_empty() {
        return Err(Error::InvalidConfig("lambda grid is empty".into()));
    }
    if let Some(bad) = lambda_grid.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
        return Err(Error::InvalidConfig(format!(
            "lambda {bad} is not positive"
        )));
    }
    if responses.len() < options.folds {
        return Err(Error::InvalidConfig(format!(
            "{} responses cannot fill {} folds without an empty training or validation set",
            responses.len(),
            options.folds
        )));
    }
    responses.check_labels(quantizer)?;

    let assignment = fold_assignment(responses.len(), options.folds, options.seed);
    let splits: Vec<(ObservedResponses, ObservedResponses)> = (0..options.folds)
        .map(|f| {
            let (mut train, mut valid) = (Vec::new(), Vec::new());
            for (r, &k) in responses.entries().iter().zip(&assignment) {
                if k == f {
                    valid.push(*r);
                } else {
                    train.push(*r);
                }
            }
            (responses.with_entries(train), responses.with_entries(valid))
        })
        .collect();

    let mut mean_lik = Vec::with_capacity(lambda_grid.len());
    let mut mean_cor = Vec::with_capacity(lambda_grid.len());
    for &lambda in lambda_grid {
        let cfg = SolverConfig {
            lambda,
            ..options.solver.clone()
        };
        let (mut lik, mut cor) = (0.0, 0.0);
        for (train, valid) in &splits {
            let result = fit(train, quantizer, &cfg)?;
            lik += mean_likelihood(&result.z_hat, valid, quantizer)?;
            cor += accuracy(&result.z_hat, valid, quantizer)?;
        }
        mean_lik.push(lik / options.folds as f64);
        mean_cor.push(cor / options.folds as f64);
    }

    let scores = match options.metric {
        CvMetric::Likelihood => &mean_lik,
        CvMetric::Accuracy => &mean_cor,
    };
    let mut best = 0;
    for k in 1..lambda_grid.len() {
        let better = scores[k] > scores[best]
            || (scores[k] == scores[best] && lambda_grid[k] < lambda_grid[best]);
        if better {
            best = k;
        }
    }
    Ok(CvReport {
        lambda_grid: lambda_grid.to_vec(),
        mean_lik,
        mean_cor,
        best_lambda: lambda_grid[best],
        folds: options.folds,
        metric: options.metric,
    })
}
