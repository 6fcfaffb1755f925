pub mod analytics;
pub mod eval;
pub mod fit;
pub mod synth;

use std::fs;
use std::path::Path;

use clap::{Args, ValueEnum};
use serde::Serialize;
use sparfa_lite::data_io::{default_lambda_grid, CvMetric};
use sparfa_lite::SolverConfig;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Args, Serialize)]
pub struct SolverArgs {
    /// Iteration cap for each fit.
    #[arg(long, default_value_t = 1000)]
    pub max_iterations: usize,
    /// Stop when the relative objective change falls below this.
    #[arg(long, default_value_t = 1e-6)]
    pub tolerance: f64,
}

impl SolverArgs {
    pub fn config(&self, lambda: f64) -> SolverConfig {
        SolverConfig {
            max_iterations: self.max_iterations,
            tolerance: self.tolerance,
            ..SolverConfig::new(lambda)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricArg {
    /// Mean probability of the held-out label.
    Lik,
    /// Fraction of held-out labels predicted exactly.
    Cor,
}

impl From<MetricArg> for CvMetric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Lik => CvMetric::Likelihood,
            MetricArg::Cor => CvMetric::Accuracy,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CvArgs {
    /// Cross-validation folds.
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Points in the default grid, spaced geometrically over [0.1, 100]·√(QN).
    #[arg(long, default_value_t = 10)]
    pub grid_points: usize,
    /// Explicit comma-separated radii, replacing the default grid.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
    /// Validation metric to maximise.
    #[arg(long, value_enum, default_value_t = MetricArg::Lik)]
    pub cv_metric: MetricArg,
}

impl CvArgs {
    pub fn grid(&self, questions: usize, learners: usize) -> Vec<f64> {
        self.grid
            .clone()
            .unwrap_or_else(|| default_lambda_grid(questions, learners, self.grid_points))
    }
}

pub fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}
