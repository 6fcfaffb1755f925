//! Repeated hold-out evaluation: puncture a fraction of the observed
//! responses, fit on the rest (optionally choosing the radius by
//! cross-validation), and score the held-out part.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analytics::{baseline, evaluate, BaselineMetrics, PredictionMetrics};
use crate::error::{Error, Result};
use crate::quantized_model::{ObservedResponses, Quantizer};
use crate::solver::{fit, SolverConfig};

use super::cv::{cross_validate_lambda, default_lambda_grid, CvMetric, CvOptions};
use super::split::holdout_split;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaChoice {
    Fixed(f64),
    CrossValidated {
        /// Empty means the default grid for the data's dimensions.
        grid: Vec<f64>,
        grid_points: usize,
        folds: usize,
        metric: CvMetric,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolOptions {
    pub trials: usize,
    pub test_fraction: f64,
    pub seed: u64,
    pub lambda: LambdaChoice,
    pub solver: SolverConfig,
}

impl ProtocolOptions {
    /// 25 trials with 20% of the responses held out, radius by 5-fold CV over
    /// the default 10-point grid.
    pub fn new(seed: u64) -> Self {
        ProtocolOptions {
            trials: 25,
            test_fraction: 0.2,
            seed,
            lambda: LambdaChoice::CrossValidated {
                grid: Vec::new(),
                grid_points: 10,
                folds: 5,
                metric: CvMetric::Likelihood,
            },
            solver: SolverConfig::new(1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: usize,
    pub lambda: f64,
    pub metrics: PredictionMetrics,
    pub baseline: BaselineMetrics,
    pub effective_rank: usize,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolReport {
    pub trials: Vec<TrialOutcome>,
    /// Means over trials; AUC only if every trial produced one.
    pub mean: PredictionMetrics,
    pub mean_baseline: BaselineMetrics,
}

pub fn run_holdout_protocol(
    responses: &ObservedResponses,
    quantizer: &Quantizer,
    options: &ProtocolOptions,
) -> Result<ProtocolReport> {
    if options.trials == 0 {
        return Err(Error::InvalidConfig("need at least one trial".into()));
    }
    let mut seeds = ChaCha8Rng::seed_from_u64(options.seed);
    let mut trials = Vec::with_capacity(options.trials);
    for trial in 0..options.trials {
        let (split_seed, cv_seed): (u64, u64) = (seeds.gen(), seeds.gen());
        let (train, test) = holdout_split(responses, options.test_fraction, split_seed)?;
        if train.is_empty() || test.is_empty() {
            return Err(Error::InvalidConfig(format!(
                "hold-out fraction {} leaves an empty training or test set",
                options.test_fraction
            )));
        }
        let lambda = match &options.lambda {
            LambdaChoice::Fixed(l) => *l,
            LambdaChoice::CrossValidated {
                grid,
                grid_points,
                folds,
                metric,
            } => {
                let grid = if grid.is_empty() {
                    default_lambda_grid(
                        responses.num_questions(),
                        responses.num_learners(),
                        *grid_points,
                    )
                } else {
                    grid.clone()
                };
                let cv = CvOptions {
                    folds: *folds,
                    seed: cv_seed,
                    metric: *metric,
                    solver: options.solver.clone(),
                };
                cross_validate_lambda(&train, quantizer, &grid, &cv)?.best_lambda
            }
        };
        let cfg = SolverConfig {
            lambda,
            ..options.solver.clone()
        };
        let fitted = fit(&train, quantizer, &cfg)?;
        trials.push(TrialOutcome {
            trial,
            lambda,
            metrics: evaluate(&fitted.z_hat, &test, quantizer)?,
            baseline: baseline(&train, &test, quantizer)?,
            effective_rank: fitted.effective_rank,
            iterations: fitted.iterations_used,
        });
    }

    let n = trials.len() as f64;
    let mean_of = |f: &dyn Fn(&TrialOutcome) -> f64| trials.iter().map(f).sum::<f64>() / n;
    let auc = if trials.iter().all(|t| t.metrics.auc.is_some()) {
        Some(mean_of(&|t| t.metrics.auc.unwrap()))
    } else {
        None
    };
    let mean = PredictionMetrics {
        cor: mean_of(&|t| t.metrics.cor),
        lik: mean_of(&|t| t.metrics.lik),
        auc,
    };
    let mean_baseline = BaselineMetrics {
        majority_cor: mean_of(&|t| t.baseline.majority_cor),
        constant_lik: mean_of(&|t| t.baseline.constant_lik),
    };
    Ok(ProtocolReport {
        trials,
        mean,
        mean_baseline,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_io::{synthesize, SynthParams};

    fn data() -> ObservedResponses {
        let p = SynthParams {
            questions: 12,
            learners: 10,
            rank: 2,
            observed_fraction: 0.9,
            scale: 2.0,
            seed: 4,
        };
        synthesize(&p, &Quantizer::binary()).unwrap().responses
    }

    #[test]
    fn fixed_lambda_is_deterministic() {
        let mut opts = ProtocolOptions::new(7);
        opts.trials = 3;
        opts.lambda = LambdaChoice::Fixed(10.0);
        let a = run_holdout_protocol(&data(), &Quantizer::binary(), &opts).unwrap();
        let b = run_holdout_protocol(&data(), &Quantizer::binary(), &opts).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.trials.len(), 3);
        assert!(a.mean.auc.is_some());
        assert!(a.trials.iter().all(|t| t.lambda == 10.0));
    }

    #[test]
    fn cross_validated_lambda_comes_from_grid() {
        let mut opts = ProtocolOptions::new(1);
        opts.trials = 1;
        opts.lambda = LambdaChoice::CrossValidated {
            grid: vec![1.0, 10.0],
            grid_points: 0,
            folds: 2,
            metric: CvMetric::Likelihood,
        };
        let r = run_holdout_protocol(&data(), &Quantizer::binary(), &opts).unwrap();
        assert!([1.0, 10.0].contains(&r.trials[0].lambda));
    }

    #[test]
    fn zero_trials_rejected() {
        let mut opts = ProtocolOptions::new(1);
        opts.trials = 0;
        assert!(run_holdout_protocol(&data(), &Quantizer::binary(), &opts).is_err());
    }
}
