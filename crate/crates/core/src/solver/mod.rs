//! Nuclear-norm constrained maximum likelihood by accelerated projected
//! gradient (FISTA with backtracking and objective-based restart).

mod projection;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantized_model::{
    nll_unchecked, nll_with_gradient_unchecked, FactorMatrix, ObservedResponses, Quantizer,
};

pub(crate) use projection::effective_rank;
pub use projection::{project_l1_ball, project_nuclear_ball};
use projection::{project_nuclear_ball_gram, project_nuclear_ball_raw};

/// Steps smaller than this abort the line search.
pub const MIN_STEP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Nuclear-norm radius.
    pub lambda: f64,
    pub max_iterations: usize,
    /// Relative objective change between accepted iterates that counts as converged.
    pub tolerance: f64,
    pub initial_step: f64,
    pub backtracking_factor: f64,
    pub restart_on_increase: bool,
}

impl SolverConfig {
    pub fn new(lambda: f64) -> Self {
        SolverConfig {
            lambda,
            max_iterations: 1000,
            tolerance: 1e-6,
            // binary logistic curvature is at most 1/4 per entry
            initial_step: 4.0,
            backtracking_factor: 0.5,
            restart_on_increase: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "lambda must be positive and finite, got {}",
                self.lambda
            )));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if !(self.backtracking_factor > 0.0 && self.backtracking_factor < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "backtracking factor must lie in (0, 1), got {}",
                self.backtracking_factor
            )));
        }
        if !(self.initial_step > 0.0 && self.initial_step.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "initial step must be positive, got {}",
                self.initial_step
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig(
                "max_iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub z_hat: FactorMatrix,
    /// `f(z_hat)`.
    pub objective: f64,
    /// Objective of the accepted iterate after each iteration; entry 0 is the start.
    pub objective_trace: Vec<f64>,
    pub iterations_used: usize,
    pub converged: bool,
    pub effective_rank: usize,
}

/// Outcome of one projected gradient step with backtracking.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub candidate: DMatrix<f64>,
    pub step: f64,
    pub objective: f64,
}

/// The objective `f` for a fixed set of observations and quantizer.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    obs: &'a ObservedResponses,
    quantizer: &'a Quantizer,
}

impl<'a> Problem<'a> {
    pub fn new(obs: &'a ObservedResponses, quantizer: &'a Quantizer) -> Result<Self> {
        obs.check_labels(quantizer)?;
        Ok(Problem { obs, quantizer })
    }

    pub fn shape(&self) -> (usize, usize) {
        self.obs.shape()
    }

    fn check(&self, z: &DMatrix<f64>) -> Result<()> {
        if z.shape() != self.shape() {
            return Err(Error::DimensionMismatch {
                expected: self.shape(),
                actual: z.shape(),
            });
        }
        Ok(())
    }

    pub fn objective(&self, z: &DMatrix<f64>) -> f64 {
        nll_unchecked(z, self.obs, self.quantizer)
    }

    pub fn gradient(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        self.objective_and_gradient(z).1
    }

    pub fn objective_and_gradient(&self, z: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
        nll_with_gradient_unchecked(z, self.obs, self.quantizer)
    }

    /// Projected gradient step from `point`, shrinking the step by `factor`
    /// until the quadratic upper model at `point` majorizes `f` at the
    /// candidate:
    ///
    /// `f(c) ≤ f(y) + ⟨∇f(y), c − y⟩ + ‖c − y‖² / (2 s)`.
    pub fn backtracking_step(
        &self,
        point: &DMatrix<f64>,
        objective_at_point: f64,
        gradient: &DMatrix<f64>,
        step_in: f64,
        radius: f64,
        factor: f64,
    ) -> Result<StepOutcome> {
        self.check(point)?;
        self.check(gradient)?;
        // absorbs round-off once the iterates stop moving
        let slack = 1e-12 * objective_at_point.abs().max(1.0);
        let mut step = step_in;
        loop {
            if step < MIN_STEP {
                return Err(Error::LineSearch {
                    step,
                    min_step: MIN_STEP,
                });
            }
            let candidate = project_nuclear_ball_gram(point - gradient * step, radius)?;
            let objective = self.objective(&candidate);
            let diff = &candidate - point;
            let model =
                objective_at_point + gradient.dot(&diff) + diff.norm_squared() / (2.0 * step);
            if objective <= model + slack {
                return Ok(StepOutcome {
                    candidate,
                    step,
                    objective,
                });
            }
            if !objective.is_finite() && !model.is_finite() {
                return Err(Error::Numerical("objective is not finite".into()));
            }
            step *= factor;
        }
    }
}

/// Fits from the zero matrix.
pub fn fit(
    obs: &ObservedResponses,
    quantizer: &Quantizer,
    cfg: &SolverConfig,
) -> Result<FitResult> {
    let (q, n) = obs.shape();
    fit_from(obs, quantizer, cfg, &FactorMatrix::zeros(q, n))
}

/// Fits from `init`, which is first projected onto the constraint set.
pub fn fit_from(
    obs: &ObservedResponses,
    quantizer: &Quantizer,
    cfg: &SolverConfig,
    init: &FactorMatrix,
) -> Result<FitResult> {
    cfg.validate()?;
    if obs.is_empty() {
        return Err(Error::EmptyObservations);
    }
    let problem = Problem::new(obs, quantizer)?;
    problem.check(init.as_matrix())?;

    let mut x = project_nuclear_ball_raw(init.as_matrix().clone(), cfg.lambda)?;
    let mut fx = problem.objective(&x);
    if !fx.is_finite() {
        return Err(Error::Numerical(
            "objective at the starting point is not finite".into(),
        ));
    }
    let mut best = (x.clone(), fx);
    let mut trace = vec![fx];

    let mut y = x.clone();
    let mut momentum = 1.0_f64;
    let mut step = cfg.initial_step;
    let mut converged = false;
    let mut iterations = 0;

    for it in 1..=cfg.max_iterations {
        iterations = it;
        let (fy, gradient) = problem.objective_and_gradient(&y);
        let outcome = problem.backtracking_step(
            &y,
            fy,
            &gradient,
            step,
            cfg.lambda,
            cfg.backtracking_factor,
        )?;
        step = outcome.step;
        let f_new = outcome.objective;
        if !f_new.is_finite() {
            return Err(Error::Numerical(format!(
                "objective became {f_new} at iteration {it}"
            )));
        }

        if cfg.restart_on_increase && f_new > fx {
            trace.push(fx);
            if momentum == 1.0 {
                // a plain gradient step from the current iterate made no progress
                converged = true;
                break;
            }
            momentum = 1.0;
            y.copy_from(&x);
            continue;
        }

        let next_momentum = (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt()) / 2.0;
        let beta = (momentum - 1.0) / next_momentum;
        let x_new = outcome.candidate;
        y = &x_new + (&x_new - &x) * beta;

        let change = (fx - f_new).abs() / fx.abs().max(f64::MIN_POSITIVE);
        x = x_new;
        fx = f_new;
        momentum = next_momentum;
        trace.push(fx);
        if fx < best.1 {
            best = (x.clone(), fx);
        }
        if change < cfg.tolerance {
            converged = true;
            break;
        }
    }

    // iterations project through the Gram route; settle feasibility with the exact SVD
    let z_hat = project_nuclear_ball_raw(best.0, cfg.lambda)?;
    let objective = problem.objective(&z_hat);
    let effective_rank = effective_rank(&z_hat)?;
    Ok(FitResult {
        z_hat: FactorMatrix::new(z_hat)?,
        objective,
        objective_trace: trace,
        iterations_used: iterations,
        converged,
        effective_rank,
    })
}
