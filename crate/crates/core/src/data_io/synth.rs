use nalgebra::DMatrix;
use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantized_model::{FactorMatrix, ObservedResponses, Quantizer, Response};

use super::Dataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub questions: usize,
    pub learners: usize,
    pub rank: usize,
    /// Probability that each entry is observed.
    pub observed_fraction: f64,
    /// Standard deviation of the entries of the ground-truth matrix.
    pub scale: f64,
    pub seed: u64,
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        if self.questions == 0 || self.learners == 0 {
            return Err(Error::InvalidConfig(
                "questions and learners must be positive".into(),
            ));
        }
        if self.rank == 0 || self.rank > self.questions.min(self.learners) {
            return Err(Error::InvalidConfig(format!(
                "rank {} must lie in 1..=min(questions, learners) = {}",
                self.rank,
                self.questions.min(self.learners)
            )));
        }
        if !(self.observed_fraction > 0.0 && self.observed_fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "observed fraction must lie in (0, 1], got {}",
                self.observed_fraction
            )));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "scale must be positive, got {}",
                self.scale
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTruth {
    pub z_true: FactorMatrix,
    pub rank: usize,
    pub responses: ObservedResponses,
    pub observed_fraction: f64,
}

impl SyntheticTruth {
    /// Wraps the responses with ids `1..=Q` and `1..=N`.
    pub fn to_dataset(&self, quantizer: &Quantizer) -> Result<Dataset> {
        let (q, n) = self.responses.shape();
        Dataset::new(
            self.responses.clone(),
            quantizer.clone(),
            (1..=n).map(|j| j.to_string()).collect(),
            (1..=q).map(|i| i.to_string()).collect(),
        )
    }
}

/// Standard logistic draw by inverting the CDF.
pub(crate) fn logistic_noise<R: Rng>(rng: &mut R) -> f64 {
    let u: f64 = rng.sample(Open01);
    (u / (1.0 - u)).ln()
}

/// Draws `Z = scale · G_Q G_Nᵀ / √K` with standard normal factors, observes
/// each entry independently with probability `observed_fraction`, and labels
/// it `quantize(Z_ij + ε_ij)` with `ε_ij ~ Logistic(0, 1)`.
pub fn synthesize(params: &SynthParams, quantizer: &Quantizer) -> Result<SyntheticTruth> {
    params.validate()?;
    let (q, n, k) = (params.questions, params.learners, params.rank);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let gq = DMatrix::<f64>::from_fn(q, k, |_, _| rng.sample(StandardNormal));
    let gn = DMatrix::<f64>::from_fn(n, k, |_, _| rng.sample(StandardNormal));
    let z = (gq * gn.transpose()) * (params.scale / (k as f64).sqrt());

    let mut entries = Vec::new();
    for i in 0..q {
        for j in 0..n {
            // draw both so the noise stream does not depend on the mask
            let keep: f64 = rng.gen();
            let eps = logistic_noise(&mut rng);
            if keep < params.observed_fraction {
                entries.push(Response::new(i, j, quantizer.quantize(z[(i, j)] + eps)));
            }
        }
    }
    Ok(SyntheticTruth {
        z_true: FactorMatrix::new(z)?,
        rank: k,
        responses: ObservedResponses::new(q, n, entries)?,
        observed_fraction: params.observed_fraction,
    })
}
