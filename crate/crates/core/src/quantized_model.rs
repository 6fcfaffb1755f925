//! Ordinal observation model.
//!
//! A real score `z` is observed through additive standard-logistic noise and
//! a scalar quantizer with bins `(ω_{p-1}, ω_p]`, so the probability of label
//! `p` is `Φ(ω_p - z) - Φ(ω_{p-1} - z)` with `Φ` the logistic CDF.
//!
//! Labels are 1-based (`1..=P`); question and learner indices are 0-based.

use std::collections::HashSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bin probabilities are clamped below at this value before taking logs or
/// dividing, so the objective and its gradient stay finite for large `|z|`.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

/// Logistic CDF `1 / (1 + e^{-x})`, defined on the extended reals.
pub fn inverse_logit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Logistic density `1 / (2 + e^{-x} + e^{x})`, zero at `±∞`.
pub fn inverse_logit_deriv(x: f64) -> f64 {
    let e = (-x.abs()).exp();
    e / ((1.0 + e) * (1.0 + e))
}

/// Mass of the logistic distribution on `(lo, hi]`.
///
/// Uses `Φ(hi)·Φ(-lo)·(1 - e^{lo-hi})`, which avoids the cancellation in
/// `Φ(hi) - Φ(lo)` when both ends sit in the same tail.
pub(crate) fn logistic_mass(lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    inverse_logit(hi) * inverse_logit(-lo) * -(lo - hi).exp_m1()
}

/// Scalar quantizer: ordered boundaries `ω_0 = -∞ ≤ ω_1 ≤ … ≤ ω_P = +∞`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "QuantizerFile", into = "QuantizerFile")]
pub struct Quantizer {
    boundaries: Vec<f64>,
}

/// On-disk form: `{"num_labels": P, "interior_boundaries": [ω_1, …, ω_{P-1}]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct QuantizerFile {
    num_labels: usize,
    interior_boundaries: Vec<f64>,
}

impl TryFrom<QuantizerFile> for Quantizer {
    type Error = Error;

    fn try_from(file: QuantizerFile) -> Result<Self> {
        if file.interior_boundaries.len() + 1 != file.num_labels {
            return Err(Error::InvalidQuantizer(format!(
                "{} labels need {} interior boundaries, got {}",
                file.num_labels,
                file.num_labels.saturating_sub(1),
                file.interior_boundaries.len()
            )));
        }
        Quantizer::from_interior(file.interior_boundaries)
    }
}

impl From<Quantizer> for QuantizerFile {
    fn from(q: Quantizer) -> Self {
        QuantizerFile {
            num_labels: q.num_labels(),
            interior_boundaries: q.interior().to_vec(),
        }
    }
}

impl Quantizer {
    /// Builds a quantizer from its finite interior boundaries `ω_1 … ω_{P-1}`.
    pub fn from_interior(interior: Vec<f64>) -> Result<Self> {
        if let Some(bad) = interior.iter().find(|w| !w.is_finite()) {
            return Err(Error::InvalidQuantizer(format!(
                "interior boundary {bad} is not finite"
            )));
        }
        if interior.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidQuantizer(
                "boundaries must be non-decreasing".into(),
            ));
        }
        let mut boundaries = Vec::with_capacity(interior.len() + 2);
        boundaries.push(f64::NEG_INFINITY);
        boundaries.extend(interior);
        boundaries.push(f64::INFINITY);
        Ok(Quantizer { boundaries })
    }

    /// Builds a quantizer from the full boundary list `ω_0 … ω_P`.
    pub fn from_boundaries(boundaries: Vec<f64>) -> Result<Self> {
        if boundaries.len() < 2 {
            return Err(Error::InvalidQuantizer(
                "need at least the two infinite endpoints".into(),
            ));
        }
        let first = boundaries[0];
        let last = boundaries[boundaries.len() - 1];
        if first != f64::NEG_INFINITY || last != f64::INFINITY {
            return Err(Error::InvalidQuantizer(
                "outer boundaries must be -inf and +inf".into(),
            ));
        }
        Quantizer::from_interior(boundaries[1..boundaries.len() - 1].to_vec())
    }

    /// Correct/incorrect responses: `{-∞, 0, +∞}`.
    pub fn binary() -> Self {
        Quantizer {
            boundaries: vec![f64::NEG_INFINITY, 0.0, f64::INFINITY],
        }
    }

    /// `P` labels with unit-width interior bins centred on zero, e.g.
    /// `{-∞, -1, 0, 1, +∞}` for `P = 4` and the binary quantizer for `P = 2`.
    pub fn evenly_spaced(num_labels: usize) -> Result<Self> {
        if num_labels == 0 {
            return Err(Error::InvalidQuantizer("need at least one label".into()));
        }
        let half = num_labels as f64 / 2.0;
        Quantizer::from_interior((1..num_labels).map(|k| k as f64 - half).collect())
    }

    pub fn num_labels(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn interior(&self) -> &[f64] {
        &self.boundaries[1..self.boundaries.len() - 1]
    }

    fn check_label(&self, label: usize) -> Result<()> {
        if label == 0 || label > self.num_labels() {
            return Err(Error::InvalidLabel {
                label,
                num_labels: self.num_labels(),
            });
        }
        Ok(())
    }

    /// `(L, U) = (ω_{p-1}, ω_p)` for label `p`.
    pub fn bin(&self, label: usize) -> Result<(f64, f64)> {
        self.check_label(label)?;
        Ok((self.boundaries[label - 1], self.boundaries[label]))
    }

    /// The label `p` with `ω_{p-1} < x ≤ ω_p`.
    pub fn quantize(&self, x: f64) -> usize {
        // first interior boundary that is >= x; boundary points fall in the lower bin
        let interior = self.interior();
        interior.partition_point(|&w| w < x) + 1
    }

    /// `p(Y = label | z)`.
    pub fn label_likelihood(&self, z: f64, label: usize) -> Result<f64> {
        let (lo, hi) = self.bin(label)?;
        Ok(logistic_mass(lo - z, hi - z))
    }
}

/// One graded response: 0-based question and learner, 1-based label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Response {
    pub question: usize,
    pub learner: usize,
    pub label: usize,
}

impl Response {
    pub fn new(question: usize, learner: usize, label: usize) -> Self {
        Response {
            question,
            learner,
            label,
        }
    }
}

/// The observed entries `Ω_obs` of a `Q × N` response matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedResponses {
    num_questions: usize,
    num_learners: usize,
    entries: Vec<Response>,
}

impl ObservedResponses {
    /// Rejects out-of-range indices, zero labels, and duplicate `(i, j)` pairs.
    /// Upper label bounds depend on the quantizer; see [`Self::check_labels`].
    pub fn new(num_questions: usize, num_learners: usize, entries: Vec<Response>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(entries.len());
        for r in &entries {
            if r.question >= num_questions || r.learner >= num_learners {
                return Err(Error::InvalidObservations(format!(
                    "entry ({}, {}) lies outside a {num_questions}x{num_learners} matrix",
                    r.question, r.learner
                )));
            }
            if r.label == 0 {
                return Err(Error::InvalidObservations(format!(
                    "entry ({}, {}) has label 0; labels start at 1",
                    r.question, r.learner
                )));
            }
            if !seen.insert((r.question, r.learner)) {
                return Err(Error::InvalidObservations(format!(
                    "duplicate entry ({}, {})",
                    r.question, r.learner
                )));
            }
        }
        Ok(ObservedResponses {
            num_questions,
            num_learners,
            entries,
        })
    }

    /// Subset sharing the same dimensions. Entries are assumed to come from
    /// a valid set, so no duplicate check is repeated.
    pub(crate) fn with_entries(&self, entries: Vec<Response>) -> Self {
        ObservedResponses {
            num_questions: self.num_questions,
            num_learners: self.num_learners,
            entries,
        }
    }

    pub fn num_questions(&self) -> usize {
        self.num_questions
    }

    pub fn num_learners(&self) -> usize {
        self.num_learners
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.num_questions, self.num_learners)
    }

    pub fn entries(&self) -> &[Response] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn check_labels(&self, q: &Quantizer) -> Result<()> {
        for r in &self.entries {
            q.check_label(r.label)?;
        }
        Ok(())
    }

    /// Number of responses carrying each label, indexed `label - 1`.
    pub fn label_counts(&self, num_labels: usize) -> Vec<usize> {
        let mut counts = vec![0; num_labels];
        for r in &self.entries {
            if let Some(c) = counts.get_mut(r.label - 1) {
                *c += 1;
            }
        }
        counts
    }
}

/// Dense `Q × N` matrix of finite reals.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorMatrix(DMatrix<f64>);

impl FactorMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("matrix has non-finite entries".into()));
        }
        Ok(FactorMatrix(m))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        FactorMatrix(DMatrix::zeros(rows, cols))
    }

    pub fn from_row_slice(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        FactorMatrix::new(DMatrix::from_row_slice(rows, cols, data))
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn get(&self, question: usize, learner: usize) -> f64 {
        self.0[(question, learner)]
    }

    pub fn nuclear_norm(&self) -> f64 {
        nuclear_norm(&self.0)
    }
}

pub(crate) fn nuclear_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    crate::linalg::singular_values(m).map_or(f64::NAN, |s| s.iter().sum())
}

fn check_shape(z: &DMatrix<f64>, obs: &ObservedResponses) -> Result<()> {
    if z.shape() != obs.shape() {
        return Err(Error::DimensionMismatch {
            expected: obs.shape(),
            actual: z.shape(),
        });
    }
    Ok(())
}

/// Per-entry bin mass with the probability floor applied.
#[inline]
fn floored_mass(lo: f64, hi: f64, z: f64) -> f64 {
    logistic_mass(lo - z, hi - z).max(PROBABILITY_FLOOR)
}

/// Negative log-likelihood `f(Z) = -Σ_{Ω_obs} log p(Y_ij | Z_ij)`.
pub fn nll(z: &FactorMatrix, obs: &ObservedResponses, q: &Quantizer) -> Result<f64> {
    check_shape(z.as_matrix(), obs)?;
    obs.check_labels(q)?;
    Ok(nll_unchecked(z.as_matrix(), obs, q))
}

/// Gradient of [`nll`]; zero on unobserved entries.
pub fn nll_gradient(
    z: &FactorMatrix,
    obs: &ObservedResponses,
    q: &Quantizer,
) -> Result<FactorMatrix> {
    check_shape(z.as_matrix(), obs)?;
    obs.check_labels(q)?;
    Ok(FactorMatrix(nll_gradient_unchecked(z.as_matrix(), obs, q)))
}

pub(crate) fn nll_unchecked(z: &DMatrix<f64>, obs: &ObservedResponses, q: &Quantizer) -> f64 {
    let w = q.boundaries();
    obs.entries
        .iter()
        .map(|r| {
            let zij = z[(r.question, r.learner)];
            -floored_mass(w[r.label - 1], w[r.label], zij).ln()
        })
        .sum()
}

pub(crate) fn nll_gradient_unchecked(
    z: &DMatrix<f64>,
    obs: &ObservedResponses,
    q: &Quantizer,
) -> DMatrix<f64> {
    nll_with_gradient_unchecked(z, obs, q).1
}

/// Objective and gradient in one pass over `Ω_obs`.
pub(crate) fn nll_with_gradient_unchecked(
    z: &DMatrix<f64>,
    obs: &ObservedResponses,
    q: &Quantizer,
) -> (f64, DMatrix<f64>) {
    let w = q.boundaries();
    let mut grad = DMatrix::zeros(z.nrows(), z.ncols());
    let mut total = 0.0;
    for r in &obs.entries {
        let zij = z[(r.question, r.learner)];
        let (lo, hi) = (w[r.label - 1] - zij, w[r.label] - zij);
        let mass = logistic_mass(lo, hi).max(PROBABILITY_FLOOR);
        total -= mass.ln();
        grad[(r.question, r.learner)] = (inverse_logit_deriv(hi) - inverse_logit_deriv(lo)) / mass;
    }
    (total, grad)
}
