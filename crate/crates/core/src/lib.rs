//! Low-rank recovery of learner-question score matrices from incomplete,
//! ordinal graded responses, and the learning analytics built on top.
//!
//! The pipeline: observations ([`ObservedResponses`]) quantized by a
//! [`Quantizer`] are fitted by [`fit`], which minimizes the ordinal logistic
//! negative log-likelihood over a nuclear-norm ball. The recovered matrix
//! feeds [`analytics`] for tag knowledge and held-out prediction metrics.

pub mod analytics;
pub mod data_io;
mod error;
mod linalg;
pub mod quantized_model;
pub mod solver;

pub use analytics::{PredictionMetrics, TagKnowledge, TagMatrix};
pub use data_io::{CvReport, Dataset, SyntheticTruth};
pub use error::{Error, Result};
pub use quantized_model::{FactorMatrix, ObservedResponses, Quantizer, Response};
pub use solver::{fit, fit_from, FitResult, SolverConfig};
