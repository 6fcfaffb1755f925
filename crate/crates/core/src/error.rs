use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid quantizer: {0}")]
    InvalidQuantizer(String),

    #[error("label {label} is outside 1..={num_labels}")]
    InvalidLabel { label: usize, num_labels: usize },

    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("invalid observations: {0}")]
    InvalidObservations(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("observation set is empty")]
    EmptyObservations,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("line search failed: step {step:e} fell below {min_step:e}")]
    LineSearch { step: f64, min_step: f64 },

    #[error("tag `{0}` is not attached to any question")]
    DegenerateTag(String),

    #[error("invalid tag matrix: {0}")]
    InvalidTags(String),

    #[error("AUC requires a binary quantizer, got {num_labels} labels")]
    UnsupportedQuantizer { num_labels: usize },

    #[error("AUC is undefined when the test set holds a single class")]
    UndefinedAuc,

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{path}:{line}: duplicate response for learner `{learner}` on question `{question}`")]
    DuplicateEntry {
        path: PathBuf,
        line: u64,
        learner: String,
        question: String,
    },

    #[error("{path}:{line}: grade {grade} is outside 1..={num_labels}")]
    GradeOutOfRange {
        path: PathBuf,
        line: u64,
        grade: i64,
        num_labels: usize,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerical pipeline, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_) | Error::LineSearch { .. })
    }

    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
