//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad classification used by callers that need to map failures to
/// process exit codes: bad input versus numerical breakdown.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Caller or data problem: unreadable files, malformed rows, bad arguments.
    Input,
    /// The computation itself failed: no convergence, degenerate matrices.
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not symmetric (max asymmetry {0:.3e})")]
    NotSymmetric(f64),

    #[error("eigensolver did not converge within {0} sweeps")]
    NoConvergence(usize),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("label error: {0}")]
    Label(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("stratification error: {0}")]
    Stratification(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("no discriminative structure: {0}")]
    NoDiscrimination(String),

    #[error("missing reference points: {0}")]
    MissingReference(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown format: {0}")]
    UnknownFormat(String),

    #[error("experiment failed: {0}")]
    Experiment(String),

    #[error("model file error: {0}")]
    Model(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::NotSymmetric(_)
            | Error::NoConvergence(_)
            | Error::DegenerateData(_)
            | Error::NoDiscrimination(_)
            | Error::MissingReference(_) => ErrorClass::Numerical,
            _ => ErrorClass::Input,
        }
    }
}
