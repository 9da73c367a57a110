use thiserror::Error;

/// Errors raised by the measurement, protocol and budget layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("empty matrix")]
    Empty,

    #[error("matrix is not Hermitian: max |H_ij - conj(H_ji)| = {max_asymmetry:e}")]
    NotHermitian { max_asymmetry: f64 },

    #[error("matrix is not unitary: max |(U^dagger U - I)_ij| = {deviation:e}")]
    NotUnitary { deviation: f64 },

    #[error("density matrix trace is {trace}, expected 1")]
    TraceNotOne { trace: f64 },

    #[error("density matrix has negative eigenvalue {min_eigenvalue:e}")]
    NotPositive { min_eigenvalue: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid observable: {0}")]
    InvalidObservable(String),

    #[error("invalid spectrum weights: {0}")]
    InvalidWeights(String),

    #[error("closed form requires a pure initial state (purity {purity})")]
    MixedStateUnsupported { purity: f64 },

    #[error("invalid series plan: {0}")]
    InvalidPlan(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
