use thiserror::Error;

/// Errors raised by the synthesis library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("operator is singular (condition estimate {condition:.3e})")]
    SingularOperator { condition: f64 },

    #[error("operator is not positive definite (minimum eigenvalue {min_eigenvalue:.3e})")]
    IndefiniteOperator { min_eigenvalue: f64 },

    #[error("plant CCR matrix K1 is singular or not antisymmetric")]
    SingularK1,

    #[error("Hamiltonian parameter R is not symmetric (asymmetry {0:.3e})")]
    NonSymmetricR(f64),

    #[error("non-finite state encountered at node {node}")]
    NonFiniteState { node: usize },

    #[error("solver did not converge after {iterations} iterations (gain delta {gain_delta:.3e})")]
    NotConverged { iterations: usize, gain_delta: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn mismatch(what: impl Into<String>) -> Error {
    Error::DimensionMismatch(what.into())
}
