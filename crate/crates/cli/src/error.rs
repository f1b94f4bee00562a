use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },

    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid override {0}")]
    Override(String),

    #[error("usage: {0}")]
    Usage(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error(transparent)]
    Core(#[from] cqlqg_core::Error),
}

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_NOT_CONVERGED: u8 = 2;
pub const EXIT_INVALID: u8 = 3;
pub const EXIT_PARSE: u8 = 4;

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use cqlqg_core::Error as E;
        match self {
            CliError::Read { .. } | CliError::Parse(_) | CliError::Override(_) | CliError::Usage(_) => EXIT_PARSE,
            CliError::Write { .. } => EXIT_FAILURE,
            CliError::Validation(_) => EXIT_INVALID,
            CliError::Core(e) => match e {
                E::NotConverged { .. } => EXIT_NOT_CONVERGED,
                E::DimensionMismatch(_)
                | E::InvalidDimensions(_)
                | E::LengthMismatch { .. }
                | E::SingularK1
                | E::NonSymmetricR(_)
                | E::InvalidConfig(_)
                | E::Precondition(_) => EXIT_INVALID,
                E::SingularOperator { .. } | E::IndefiniteOperator { .. } | E::NonFiniteState { .. } => EXIT_FAILURE,
            },
        }
    }
}
