//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller violated an operation precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A configuration document failed to parse.
    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    /// A configuration violated a declared invariant.
    #[error("invalid config: {0}")]
    Validation(String),

    #[error("unknown scenario `{0}` (expected basic, brownian, long_time or fast_cue)")]
    UnknownScenario(String),

    /// Rejection sampling could not place all disks without overlap.
    #[error("packing infeasible: gave up after {attempts} placement attempts")]
    PackingInfeasible { attempts: u64 },

    /// The simulation reached a state that should be unreachable; always a bug.
    #[error("internal consistency error: {0}")]
    Internal(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn internal(msg: impl Into<String>) -> Self {
        Error::Internal(msg.into())
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
