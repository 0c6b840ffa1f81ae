use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("loss {0} is not differentiable")]
    NotDifferentiable(&'static str),

    #[error("non-finite value {value} at coordinate {index} of {what}")]
    NonFinite {
        what: &'static str,
        index: usize,
        value: f64,
    },

    #[error("chain diverged at step {step}: |w[{index}]| = {value:e} exceeds {threshold:e}")]
    Diverged {
        step: usize,
        index: usize,
        value: f64,
        threshold: f64,
    },

    #[error("quadrature did not converge: achieved error estimate {achieved:e}, requested {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("{path}: {message} at byte offset {offset}")]
    Idx {
        path: PathBuf,
        offset: u64,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Rejects the first non-finite entry of `values`.
pub(crate) fn ensure_finite(what: &'static str, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite {
            what,
            index,
            value: values[index],
        }),
        None => Ok(()),
    }
}
