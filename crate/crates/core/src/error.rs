use thiserror::Error;

use crate::scattering::IterationDiagnostics;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field is in {found} representation, expected {expected}")]
    WrongRepresentation {
        expected: &'static str,
        found: &'static str,
    },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("singular symbol applied to a field with zero mode of magnitude {0:e}")]
    SingularZeroMode(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical abort at t = {time}: {reason}")]
    NumericalAbort { time: f64, reason: String },

    #[error("insufficient time sampling: {0}")]
    InsufficientSampling(String),

    #[error("iteration diverged after {} sweeps", .0.differences.len())]
    Diverged(Box<IterationDiagnostics>),

    #[error("malformed snapshot: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
