use thiserror::Error;

use crate::flow::Trajectory;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("non-finite coordinate at index {index}")]
    NonFinite { index: usize },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("{what} is outside {set} (distance {distance:.3e})")]
    NotMember { what: String, set: String, distance: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("iteration did not converge after {iterations} steps (last gap {last_gap:.3e})")]
    NotConverged { iterations: usize, last_gap: f64 },

    /// The adaptive integrator could not take a step; `partial` holds
    /// everything recorded before the failure.
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64, partial: Box<Trajectory> },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
}
