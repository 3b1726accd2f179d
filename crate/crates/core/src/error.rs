use thiserror::Error;

/// Errors produced by the simulation and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates the invariants of its type.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The input lies outside the domain where the model is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A grid or solver configuration cannot produce a meaningful result.
    #[error("configuration error: {0}")]
    Config(String),

    /// The time integrator failed (step size underflow, positivity loss).
    #[error("integrator failure: {0}")]
    Integrator(String),

    /// Degenerate input data.
    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad input or
    /// configuration).
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Integrator(_) | Error::Domain(_) | Error::Degenerate(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
