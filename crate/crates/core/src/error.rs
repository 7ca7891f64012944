use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A model, history or integrator setting violates its invariants.
    #[error("configuration error: {0}")]
    Config(String),

    /// The integrator produced a non-finite state.
    #[error("integration failed at t = {time}: {reason}")]
    Integration { time: f64, reason: String },

    /// The hypotheses of a theorem-backed computation do not hold.
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    /// Two independent evaluation routes disagree.
    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    /// Initial data rejected by validation.
    #[error("initial data rejected: agent {agent}, t = {time}, residual {residual:e}")]
    InitialData { agent: usize, time: f64, residual: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
