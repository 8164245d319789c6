use thiserror::Error;

/// Errors surfaced by the steering library.
#[derive(Debug, Error)]
pub enum SteeringError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("system not controllable over the horizon: {0}")]
    Uncontrollable(String),

    #[error("ill-conditioned matrix in {context}: reciprocal condition {rcond:.3e}")]
    IllConditioned { context: &'static str, rcond: f64 },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("infeasible problem: {0}")]
    Infeasible(String),
}

pub type Result<T> = std::result::Result<T, SteeringError>;
