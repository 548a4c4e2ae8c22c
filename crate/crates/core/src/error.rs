use thiserror::Error;

/// Errors raised while constructing market primitives or running the solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid market parameters: {0}")]
    InvalidParams(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid interval [{lo}, {hi}]: endpoints must satisfy 0 <= lo <= hi <= 1")]
    InvalidInterval { lo: f64, hi: f64 },
    #[error("invalid price {0}: prices must be finite and non-negative")]
    InvalidPrice(f64),
    #[error("uniform price {price} is not a no-sharing best response (best objective {best}, got {got})")]
    NotBestResponse { price: f64, best: f64, got: f64 },
    #[error("no individually rational transfer exists: r_min {r_min} > r_max {r_max}")]
    EmptyTransferInterval { r_min: f64, r_max: f64 },
    #[error("outcomes were computed from different market primitives")]
    MismatchedPrimitives,
    #[error("invalid oracle grid: {0}")]
    InvalidGrid(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("candidate is not a threat-free equilibrium: {0}")]
    NotTfne(String),
}

pub type Result<T> = std::result::Result<T, Error>;
