use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("pole: {0}")]
    Pole(String),

    #[error("quadrature did not reach tolerance: {0}")]
    Quadrature(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("capacity exceeded: expected {expected:.3e} particles, cap {cap:.3e}")]
    Capacity { expected: f64, cap: f64 },

    #[error("bandwidth out of range: {0}")]
    Bandwidth(String),

    #[error("horizon too small: {0}")]
    Horizon(String),

    #[error("spectral truncation failed: {0}")]
    Truncation(String),

    #[error("lag out of range: {0}")]
    LagOutOfRange(String),

    #[error("lag resolution too coarse: {0}")]
    Resolution(String),

    #[error("estimation failure: {0}")]
    EstimationFailure(String),

    #[error("ill-conditioned system: condition number {0:.3e}")]
    IllConditioned(f64),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the CLI for failures coming out of the
    /// numerical layer (usage errors are handled by the argument parser).
    pub fn exit_code(&self) -> i32 {
        3
    }
}
