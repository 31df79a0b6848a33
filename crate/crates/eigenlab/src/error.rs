use thiserror::Error;

/// Error type shared by all modules of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("coefficient field: {0}")]
    Coefficient(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("factorization failed: {0}")]
    Factorization(String),
    #[error("iteration limit exceeded: {0}")]
    IterationLimit(String),
    #[error("inconsistent right-hand side: {0}")]
    Consistency(String),
    #[error("quadrature resolution insufficient: {0}")]
    Resolution(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
