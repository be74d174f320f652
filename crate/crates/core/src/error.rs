use thiserror::Error;

/// Errors produced by the construction and verification routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("columns are not orthonormal (deviation {0:.3e})")]
    NotOrthonormal(f64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid POVM: {0}")]
    InvalidPovm(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid stochastic map: {0}")]
    InvalidStochasticMap(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("verification failed: {0}")]
    Verification(String),

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
