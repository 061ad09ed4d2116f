use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("length {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("state is not normalized (norm^2 = {0})")]
    NotNormalized(f64),

    #[error("operator is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("trotter step count must be at least 1")]
    ZeroTrotterSteps,

    #[error("invalid probability distribution: {0}")]
    InvalidDistribution(String),

    #[error("numerically invalid Fisher matrix: regularized determinant {0:e} is not positive")]
    InvalidFisherMatrix(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
