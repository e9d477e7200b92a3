use thiserror::Error;

/// Errors raised anywhere in the library.
///
/// Numeric variants (`NotHermitian`, `NotPositiveDefinite`, ...) almost always
/// point at a modelling bug upstream: every matrix handed to a factorization
/// is constructed, never measured.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not Hermitian (max |A_ij - conj(A_ji)| = {deviation:e})")]
    NotHermitian { deviation: f64 },
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("matrix has eigenvalue {eigenvalue:e} below tolerance {tolerance:e}")]
    IndefiniteBeyondTolerance { eigenvalue: f64, tolerance: f64 },
    #[error("correlation coefficient {0} outside [0, 1)")]
    InvalidRho(f64),
    #[error("ADMM penalty must be positive, got {0}")]
    InvalidPenalty(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("network has no base stations or no users")]
    EmptyNetwork,
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("regularization must be positive, got {0}")]
    InvalidBeta(f64),
    #[error("precoder is identically zero; power normalization undefined")]
    ZeroPrecoder,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("codec: {0}")]
    Codec(String),
}

pub type Result<T> = std::result::Result<T, Error>;
