use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("form is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("doubled Gram matrix has an odd diagonal entry at position {0}")]
    OddDiagonal(usize),

    #[error("invalid dimensions: {0}")]
    Dimension(String),

    #[error("vectors are linearly dependent")]
    DependentVectors,

    #[error("zero polynomial where a nonzero one is required")]
    ZeroPolynomial,

    #[error("{0} is not an odd prime")]
    NotOddPrime(u64),

    #[error("the two representations belong to different binary forms")]
    FormMismatch,

    #[error("representation is not primitive")]
    NotPrimitive,

    #[error("representation has rank {0} < 2")]
    RankDeficient(usize),

    #[error("internal inconsistency: {0}")]
    Inconsistent(String),

    #[error("budget exceeded: {0}")]
    Budget(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("auxiliary prime {ell} too small: auxiliary degree would exceed cap {cap}")]
    EllTooSmall { ell: u64, cap: usize },

    #[error("arithmetic overflow in {0}")]
    Overflow(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;
