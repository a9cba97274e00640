use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid proportions: {0}")]
    InvalidProportions(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("enumeration guard exceeded: {work:.3e} > limit {limit:.0e}")]
    Guard { work: f64, limit: f64 },
    #[error("no candidate is consistent with the observations")]
    Inconsistent,
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("formula regime violated: {0}")]
    Regime(String),
}

pub type Result<T> = std::result::Result<T, Error>;
