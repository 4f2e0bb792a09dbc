use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("input contains NaN")]
    NotANumber,
    #[error("enumeration too large: {0}")]
    SizeGuard(String),
    #[error("matrix is rank deficient")]
    RankDeficient,
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("degenerate relaxation: {0}")]
    Degenerate(String),
    #[error("non-positive precoding factor {0:e}")]
    NonPositiveBeta(f64),
    #[error("solver failed: {0}")]
    Solver(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
