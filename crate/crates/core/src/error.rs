use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("exponent p = {0} is not supported here")]
    UnsupportedExponent(f64),

    #[error("weight mean {mean:e} is indistinguishable from zero (stderr {stderr:e})")]
    DegenerateWeight { mean: f64, stderr: f64 },

    #[error("matrix is not symmetric: max |a_ij - a_ji| = {0:e}")]
    Asymmetric(f64),

    #[error("size {size} exceeds the limit {limit}")]
    SizeLimit { size: usize, limit: usize },

    #[error("quadrature did not certify: refinement delta {delta:e} > {tol:e}")]
    OracleUncertified { delta: f64, tol: f64 },

    #[error("moment order alpha = {alpha} is outside the admissible range for p = {p}")]
    AlphaOutOfRange { alpha: f64, p: f64 },
}
