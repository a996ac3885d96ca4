use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("oracle produced a non-finite {what}")]
    NonFinite { what: &'static str },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("point lies outside the feasible domain")]
    Infeasible,

    /// The inner conditional-gradient loop did not certify its target.
    /// Usually means `c` is too small for the variation of the Hessian.
    #[error("inner loop hit its cap of {cap} iterations (best gap {best_gap:e}, target {target:e})")]
    InnerCapExceeded { cap: usize, best_gap: f64, target: f64 },

    #[error("form is not positive semidefinite (smallest eigenvalue {0:e})")]
    NotPositiveSemidefinite(f64),

    #[error("operation requires {0}")]
    Unsupported(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;
