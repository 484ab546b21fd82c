use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid space: {0}")]
    InvalidSpace(String),

    #[error("operands live on different spaces")]
    SpaceMismatch,

    #[error("guard {guard} exceeds the usable headroom of n_max = {n_max}")]
    GuardExhausted { n_max: usize, guard: usize },

    #[error("spectral parameter {at} lies within the exclusion radius of pole {pole}")]
    PoleCollision { at: Complex64, pole: Complex64 },

    #[error("invalid parameter `{key}`: {reason}")]
    InvalidParameter { key: String, reason: String },

    #[error("inhomogeneity parameters must be pairwise distinct (epsilon[{first}] == epsilon[{second}])")]
    DuplicateEpsilon { first: usize, second: usize },

    #[error("sample matrix is ill-conditioned (condition number {condition:.3e})")]
    IllConditioned { condition: f64 },

    #[error("held-out residual {residual:.3e} exceeds tolerance {tolerance:.3e}")]
    FitRejected { residual: f64, tolerance: f64 },

    #[error("dimension {dim} exceeds the configured cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("eigenvalue iteration did not converge (dimension {dim})")]
    NoConvergence { dim: usize },

    #[error("sampling failed: {0}")]
    Sampling(String),
}
