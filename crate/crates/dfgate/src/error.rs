//! Crate-wide error type.

use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    #[error("site index {site} out of range for an {n}-site register (sites are 1-based)")]
    SiteOutOfRange { site: usize, n: usize },

    #[error("pair ({i}, {j}) is invalid: sites must be distinct")]
    InvalidPair { i: usize, j: usize },

    #[error("expected {expected} distinct sites, got {got}")]
    WrongSiteCount { expected: usize, got: usize },

    #[error("matrix dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("operator is not Hermitian (max-norm residual {residual:.3e})")]
    NotHermitian { residual: f64 },

    #[error("operation requires the {expected} encoding")]
    WrongEncoding { expected: &'static str },

    #[error("ring fraction is undefined for a sequence without a symmetric pulse")]
    UndefinedRingFraction,

    #[error(
        "split infeasible: need alpha_a > alpha^(n) > alpha_b, got \
         alpha_a = {alpha_a}, alpha^(n) = {alpha_n}, alpha_b = {alpha_b}"
    )]
    InfeasibleSplit { alpha_a: f64, alpha_n: f64, alpha_b: f64 },

    #[error("local-frame calibration failed: {0}")]
    Calibration(String),

    #[error("projected gate is too far from unitary (residual {residual:.3e}); \
             the evolution leaks out of the logical subspace")]
    DegenerateProjection { residual: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Linalg(#[from] ndarray_linalg::error::LinalgError),
}
