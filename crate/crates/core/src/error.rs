use thiserror::Error;

/// Library-wide error type. Variants are grouped by where they originate:
/// construction-time validation, evaluation-time domain checks, and
/// solver-time failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid parameter set: {0}")]
    InvalidParamSet(String),

    #[error("invalid quadrature settings: {0}")]
    InvalidQuadrature(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("integrand returned a non-finite value near t = {t:.6e}")]
    NonFiniteSample { t: f64 },

    #[error("usage error: {0}")]
    Usage(String),

    #[error(
        "line search stalled after {iterations} iterations (gradient norm {grad_norm:.3e}); \
         iterate: {coefficients:?}"
    )]
    LineSearchFailed {
        iterations: usize,
        grad_norm: f64,
        coefficients: Vec<f64>,
    },

    #[error("failed to bracket a root for the constraint multiplier: {0}")]
    BracketFailed(String),

    #[error("degenerate boundary-value problem: {0}")]
    DegenerateBvp(String),
}

pub type Result<T> = std::result::Result<T, Error>;
