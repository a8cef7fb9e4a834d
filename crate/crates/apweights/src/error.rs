//! Crate-wide error type with exit-code mapping for the command-line tool.

use thiserror::Error;

/// Everything that can go wrong across the crate.
///
/// Variants are grouped by the exit code they map to: configuration and
/// validation problems exit with 2, numerical non-convergence or detected
/// divergence with 3, failed verification assertions with 1.
#[derive(Error, Debug)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not Hermitian: max asymmetry {defect:.3e}")]
    NotHermitian { defect: f64 },

    #[error("matrix is not positive definite: min eigenvalue {min_eig:.3e}")]
    NotPositiveDefinite { min_eig: f64 },

    #[error("matrix dimension {m} exceeds limit {limit}")]
    MatrixTooLarge { m: usize, limit: usize },

    #[error("ill-conditioned matrix power: eigenvalue ratio {ratio:.3e}")]
    IllConditioned { ratio: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("weight evaluated at singular point {0:?} with negative effective exponent")]
    SingularEvaluation(Vec<f64>),

    #[error("integrand returned a non-finite value at {0:?}")]
    NonFiniteIntegrand(Vec<f64>),

    #[error("log average of a non-positive integrand at {0:?}")]
    NonPositiveLog(Vec<f64>),

    #[error("integral diverges near {near:?}: shell ratio {ratio:.4}")]
    Divergent { near: Vec<f64>, ratio: f64 },

    #[error("quadrature did not converge: achieved {achieved:.3e}, requested {requested:.3e}")]
    NoConvergence { achieved: f64, requested: f64 },

    #[error("ellipsoid fit did not reach gap {requested:.1e} (achieved {achieved:.1e})")]
    EllipsoidNoConvergence { achieved: f64, requested: f64 },

    #[error("verification assertion failed: {0}")]
    AssertionFailed(String),

    #[error("regression rejected: max residual {residual:.3} exceeds {limit:.3}")]
    RegressionRejected { residual: f64, limit: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("toml error: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    /// Process exit code for the CLI: 1 failed assertion, 2 bad
    /// configuration, 3 numerical non-convergence or divergence.
    pub fn exit_code(&self) -> i32 {
        use Error::*;
        match self {
            AssertionFailed(_) | RegressionRejected { .. } => 1,
            Divergent { .. }
            | NoConvergence { .. }
            | EllipsoidNoConvergence { .. }
            | NonFiniteIntegrand(_)
            | NonPositiveLog(_)
            | SingularEvaluation(_)
            | IllConditioned { .. } => 3,
            _ => 2,
        }
    }
}
