//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HilError {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("{what} is singular or not positive-definite")]
    SingularMatrix { what: &'static str },

    #[error("singular configuration: {0}")]
    SingularConfiguration(String),

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("simulation aborted at step {step} (t = {t:.6} s): {reason}")]
    SimulationAbort { step: usize, t: f64, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl HilError {
    pub fn invalid_config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        HilError::InvalidConfig {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for errors that indicate a bad configuration rather than a runtime
    /// failure; the CLI maps these to exit code 2.
    pub fn is_config_error(&self) -> bool {
        matches!(self, HilError::InvalidConfig { .. })
    }
}

pub type Result<T> = std::result::Result<T, HilError>;
