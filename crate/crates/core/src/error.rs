//! Error taxonomy shared by all modules.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes of validation, decomposition and design routines.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// Malformed input: dimension mismatch, out-of-range parameter, empty model.
    #[error("invalid input: {0}")]
    Validation(String),

    /// A matrix that must be Hermitian is not, beyond tolerance.
    #[error("matrix is not Hermitian (max asymmetry {max_asymmetry:.3e})")]
    NotHermitian { max_asymmetry: f64 },

    /// A matrix that must be positive semidefinite has a significantly
    /// negative eigenvalue.
    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPsd { min_eigenvalue: f64 },

    /// A matrix that must be positive definite is numerically singular.
    #[error("matrix is near-singular (min eigenvalue {min_eigenvalue:.3e})")]
    IllConditioned { min_eigenvalue: f64 },

    /// Argument outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Every effective stream gain of a hop is zero; no power can be placed.
    #[error("hop {hop} has no usable streams (all effective gains are zero)")]
    DegenerateChannel { hop: usize },

    /// The closed-form precoder scaling has a nonpositive denominator.
    #[error("infeasible precoder structure: {0}")]
    InfeasibleStructure(String),

    /// A cross-check that must hold by construction failed; indicates a bug.
    #[error("internal consistency check failed: {0}")]
    InternalConsistency(String),

    /// An iterative decomposition failed to converge.
    #[error("numerical failure: {0}")]
    Numerical(&'static str),
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
