use thiserror::Error;

/// Errors raised by fabric evaluation, regulation and simulation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FabricError {
    /// A metric that must be inverted is not strictly positive definite.
    #[error("singular metric: min eigenvalue {min_eigenvalue:e} vs max {max_eigenvalue:e}")]
    SingularMetric {
        min_eigenvalue: f64,
        max_eigenvalue: f64,
    },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    /// `q̇ᵀ M_L q̇` is too small for the exact energization formula.
    #[error("degenerate velocity: qd^T M qd = {z:e} is below {threshold:e}")]
    DegenerateVelocity { z: f64, threshold: f64 },

    #[error("energy evaluation failed: {0}")]
    EvaluationFailure(String),

    #[error("degenerate denominator {value:e} in {context}")]
    DegenerateDenominator { context: &'static str, value: f64 },

    #[error("non-finite state at step {step}")]
    NonFiniteState { step: usize },

    #[error("path arc length {length:e} is below threshold")]
    DegeneratePath { length: f64 },

    #[error("initial energy {energy:e} is below threshold")]
    DegenerateEnergy { energy: f64 },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, FabricError>;

pub(crate) fn check_dim(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(FabricError::DimensionMismatch {
            context,
            expected,
            found,
        })
    }
}
