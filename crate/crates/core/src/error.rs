use thiserror::Error;

/// Errors raised while building models, grids, or running the pricer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid grid specification: {0}")]
    InvalidSpec(String),

    #[error("limit boundary does not exist: r >= lambda * E[(e^Z - 1)^+]")]
    ConditionNotMet,

    #[error("discretized jump mass {mass:.6} below minimum {min:.6}; widen the jump interval")]
    MassTooLow { mass: f64, min: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("mesh too coarse: p_minus = {p_minus:.3e}, p_plus = {p_plus:.3e} (both must be positive)")]
    MeshTooCoarse { p_minus: f64, p_plus: f64 },

    #[error("matrix violates M-matrix sign structure at row {row}")]
    InvalidStructure { row: usize },

    #[error("singular tridiagonal system at row {row}")]
    SingularMatrix { row: usize },

    #[error("{what} did not converge after {iterations} iterations (last change {last_change:.3e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        last_change: f64,
        trace: Vec<f64>,
    },

    #[error("oracle requires {0}")]
    WrongModel(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;
