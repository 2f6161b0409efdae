//! Error type shared by every module of the crate.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes of the numerical routines.
///
/// Domain violations that a caller can always avoid (e.g. a non-finite step
/// size) are reported as [`Error::InvalidParameter`]; genuinely numerical
/// failures (an iteration that did not converge, an accuracy target that the
/// algorithm could not certify) get their own variants so callers can react
/// differently.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// The gamma function was evaluated at a pole (0, -1, -2, ...).
    #[error("gamma function pole at {0}")]
    GammaPole(f64),

    /// A parameter is outside the documented domain of an operation.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A result was produced but its estimated accuracy misses the target.
    #[error("accuracy target {requested:.3e} not certified (estimate {achieved:.3e})")]
    AccuracyFailure { requested: f64, achieved: f64 },

    /// An iterative eigenvalue or root solve ran out of iterations.
    #[error("iteration failed to converge: {0}")]
    ConvergenceFailure(String),

    /// A linear system for correction weights is singular or too ill
    /// conditioned to solve.
    #[error("singular correction system: {0}")]
    SingularSystem(String),

    /// An operation was called in a state that cannot serve it (samples
    /// missing, clock moved backwards, horizon exceeded, ...).
    #[error("invalid operator state: {0}")]
    State(String),

    /// The implicit step solver did not reach its residual tolerance.
    #[error("Newton iteration failed at step {step} (t = {t:.6e}); residual {residual:.3e}")]
    NewtonFailure { step: usize, t: f64, residual: f64 },
}
