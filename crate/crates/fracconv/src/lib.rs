//! Discrete convolution with power-law kernels `k_a(t) = t^(a-1) / Gamma(a)`,
//! covering fractional integrals (`a > 0`) and fractional derivatives
//! (`a < 0`, finite-part sense), plus time steppers for fractional
//! differential equations built on those operators.
//!
//! Two interchangeable evaluators are provided:
//!
//! * [`direct::DirectConvolution`] — the O(n²) reference scheme: piecewise
//!   polynomial reconstruction of the input history and exact integration of
//!   kernel × polynomial on every past interval.
//! * [`fast::FastConvolution`] — the O(n log n)-total scheme: the recent past
//!   is handled exactly like the direct scheme, while the remote history is
//!   compressed into a sum of decaying exponentials (truncated Gauss–Laguerre
//!   quadrature on the kernel's Laplace representation) updated recursively.
//!
//! Both support starting-weight corrections that restore full order when the
//! input has an algebraic singularity at t = 0, which is the generic situation
//! for solutions of fractional differential equations.

pub mod corrections;
pub mod direct;
pub mod error;
pub mod fast;
pub mod fde;
pub mod interp;
mod linalg;
pub mod quadrature;
pub mod specfun;

pub use corrections::{Corrected, CorrectionSet};
pub use direct::DirectConvolution;
pub use error::{Error, Result};
pub use fast::{FastConvolution, FastParams};
pub use fde::{
    graded_l1_solve, linear_relaxation_solution, solve_fde_system, solve_scalar_fde, FdeProblem,
    OperatorChoice, SolverConfig, Trajectory,
};
pub use interp::InterpKind;
pub use quadrature::QuadratureRule;

/// Common interface of the discrete convolution evaluators.
///
/// Samples are appended in step order (`u_0, u_1, ...` on the uniform grid
/// `t_j = j tau`); the operator value at the newest step is an affine function
/// of the newest sample, which is what implicit time steppers need.  The
/// direct evaluator additionally supports evaluation at any past step; the
/// fast evaluator only at the current one, so generic code should treat the
/// interface as sequential.  Evaluation takes `&mut self` because several
/// implementations maintain internal caches (starting-weight memos, running
/// decay factors); exclusive access makes those trivially race-free.
pub trait HistoryOp {
    /// Kernel order `a < 1` (negative for derivatives).
    fn alpha(&self) -> f64;
    /// Grid spacing.
    fn tau(&self) -> f64;
    /// Number of components per sample.
    fn dim(&self) -> usize;
    /// Number of samples pushed so far.
    fn len(&self) -> usize;
    /// Append the sample with index `len()`.
    fn push_sample(&mut self, u: &[f64]) -> Result<()>;
    /// Operator value at step `n` (requires samples through `u_n`).
    fn eval(&mut self, n: usize) -> Result<Vec<f64>>;
    /// Operator value at step `n` as `(known, lin)` with value
    /// `known + lin * u_n`, where `u_n` is not yet pushed (`len() == n`).
    fn affine_eval(&mut self, n: usize) -> Result<(Vec<f64>, f64)>;
}
