//! Implicit time steppers for fractional differential equations.
//!
//! The problems are of Caputo type,
//!
//! ```text
//! D_C^a u(t) = f(u, t),   u(0) = u_0,   0 < a <= 1,
//! ```
//!
//! componentwise for systems (each component may carry its own order).  The
//! Caputo derivative is realized through the finite-part convolution
//! operator with kernel order `-a` minus the initial-value term
//! `u_0 t^(-a) / Gamma(1-a)`, discretized by either the direct or the fast
//! evaluator with optional starting-weight corrections.  Each step solves the
//! resulting nonlinear equation by Newton's method; the discrete operator is
//! affine in the newest sample, so its contribution to the Jacobian is a
//! fixed diagonal.
//!
//! Also included: a graded-mesh L1 baseline solver for comparison and the
//! closed-form solution of the scalar linear problem via the Mittag-Leffler
//! function.

use std::io::Write;

use crate::corrections::CorrectionSet;
use crate::direct::DirectConvolution;
use crate::error::{Error, Result};
use crate::fast::{FastConvolution, FastParams};
use crate::interp::InterpKind;
use crate::specfun::{mittag_leffler, recip_gamma};
use crate::{linalg, Corrected, HistoryOp};

/// Right-hand side: `f(state, t, out)` fills `out` with `f_k(state, t)`.
pub type Rhs = Box<dyn Fn(&[f64], f64, &mut [f64]) + Send + Sync>;
/// Jacobian: `jac(state, t, out)` fills `out` (row-major d×d) with
/// `∂f_k/∂u_l`.
pub type Jacobian = Box<dyn Fn(&[f64], f64, &mut [f64]) + Send + Sync>;

/// An initial-value problem for a (system of) Caputo-type equations.
pub struct FdeProblem {
    alphas: Vec<f64>,
    u0: Vec<f64>,
    rhs: Rhs,
    jacobian: Option<Jacobian>,
}

impl FdeProblem {
    /// General constructor; `jacobian` may be omitted (a finite-difference
    /// approximation is used instead).
    pub fn new(
        alphas: Vec<f64>,
        u0: Vec<f64>,
        rhs: Rhs,
        jacobian: Option<Jacobian>,
    ) -> Result<Self> {
        if alphas.is_empty() || alphas.len() != u0.len() {
            return Err(Error::InvalidParameter(format!(
                "component counts disagree: {} orders, {} initial values",
                alphas.len(),
                u0.len()
            )));
        }
        for &a in &alphas {
            if !(a > 0.0 && a <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "fractional order must lie in (0, 1], got {a}"
                )));
            }
        }
        if !u0.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter(
                "initial values must be finite".into(),
            ));
        }
        Ok(FdeProblem {
            alphas,
            u0,
            rhs,
            jacobian,
        })
    }

    /// Scalar problem from plain `f(u, t)` (and optionally `df/du`).
    pub fn scalar(
        alpha: f64,
        u0: f64,
        f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        dfdu: Option<Box<dyn Fn(f64, f64) -> f64 + Send + Sync>>,
    ) -> Result<Self> {
        let rhs: Rhs = Box::new(move |u, t, out| out[0] = f(u[0], t));
        let jacobian = dfdu.map(|d| -> Jacobian { Box::new(move |u, t, out| out[0] = d(u[0], t)) });
        FdeProblem::new(vec![alpha], vec![u0], rhs, jacobian)
    }

    /// The linear relaxation problem `D_C^a u = -a_coef * u`, `u(0) = 1`,
    /// whose exact solution is [`linear_relaxation_solution`].
    pub fn linear_relaxation(alpha: f64, a_coef: f64) -> Result<Self> {
        FdeProblem::scalar(
            alpha,
            1.0,
            move |u, _| -a_coef * u,
            Some(Box::new(move |_, _| -a_coef)),
        )
    }

    /// The cubic decay problem `D_C^a u = -u + u(1 - u^2) = -u^3`,
    /// `u(0) = 1` — the standard nonlinear long-run benchmark.
    pub fn cubic_decay(alpha: f64) -> Result<Self> {
        FdeProblem::scalar(
            alpha,
            1.0,
            |u, _| -u * u * u,
            Some(Box::new(|u, _| -3.0 * u * u)),
        )
    }

    /// The fractional Lorenz-type system
    ///
    /// ```text
    /// D^a1 u = w + (v - c1) u
    /// D^a2 v = 1 - c2 v - u^2
    /// D^a3 w = -u - c3 w
    /// ```
    ///
    /// with the dissipative parameter choice c = (1/4, 1, 1/4) and initial
    /// state (2, 0.9, 0.2); its absorbing set is the ball of radius sqrt(2).
    pub fn lorenz(alphas: [f64; 3]) -> Result<Self> {
        let (c1, c2, c3) = (0.25, 1.0, 0.25);
        let rhs: Rhs = Box::new(move |s, _, out| {
            let (u, v, w) = (s[0], s[1], s[2]);
            out[0] = w + (v - c1) * u;
            out[1] = 1.0 - c2 * v - u * u;
            out[2] = -u - c3 * w;
        });
        let jacobian: Jacobian = Box::new(move |s, _, out| {
            let (u, v) = (s[0], s[1]);
            out.copy_from_slice(&[v - c1, u, 1.0, -2.0 * u, -c2, 0.0, -1.0, 0.0, -c3]);
        });
        FdeProblem::new(vec![alphas[0], alphas[1], alphas[2]], vec![2.0, 0.9, 0.2], rhs, Some(jacobian))
    }

    pub fn dim(&self) -> usize {
        self.alphas.len()
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn initial_state(&self) -> &[f64] {
        &self.u0
    }

    fn eval_rhs(&self, state: &[f64], t: f64, out: &mut [f64]) {
        (self.rhs)(state, t, out);
    }

    /// Analytic Jacobian if provided, else forward differences with step
    /// `1e-7 (1 + |u_l|)` per column.
    fn eval_jacobian(&self, state: &[f64], t: f64, out: &mut [f64]) {
        if let Some(jac) = &self.jacobian {
            jac(state, t, out);
            return;
        }
        let d = self.dim();
        let mut base = vec![0.0; d];
        self.eval_rhs(state, t, &mut base);
        let mut shifted = state.to_vec();
        let mut col = vec![0.0; d];
        for l in 0..d {
            let h = 1e-7 * (1.0 + state[l].abs());
            shifted[l] = state[l] + h;
            self.eval_rhs(&shifted, t, &mut col);
            shifted[l] = state[l];
            for k in 0..d {
                out[k * d + l] = (col[k] - base[k]) / h;
            }
        }
    }
}

/// Which convolution engine drives the solver.
#[derive(Debug, Clone, PartialEq)]
pub enum OperatorChoice {
    /// Quadratic-cost reference evaluator.
    Direct,
    /// Compressed-history evaluator.
    Fast {
        basis: usize,
        delta_t: f64,
        eps: f64,
        eps0: f64,
    },
}

/// Solver parameters.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub tau: f64,
    pub kind: InterpKind,
    /// Number of starting-weight correction terms; exponents default to
    /// `sigma_k = k * alpha` per component.
    pub corrections: usize,
    /// Override the correction exponents (shared by all components).
    pub sigma_override: Option<Vec<f64>>,
    pub operator: OperatorChoice,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
}

impl SolverConfig {
    pub fn direct(tau: f64) -> Self {
        SolverConfig {
            tau,
            kind: InterpKind::Quadratic,
            corrections: 0,
            sigma_override: None,
            operator: OperatorChoice::Direct,
            newton_tol: 1e-12,
            newton_max_iter: 50,
        }
    }

    pub fn fast(tau: f64, basis: usize, delta_t: f64, eps: f64) -> Self {
        SolverConfig {
            operator: OperatorChoice::Fast {
                basis,
                delta_t,
                eps,
                eps0: 1e-16,
            },
            ..SolverConfig::direct(tau)
        }
    }

    pub fn with_corrections(mut self, m: usize) -> Self {
        self.corrections = m;
        self
    }

    pub fn with_kind(mut self, kind: InterpKind) -> Self {
        self.kind = kind;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "step size must be positive, got {}",
                self.tau
            )));
        }
        if !(self.newton_tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "Newton tolerance must be positive, got {}",
                self.newton_tol
            )));
        }
        if self.newton_max_iter == 0 {
            return Err(Error::InvalidParameter(
                "Newton iteration cap must be at least 1".into(),
            ));
        }
        Ok(())
    }

    fn sigmas_for(&self, alpha: f64) -> Result<CorrectionSet> {
        match &self.sigma_override {
            Some(s) if self.corrections > 0 => CorrectionSet::new(s.clone()),
            _ if self.corrections == 0 => Ok(CorrectionSet::none()),
            _ => CorrectionSet::multiples_of(alpha, self.corrections),
        }
    }

    fn min_scheme_step(&self) -> usize {
        match self.kind {
            InterpKind::Linear => 1,
            InterpKind::Quadratic => 2,
        }
    }
}

/// A computed discrete solution on the uniform grid `t_n = n tau` (or on a
/// graded mesh for the L1 baseline).
#[derive(Debug, Clone)]
pub struct Trajectory {
    dim: usize,
    times: Vec<f64>,
    /// Step-major component values.
    values: Vec<f64>,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn time(&self, n: usize) -> f64 {
        self.times[n]
    }

    pub fn state(&self, n: usize) -> &[f64] {
        &self.values[n * self.dim..(n + 1) * self.dim]
    }

    /// Largest absolute deviation of component 0 from `exact(t)` over the
    /// whole trajectory.
    pub fn max_error(&self, exact: impl Fn(f64) -> f64) -> f64 {
        (0..self.len())
            .map(|n| (self.state(n)[0] - exact(self.time(n))).abs())
            .fold(0.0, f64::max)
    }

    /// Deviation of component 0 from `exact` at the final time.
    pub fn final_error(&self, exact: impl Fn(f64) -> f64) -> f64 {
        let n = self.len() - 1;
        (self.state(n)[0] - exact(self.time(n))).abs()
    }

    /// Write `n,t,U[,V,W]` rows with 17 significant digits.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        let names = ["U", "V", "W"];
        let mut header = String::from("n,t");
        for c in 0..self.dim {
            header.push(',');
            if c < names.len() {
                header.push_str(names[c]);
            } else {
                header.push_str(&format!("U{c}"));
            }
        }
        writeln!(w, "{header}")?;
        for n in 0..self.len() {
            write!(w, "{n},{:.16e}", self.time(n))?;
            for c in 0..self.dim {
                write!(w, ",{:.16e}", self.state(n)[c])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Exact solution of `D_C^a u = -a_coef u`, `u(0) = 1`: the one-parameter
/// Mittag-Leffler function at `-a_coef t^a`.
pub fn linear_relaxation_solution(alpha: f64, a_coef: f64, t: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "fractional order must lie in (0, 1], got {alpha}"
        )));
    }
    if t == 0.0 {
        return Ok(1.0);
    }
    mittag_leffler(alpha, -a_coef * t.powf(alpha))
}

/// One Newton solve of the implicit step equation
/// `known_k + lin_k x_k - cap_k - f_k(x, t) = 0`.
#[allow(clippy::too_many_arguments)]
fn newton_step(
    problem: &FdeProblem,
    config: &SolverConfig,
    step: usize,
    t: f64,
    known: &[f64],
    lin: &[f64],
    caputo: &[f64],
    guess: &[f64],
) -> Result<Vec<f64>> {
    let d = problem.dim();
    let mut x = guess.to_vec();
    let mut fval = vec![0.0; d];
    let mut jf = vec![0.0; d * d];
    // The residual is judged relative to the size of its terms: the linear
    // coefficient grows like tau^(-a), so an absolute test would be
    // unattainable in double precision for very small steps.
    let scaled_norm = |res: &[f64], x: &[f64]| {
        res.iter()
            .zip(x)
            .zip(lin)
            .fold(0.0_f64, |m, ((r, xk), lk)| {
                if r.is_finite() {
                    m.max(r.abs() / (1.0 + (lk * xk).abs()))
                } else {
                    f64::INFINITY
                }
            })
    };
    let mut rnorm = f64::INFINITY;
    for _ in 0..config.newton_max_iter {
        problem.eval_rhs(&x, t, &mut fval);
        let residual: Vec<f64> = (0..d)
            .map(|k| known[k] + lin[k] * x[k] - caputo[k] - fval[k])
            .collect();
        rnorm = scaled_norm(&residual, &x);
        if rnorm <= config.newton_tol {
            return Ok(x);
        }
        if !rnorm.is_finite() {
            break;
        }
        problem.eval_jacobian(&x, t, &mut jf);
        let mut a = vec![vec![0.0; d]; d];
        for k in 0..d {
            for l in 0..d {
                a[k][l] = -jf[k * d + l];
            }
            a[k][k] += lin[k];
        }
        let delta = linalg::solve(a, residual)?;
        for k in 0..d {
            x[k] -= delta[k];
        }
    }
    Err(Error::NewtonFailure {
        step,
        t,
        residual: rnorm,
    })
}

/// Advance `ops` (one per component, already holding samples through step
/// `n-1`) by one implicit step and return the new state.
fn advance<Op: HistoryOp>(
    problem: &FdeProblem,
    config: &SolverConfig,
    ops: &mut [Op],
    n: usize,
    prev: &[f64],
) -> Result<Vec<f64>> {
    let d = problem.dim();
    let t = n as f64 * ops[0].tau();
    let mut known = vec![0.0; d];
    let mut lin = vec![0.0; d];
    let mut caputo = vec![0.0; d];
    for k in 0..d {
        let (kn, li) = ops[k].affine_eval(n)?;
        known[k] = kn[0];
        lin[k] = li;
        let a = problem.alphas[k];
        caputo[k] = problem.u0[k] * t.powf(-a) * recip_gamma(1.0 - a);
    }
    let state = newton_step(problem, config, n, t, &known, &lin, &caputo, prev)?;
    for k in 0..d {
        ops[k].push_sample(&[state[k]])?;
    }
    Ok(state)
}

fn build_direct_ops(
    problem: &FdeProblem,
    config: &SolverConfig,
) -> Result<Vec<Corrected<DirectConvolution>>> {
    let d = problem.dim();
    let mut ops = Vec::with_capacity(d);
    for k in 0..d {
        let a = problem.alphas[k];
        let base = DirectConvolution::new(-a, config.tau, config.tau, config.kind, 1)?;
        let set = config.sigmas_for(a)?;
        let companions = (0..set.m())
            .map(|_| DirectConvolution::new(-a, config.tau, config.tau, config.kind, 1))
            .collect::<Result<Vec<_>>>()?;
        ops.push(Corrected::new(base, set, companions)?);
    }
    Ok(ops)
}

fn build_fast_ops(
    problem: &FdeProblem,
    config: &SolverConfig,
    t_end: f64,
) -> Result<Vec<Corrected<FastConvolution>>> {
    let (basis, delta_t, eps, eps0) = match config.operator {
        OperatorChoice::Fast {
            basis,
            delta_t,
            eps,
            eps0,
        } => (basis, delta_t, eps, eps0),
        OperatorChoice::Direct => {
            return Err(Error::InvalidParameter(
                "fast operator bank requested for a direct-mode configuration".into(),
            ))
        }
    };
    let d = problem.dim();
    let mut ops = Vec::with_capacity(d);
    for k in 0..d {
        let a = problem.alphas[k];
        let params = FastParams {
            alpha: -a,
            tau: config.tau,
            delta_t,
            basis,
            eps,
            eps0,
            kind: config.kind,
            horizon: t_end + 4.0 * config.tau,
        };
        let make = || FastConvolution::new(params.clone(), 1);
        let base = make()?;
        let set = config.sigmas_for(a)?;
        let companions = (0..set.m()).map(|_| make()).collect::<Result<Vec<_>>>()?;
        ops.push(Corrected::new(base, set, companions)?);
    }
    Ok(ops)
}

/// Run the stepping loop with prepared operators and startup values.
fn run_loop<Op: HistoryOp>(
    problem: &FdeProblem,
    config: &SolverConfig,
    ops: &mut [Op],
    startup: &[Vec<f64>],
    n_t: usize,
) -> Result<Trajectory> {
    let d = problem.dim();
    let tau = config.tau;
    let mut times = Vec::with_capacity(n_t + 1);
    let mut values = Vec::with_capacity((n_t + 1) * d);
    for k in 0..d {
        ops[k].push_sample(&[problem.u0[k]])?;
    }
    times.push(0.0);
    values.extend_from_slice(&problem.u0);
    let mut prev = problem.u0.clone();
    for (i, state) in startup.iter().enumerate() {
        let n = i + 1;
        if n > n_t {
            break;
        }
        for k in 0..d {
            ops[k].push_sample(&[state[k]])?;
        }
        times.push(n as f64 * tau);
        values.extend_from_slice(state);
        prev = state.clone();
    }
    let first = times.len();
    for n in first..=n_t {
        let state = advance(problem, config, ops, n, &prev)?;
        times.push(n as f64 * tau);
        values.extend_from_slice(&state);
        prev = state;
    }
    Ok(Trajectory {
        dim: d,
        times,
        values,
    })
}

/// Solve the problem on `[0, T]` with `T = n_t * tau` (rounded to the
/// nearest step).
pub fn solve_fde(problem: &FdeProblem, config: &SolverConfig, t_end: f64) -> Result<Trajectory> {
    match config.operator {
        OperatorChoice::Direct => {
            config.validate()?;
            let n_t = steps_for(t_end, config.tau)?;
            let m = config.sigmas_for(problem.alphas[0])?.m();
            let warm = config.min_scheme_step().max(m).min(n_t);
            let startup = startup_values(problem, config, warm)?;
            let mut ops = build_direct_ops(problem, config)?;
            run_loop(problem, config, &mut ops, &startup, n_t)
        }
        OperatorChoice::Fast { .. } => {
            solve_fde_instrumented(problem, config, t_end).map(|report| report.trajectory)
        }
    }
}

/// Footprint of the compressed-operator bank measured after the final step.
#[derive(Debug, Clone)]
pub struct FastSolveReport {
    pub trajectory: Trajectory,
    /// Total floating-point state held by all operators (bases and
    /// correction companions alike).
    pub retained_reals: usize,
    /// Per-level structure of the first component's base operator.
    pub levels: Vec<crate::fast::LevelDiagnostics>,
}

/// Like [`solve_fde`] for a fast-operator configuration, but additionally
/// reports the memory footprint of the operator bank.
pub fn solve_fde_instrumented(
    problem: &FdeProblem,
    config: &SolverConfig,
    t_end: f64,
) -> Result<FastSolveReport> {
    config.validate()?;
    let n_t = steps_for(t_end, config.tau)?;
    let m = config.sigmas_for(problem.alphas[0])?.m();
    let warm = config.min_scheme_step().max(m).min(n_t);
    let startup = startup_values(problem, config, warm)?;
    let mut ops = build_fast_ops(problem, config, t_end)?;
    let trajectory = run_loop(problem, config, &mut ops, &startup, n_t)?;
    let mut retained = 0;
    for op in &ops {
        retained += op.base().retained_reals();
        for companion in op.companions() {
            retained += companion.retained_reals();
        }
    }
    let levels = ops[0].base().level_diagnostics();
    Ok(FastSolveReport {
        trajectory,
        retained_reals: retained,
        levels,
    })
}

/// Scalar-problem front end of [`solve_fde`].
pub fn solve_scalar_fde(
    problem: &FdeProblem,
    config: &SolverConfig,
    t_end: f64,
) -> Result<Trajectory> {
    if problem.dim() != 1 {
        return Err(Error::InvalidParameter(format!(
            "scalar solver invoked on a {}-component system",
            problem.dim()
        )));
    }
    solve_fde(problem, config, t_end)
}

/// System front end of [`solve_fde`] (one operator bank per component).
pub fn solve_fde_system(
    problem: &FdeProblem,
    config: &SolverConfig,
    t_end: f64,
) -> Result<Trajectory> {
    solve_fde(problem, config, t_end)
}

fn steps_for(t_end: f64, tau: f64) -> Result<usize> {
    if !(t_end > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "final time must be positive, got {t_end}"
        )));
    }
    let n = (t_end / tau).round();
    if !(n >= 1.0) || (t_end / tau - n).abs() > 1e-9 * n.max(1.0) {
        return Err(Error::InvalidParameter(format!(
            "final time {t_end} is not an integer multiple of the step size {tau}"
        )));
    }
    Ok(n as usize)
}

/// Compute the startup states `U_1..U_count` by a fine-grid linear-kind
/// direct solve with one correction term (exponent = the component's order).
/// Fine stepsize `tau/p`, `p = ceil(1/tau)` (at most `tau^2`), with the total
/// substep count capped at 10^6.
fn startup_values(
    problem: &FdeProblem,
    config: &SolverConfig,
    count: usize,
) -> Result<Vec<Vec<f64>>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    let d = problem.dim();
    let tau = config.tau;
    let mut p = (1.0 / tau).ceil().max(1.0) as usize;
    if count * p > 1_000_000 {
        p = (1_000_000 / count).max(1);
    }
    let fine_cfg = SolverConfig {
        tau: tau / p as f64,
        kind: InterpKind::Linear,
        corrections: 1,
        sigma_override: None,
        operator: OperatorChoice::Direct,
        ..config.clone()
    };
    let mut ops = build_direct_ops(problem, &fine_cfg)?;
    for k in 0..d {
        ops[k].push_sample(&[problem.u0[k]])?;
    }
    let mut prev = problem.u0.clone();
    let mut out = Vec::with_capacity(count);
    for fine_n in 1..=count * p {
        let state = advance(problem, &fine_cfg, &mut ops, fine_n, &prev)?;
        if fine_n % p == 0 {
            out.push(state.clone());
        }
        prev = state;
    }
    Ok(out)
}

/// L1 baseline on the graded mesh `t_j = ((j/M) T^(1/r))^r`, `j = 0..M`
/// (for `T = 1` this is `t_j = (j h)^r` with `h = 1/M`).  Linear
/// interpolation on each cell; implicit Euler-type step solved by Newton.
pub fn graded_l1_solve(
    problem: &FdeProblem,
    config: &SolverConfig,
    r: f64,
    steps: usize,
    t_end: f64,
) -> Result<Trajectory> {
    config.validate()?;
    if !(r >= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "grading exponent must be at least 1, got {r}"
        )));
    }
    if steps == 0 {
        return Err(Error::InvalidParameter("need at least one step".into()));
    }
    let d = problem.dim();
    let h = t_end.powf(1.0 / r) / steps as f64;
    let times: Vec<f64> = (0..=steps).map(|j| (j as f64 * h).powf(r)).collect();
    let mut values = Vec::with_capacity((steps + 1) * d);
    values.extend_from_slice(&problem.u0);
    let mut prev = problem.u0.clone();
    for n in 1..=steps {
        let t = times[n];
        // Caputo L1 on the nonuniform mesh: sum over cells of the slope
        // times the kernel difference.  Split off the coefficient of the
        // unknown U_n.
        let mut known = vec![0.0; d];
        let mut lin = vec![0.0; d];
        for k in 0..d {
            let a = problem.alphas[k];
            let rg = recip_gamma(2.0 - a);
            let mut acc = 0.0;
            for j in 0..n - 1 {
                let dt = times[j + 1] - times[j];
                let kernel = (t - times[j]).powf(1.0 - a) - (t - times[j + 1]).powf(1.0 - a);
                let slope_coeff = kernel * rg / dt;
                acc += slope_coeff * (values[(j + 1) * d + k] - values[j * d + k]);
            }
            let dt = times[n] - times[n - 1];
            let last = (t - times[n - 1]).powf(1.0 - a) * rg / dt;
            acc -= last * values[(n - 1) * d + k];
            known[k] = acc;
            lin[k] = last;
        }
        let caputo = vec![0.0; d];
        let state = newton_step(problem, config, n, t, &known, &lin, &caputo, &prev)?;
        values.extend_from_slice(&state);
        prev = state;
    }
    Ok(Trajectory {
        dim: d,
        times,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn relaxation_solution_reference_values() {
        assert_eq!(linear_relaxation_solution(0.5, 1.0, 0.0).unwrap(), 1.0);
        // Order one is plain exponential decay.
        for &t in &[0.1, 1.0, 3.0] {
            assert_abs_diff_eq!(
                linear_relaxation_solution(1.0, 2.0, t).unwrap(),
                (-2.0 * t).exp(),
                epsilon = 1e-13
            );
        }
        // Order 1/2 in terms of the scaled complementary error function.
        assert_abs_diff_eq!(
            linear_relaxation_solution(0.5, 1.0, 1.0).unwrap(),
            0.42758357615580700,
            epsilon = 1e-12
        );
    }

    #[test]
    fn integer_order_reduces_to_second_order_ode_solver() {
        let problem = FdeProblem::linear_relaxation(1.0, 1.0).unwrap();
        let config = SolverConfig::direct(0.01);
        let traj = solve_scalar_fde(&problem, &config, 1.0).unwrap();
        let err = traj.final_error(|t| (-t).exp());
        assert!(err <= 1e-3, "error {err} at t=1 too large for O(tau^2)");
        // Halving the step divides the error by about four.
        let config2 = SolverConfig::direct(0.005);
        let traj2 = solve_scalar_fde(&problem, &config2, 1.0).unwrap();
        let ratio = err / traj2.final_error(|t| (-t).exp());
        assert!(
            (2.5..8.0).contains(&ratio),
            "refinement ratio {ratio} not second-order"
        );
    }

    #[test]
    fn graded_mesh_exact_for_linear_solution() {
        // With f(u, t) chosen so the solution is u(t) = t, the piecewise
        // linear scheme reproduces it exactly on any mesh.
        let alpha = 0.5;
        let rg = recip_gamma(2.0 - alpha);
        let problem = FdeProblem::scalar(
            alpha,
            0.0,
            move |_, t| t.powf(1.0 - alpha) * rg,
            Some(Box::new(|_, _| 0.0)),
        )
        .unwrap();
        for &r in &[1.0, 2.0, 3.0] {
            let config = SolverConfig::direct(1.0 / 64.0);
            let traj = graded_l1_solve(&problem, &config, r, 64, 1.0).unwrap();
            let err = traj.max_error(|t| t);
            assert!(err <= 1e-12, "r={r}: linear solution error {err}");
        }
    }

    #[test]
    fn decoupled_system_matches_scalar_solves() {
        let tau = 0.05;
        let sys = FdeProblem::new(
            vec![0.5, 0.8],
            vec![1.0, 1.0],
            Box::new(|u, _, out| {
                out[0] = -u[0];
                out[1] = -2.0 * u[1];
            }),
            Some(Box::new(|_, _, out| {
                out.copy_from_slice(&[-1.0, 0.0, 0.0, -2.0]);
            })),
        )
        .unwrap();
        let config = SolverConfig::direct(tau).with_corrections(1);
        let joint = solve_fde_system(&sys, &config, 1.0).unwrap();

        let s1 = FdeProblem::linear_relaxation(0.5, 1.0).unwrap();
        let t1 = solve_scalar_fde(&s1, &config, 1.0).unwrap();
        let s2 = FdeProblem::linear_relaxation(0.8, 2.0).unwrap();
        let t2 = solve_scalar_fde(&s2, &config, 1.0).unwrap();
        for n in 0..joint.len() {
            assert_abs_diff_eq!(joint.state(n)[0], t1.state(n)[0], epsilon = 1e-12);
            assert_abs_diff_eq!(joint.state(n)[1], t2.state(n)[0], epsilon = 1e-12);
        }
    }

    #[test]
    fn startup_tracks_exact_solution() {
        let alpha = 0.8;
        let problem = FdeProblem::linear_relaxation(alpha, 1.0).unwrap();
        let config = SolverConfig::direct(1.0 / 32.0).with_corrections(3);
        let traj = solve_scalar_fde(&problem, &config, 0.25).unwrap();
        for n in 1..=3usize {
            let exact = linear_relaxation_solution(alpha, 1.0, traj.time(n)).unwrap();
            let err = (traj.state(n)[0] - exact).abs();
            assert!(err <= 1e-4, "startup value {n} off by {err}");
        }
    }

    #[test]
    fn newton_reports_nonconvergence() {
        let problem = FdeProblem::scalar(0.5, 1.0, |_, _| f64::NAN, None).unwrap();
        let config = SolverConfig::direct(0.1);
        let out = solve_scalar_fde(&problem, &config, 1.0);
        assert!(matches!(out, Err(Error::NewtonFailure { .. })));
    }

    #[test]
    fn finite_difference_jacobian_matches_analytic() {
        let with_jac = FdeProblem::lorenz([0.9, 0.9, 0.9]).unwrap();
        let without = FdeProblem::new(
            vec![0.9, 0.9, 0.9],
            vec![2.0, 0.9, 0.2],
            Box::new(|s, _, out| {
                out[0] = s[2] + (s[1] - 0.25) * s[0];
                out[1] = 1.0 - s[1] - s[0] * s[0];
                out[2] = -s[0] - 0.25 * s[2];
            }),
            None,
        )
        .unwrap();
        let config = SolverConfig::direct(0.02).with_corrections(2);
        let a = solve_fde_system(&with_jac, &config, 0.6).unwrap();
        let b = solve_fde_system(&without, &config, 0.6).unwrap();
        for n in 0..a.len() {
            for c in 0..3 {
                assert_abs_diff_eq!(a.state(n)[c], b.state(n)[c], epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn trajectory_csv_layout() {
        let problem = FdeProblem::lorenz([0.9, 0.9, 0.9]).unwrap();
        let config = SolverConfig::direct(0.1).with_corrections(0);
        let traj = solve_fde_system(&problem, &config, 0.5).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "n,t,U,V,W");
        let first = lines.next().unwrap();
        let fields: Vec<&str> = first.split(',').collect();
        assert_eq!(fields.len(), 5);
        assert_eq!(fields[0], "0");
        assert_eq!(fields[2].parse::<f64>().unwrap(), 2.0);
        assert_eq!(text.lines().count(), traj.len() + 1);
    }

    #[test]
    fn parameter_validation() {
        assert!(FdeProblem::linear_relaxation(0.0, 1.0).is_err());
        assert!(FdeProblem::linear_relaxation(1.2, 1.0).is_err());
        let problem = FdeProblem::linear_relaxation(0.5, 1.0).unwrap();
        let mut config = SolverConfig::direct(0.1);
        config.newton_tol = 0.0;
        assert!(solve_scalar_fde(&problem, &config, 1.0).is_err());
        let config = SolverConfig::direct(0.1);
        assert!(solve_scalar_fde(&problem, &config, 0.123).is_err());
        assert!(graded_l1_solve(&problem, &config, 0.5, 10, 1.0).is_err());
        let sys = FdeProblem::lorenz([0.9, 0.9, 0.9]).unwrap();
        assert!(solve_scalar_fde(&sys, &config, 1.0).is_err());
    }
}
