//! Direct O(n^2) evaluation of the discrete power-law convolution, with the
//! short-memory split into local and history parts.
//!
//! This is the ground-truth evaluator: every weight is applied explicitly, so
//! it is exact on the polynomials its interpolation kind reproduces and
//! serves as the oracle the fast engine is checked against.  Cost per
//! evaluation at step `n` is O(n); a full trajectory costs O(n^2) time but
//! only O(n) memory because weights depend on the sample distance alone.

use crate::error::{Error, Result};
use crate::interp::{self, InterpKind, WeightTable};
use crate::HistoryOp;

/// Discrete convolution `sum_j w_{n,j} u_j ~ (k_a * u)(t_n)` on a uniform
/// grid, split at memory length `delta_t = n0 tau` into
///
/// * a local part over `[t_n - delta_t, t_n]` (all of `[0, t_n]` while
///   `t_n <= delta_t`), and
/// * a history part over `[0, t_n - delta_t]`,
///
/// whose sum is independent of `delta_t`.  Samples may be vectors; weights
/// are shared across components.
#[derive(Debug, Clone)]
pub struct DirectConvolution {
    alpha: f64,
    tau: f64,
    n0: usize,
    kind: InterpKind,
    dim: usize,
    table: WeightTable,
    samples: Vec<f64>, // step-major: samples[n * dim + c]
}

impl DirectConvolution {
    /// `delta_t` must be a positive integer multiple of `tau`; `alpha` a
    /// nonzero kernel order below 1 (negative orders are derivatives).
    pub fn new(alpha: f64, tau: f64, delta_t: f64, kind: InterpKind, dim: usize) -> Result<Self> {
        if !(alpha < 1.0) || alpha == 0.0 {
            return Err(Error::InvalidParameter(format!(
                "kernel order must be nonzero and below 1, got {alpha}"
            )));
        }
        if !(tau > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "step size must be positive, got {tau}"
            )));
        }
        let steps = delta_t / tau;
        let n0 = steps.round();
        if !(n0 >= 1.0) || (steps - n0).abs() > 1e-9 * n0.max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "memory length {delta_t} is not a positive integer multiple of tau {tau}"
            )));
        }
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        Ok(DirectConvolution {
            alpha,
            tau,
            n0: n0 as usize,
            kind,
            dim,
            table: WeightTable::new(kind, alpha, tau)?,
            samples: Vec::new(),
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Memory length in steps (`delta_t / tau`).
    pub fn window_steps(&self) -> usize {
        self.n0
    }

    pub fn kind(&self) -> InterpKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of samples pushed so far (the next sample gets index `len()`).
    pub fn len(&self) -> usize {
        self.samples.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Append the sample `u_{len()}`.
    pub fn push_sample(&mut self, u: &[f64]) -> Result<()> {
        if u.len() != self.dim {
            return Err(Error::InvalidParameter(format!(
                "sample dimension {} does not match operator dimension {}",
                u.len(),
                self.dim
            )));
        }
        self.samples.extend_from_slice(u);
        // Keep the weight table one step ahead so evaluation can borrow
        // immutably: evaluating at step n needs distances up to n - 1.
        let n = self.len();
        if n >= 2 {
            self.table.ensure(n - 1)?;
        }
        Ok(())
    }

    /// Scalar convenience for `dim == 1` operators.
    pub fn push_scalar(&mut self, u: f64) -> Result<()> {
        self.push_sample(&[u])
    }

    fn check_step(&self, n: usize) -> Result<()> {
        let min_n = match self.kind {
            InterpKind::Linear => 1,
            InterpKind::Quadratic => 2,
        };
        if n < min_n {
            return Err(Error::State(format!(
                "evaluation needs step >= {min_n} for this interpolation kind, got {n}"
            )));
        }
        if self.len() <= n {
            return Err(Error::State(format!(
                "evaluation at step {n} needs {} samples, have {}",
                n + 1,
                self.len()
            )));
        }
        Ok(())
    }

    /// First step index whose interval is *not* in the local window:
    /// history covers intervals `[t_j, t_{j+1}]` for `j < j_n`.
    fn history_end(&self, n: usize) -> usize {
        n.saturating_sub(self.n0)
    }

    /// Add the history-interval contributions for `j in [j_lo, j_hi)` into
    /// `acc`, treating a (virtual) sample index `skip` as zero.
    fn add_intervals(&self, n: usize, j_lo: usize, j_hi: usize, skip: usize, acc: &mut [f64]) {
        let samples = &self.samples;
        let dim = self.dim;
        let sample = move |step: usize, c: usize| samples[step * dim + c];
        interp::add_interval_terms(&self.table, n, j_lo, j_hi, dim, skip, &sample, acc);
    }

    fn add_final_interval(&self, n: usize, skip: usize, acc: &mut [f64]) {
        let samples = &self.samples;
        let dim = self.dim;
        let sample = move |step: usize, c: usize| samples[step * dim + c];
        interp::add_final_terms(&self.table, n, dim, skip, &sample, acc);
    }

    /// The convolution value at step `n` (componentwise for vector samples).
    pub fn direct_eval(&self, n: usize) -> Result<Vec<f64>> {
        let (local, history) = self.split_eval(n)?;
        Ok(local
            .iter()
            .zip(&history)
            .map(|(l, h)| l + h)
            .collect())
    }

    /// The short-memory split `(local, history)` at step `n`; the sum is the
    /// `delta_t`-independent total.  History is identically zero while
    /// `t_n <= delta_t`.
    pub fn split_eval(&self, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_step(n)?;
        let j_n = self.history_end(n);
        let mut local = vec![0.0; self.dim];
        let mut history = vec![0.0; self.dim];
        // usize::MAX: no sample skipped.
        self.add_intervals(n, 0, j_n, usize::MAX, &mut history);
        self.add_intervals(n, j_n, n - 1, usize::MAX, &mut local);
        self.add_final_interval(n, usize::MAX, &mut local);
        Ok((local, history))
    }

    /// The value at step `n` as an affine function of the not-yet-pushed
    /// sample `u_n`: returns `(known, lin)` with value `known + lin * u_n`
    /// componentwise.  Requires exactly `n` samples (`u_0 ... u_{n-1}`).
    ///
    /// This is what implicit time steppers need: the operator at the new
    /// time involves the unknown new sample through the final-interval weight
    /// `d2` and (quadratic kind) the adjacent interval's trailing weight.
    pub fn affine_eval(&self, n: usize) -> Result<(Vec<f64>, f64)> {
        let min_n = match self.kind {
            InterpKind::Linear => 1,
            InterpKind::Quadratic => 2,
        };
        if n < min_n {
            return Err(Error::State(format!(
                "evaluation needs step >= {min_n} for this interpolation kind, got {n}"
            )));
        }
        if self.len() != n {
            return Err(Error::State(format!(
                "affine evaluation at step {n} needs exactly {n} samples, have {}",
                self.len()
            )));
        }
        let mut known = vec![0.0; self.dim];
        self.add_intervals(n, 0, n.saturating_sub(1), n, &mut known);
        self.add_final_interval(n, n, &mut known);
        let (_, _, d2) = self.table.local();
        let lin = match self.kind {
            InterpKind::Linear => d2,
            InterpKind::Quadratic => d2 + self.table.history(1).2,
        };
        Ok((known, lin))
    }
}

impl HistoryOp for DirectConvolution {
    fn alpha(&self) -> f64 {
        DirectConvolution::alpha(self)
    }

    fn tau(&self) -> f64 {
        DirectConvolution::tau(self)
    }

    fn dim(&self) -> usize {
        DirectConvolution::dim(self)
    }

    fn len(&self) -> usize {
        DirectConvolution::len(self)
    }

    fn push_sample(&mut self, u: &[f64]) -> Result<()> {
        DirectConvolution::push_sample(self, u)
    }

    fn eval(&mut self, n: usize) -> Result<Vec<f64>> {
        self.direct_eval(n)
    }

    fn affine_eval(&mut self, n: usize) -> Result<(Vec<f64>, f64)> {
        DirectConvolution::affine_eval(self, n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::{gamma, recip_gamma};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn filled(
        alpha: f64,
        tau: f64,
        delta_t: f64,
        kind: InterpKind,
        n: usize,
        f: impl Fn(f64) -> f64,
    ) -> DirectConvolution {
        let mut conv = DirectConvolution::new(alpha, tau, delta_t, kind, 1).unwrap();
        for j in 0..=n {
            conv.push_scalar(f(j as f64 * tau)).unwrap();
        }
        conv
    }

    #[test]
    fn constant_input_gives_kernel_mass() {
        // k_a * 1 at t_n is t_n^a / Gamma(1+a) for every kind, order, window.
        for kind in [InterpKind::Linear, InterpKind::Quadratic] {
            for &alpha in &[0.5, 0.1, -0.5, -0.9] {
                for &n0 in &[1usize, 4, 100] {
                    let tau = 0.05;
                    let n = 20;
                    let conv = filled(alpha, tau, n0 as f64 * tau, kind, n, |_| 1.0);
                    let got = conv.direct_eval(n).unwrap()[0];
                    let t = n as f64 * tau;
                    let exact = t.powf(alpha) * recip_gamma(alpha + 1.0);
                    assert_relative_eq!(got, exact, max_relative = 1e-12);
                }
            }
        }
        // Frozen: alpha = 0.5, t_n = 1 -> 1/Gamma(1.5).
        let conv = filled(0.5, 0.05, 0.25, InterpKind::Quadratic, 20, |_| 1.0);
        assert_relative_eq!(
            conv.direct_eval(20).unwrap()[0],
            1.1283791670955126,
            max_relative = 1e-12
        );
    }

    #[test]
    fn linear_input_exact_for_both_kinds() {
        // k_a * t at t_n is Gamma(2)/Gamma(2+a) t^(1+a).  At t = 1 this is
        // 1/Gamma(1.5) = 1.1283791670955126 for the half-derivative
        // (a = -1/2) and 1/Gamma(2.5) = 0.7522527780636751 for the
        // half-integral (a = +1/2).
        for kind in [InterpKind::Linear, InterpKind::Quadratic] {
            let tau = 0.025;
            let n = 40; // t_n = 1
            let half_deriv = filled(-0.5, tau, 5.0 * tau, kind, n, |t| t);
            assert_relative_eq!(
                half_deriv.direct_eval(n).unwrap()[0],
                1.1283791670955126,
                max_relative = 1e-11
            );
            let half_int = filled(0.5, tau, 5.0 * tau, kind, n, |t| t);
            assert_relative_eq!(
                half_int.direct_eval(n).unwrap()[0],
                0.7522527780636751,
                max_relative = 1e-11
            );
        }
    }

    #[test]
    fn quadratic_input_exact_for_quadratic_kind() {
        // k_a * t^2 = 2 t^(2+a) / Gamma(3+a); at a = 1/2, t = 2 this is
        // 2 * 2^2.5 / Gamma(3.5).
        let tau = 0.05;
        let n = 40; // t_n = 2
        let conv = filled(0.5, tau, 10.0 * tau, InterpKind::Quadratic, n, |t| t * t);
        let t: f64 = 2.0;
        let exact = 2.0 * t.powf(2.5) * recip_gamma(3.5);
        assert_relative_eq!(conv.direct_eval(n).unwrap()[0], exact, max_relative = 1e-11);
        assert_relative_eq!(exact, 3.4043, max_relative = 1e-4);
        // Other orders and windows.
        for &alpha in &[0.9, -0.3, -0.8] {
            for &n0 in &[1usize, 7, 1000] {
                let conv = filled(alpha, tau, n0 as f64 * tau, InterpKind::Quadratic, n, |t| t * t);
                let exact = 2.0 * t.powf(2.0 + alpha) * recip_gamma(3.0 + alpha);
                assert_relative_eq!(conv.direct_eval(n).unwrap()[0], exact, max_relative = 1e-11);
            }
        }
        // The linear kind is *not* exact on t^2 (visible tau^2-scale error).
        let lin = filled(0.5, tau, 10.0 * tau, InterpKind::Linear, n, |t| t * t);
        let exact_half = 2.0 * t.powf(2.5) * recip_gamma(3.5);
        let err = (lin.direct_eval(n).unwrap()[0] - exact_half).abs();
        assert!(err > 1e-6 && err < 1e-2, "unexpected linear-kind error {err:e}");
    }

    #[test]
    fn split_matches_analytic_window_masses() {
        // u = 1, a = 1/2, delta_t = 1, t_n = 2: local covers [t_n - 1, t_n]
        // with kernel mass delta_t^a/Gamma(1+a), history covers [0, 1] with
        // mass (t_n^a - delta_t^a)/Gamma(1+a).
        let tau = 0.01;
        let n = 200;
        let conv = filled(0.5, tau, 1.0, InterpKind::Quadratic, n, |_| 1.0);
        let (local, history) = conv.split_eval(n).unwrap();
        let g = recip_gamma(1.5);
        assert_relative_eq!(local[0], g, max_relative = 1e-12);
        assert_relative_eq!(
            history[0],
            (2.0f64.powf(0.5) - 1.0) * g,
            max_relative = 1e-12
        );
        let total = conv.direct_eval(n).unwrap()[0];
        assert_relative_eq!(total, 2.0f64.powf(0.5) * g, max_relative = 1e-12);
    }

    #[test]
    fn history_empty_inside_memory_window() {
        let conv = filled(0.3, 0.1, 1.0, InterpKind::Quadratic, 10, |t| t.sin());
        for n in 2..=10 {
            let (_, history) = conv.split_eval(n).unwrap();
            assert_eq!(history[0], 0.0, "nonzero history at n={n} <= n0=10");
        }
    }

    #[test]
    fn total_invariant_under_window_choice() {
        let mut rng = StdRng::seed_from_u64(0xd1ec_0001);
        let n = 64;
        let samples: Vec<f64> = (0..=n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        for kind in [InterpKind::Linear, InterpKind::Quadratic] {
            for &alpha in &[0.5, -0.5, 0.9, -0.9] {
                let tau = 0.02;
                let evals: Vec<f64> = [1usize, 5, 25, 200]
                    .iter()
                    .map(|&n0| {
                        let mut conv =
                            DirectConvolution::new(alpha, tau, n0 as f64 * tau, kind, 1).unwrap();
                        for &u in &samples {
                            conv.push_scalar(u).unwrap();
                        }
                        conv.direct_eval(n).unwrap()[0]
                    })
                    .collect();
                let scale = evals[0].abs().max(1e-30);
                for e in &evals[1..] {
                    assert!(
                        (e - evals[0]).abs() <= 1e-12 * scale,
                        "window dependence: {evals:?} at alpha={alpha}, {kind:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn evaluation_is_linear_in_samples() {
        let mut rng = StdRng::seed_from_u64(0xd1ec_0002);
        let n = 40;
        let tau = 0.05;
        let u: Vec<f64> = (0..=n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..=n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (a, b) = (1.7, -0.4);
        let build = |s: &[f64]| {
            let mut conv =
                DirectConvolution::new(-0.5, tau, 5.0 * tau, InterpKind::Quadratic, 1).unwrap();
            for &x in s {
                conv.push_scalar(x).unwrap();
            }
            conv.direct_eval(n).unwrap()[0]
        };
        let combined: Vec<f64> = u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect();
        let lhs = build(&combined);
        let rhs = a * build(&u) + b * build(&v);
        assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-13 * lhs.abs().max(1.0));
    }

    #[test]
    fn vector_samples_match_scalar_components() {
        let mut rng = StdRng::seed_from_u64(0xd1ec_0003);
        let n = 30;
        let tau = 0.1;
        let seqs: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..=n).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let mut vecconv = DirectConvolution::new(0.4, tau, 3.0 * tau, InterpKind::Quadratic, 3).unwrap();
        for j in 0..=n {
            vecconv
                .push_sample(&[seqs[0][j], seqs[1][j], seqs[2][j]])
                .unwrap();
        }
        let vec_val = vecconv.direct_eval(n).unwrap();
        for c in 0..3 {
            let mut sconv =
                DirectConvolution::new(0.4, tau, 3.0 * tau, InterpKind::Quadratic, 1).unwrap();
            for j in 0..=n {
                sconv.push_scalar(seqs[c][j]).unwrap();
            }
            assert_eq!(vec_val[c], sconv.direct_eval(n).unwrap()[0]);
        }
    }

    #[test]
    fn affine_eval_matches_direct_eval() {
        let mut rng = StdRng::seed_from_u64(0xd1ec_0004);
        for kind in [InterpKind::Linear, InterpKind::Quadratic] {
            for &n0 in &[1usize, 3, 100] {
                let tau = 0.05;
                let n = 25;
                let u: Vec<f64> = (0..=n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let mut conv = DirectConvolution::new(-0.6, tau, n0 as f64 * tau, kind, 1).unwrap();
                for &x in &u[..n] {
                    conv.push_scalar(x).unwrap();
                }
                let (known, lin) = conv.affine_eval(n).unwrap();
                conv.push_scalar(u[n]).unwrap();
                let full = conv.direct_eval(n).unwrap()[0];
                assert_abs_diff_eq!(
                    known[0] + lin * u[n],
                    full,
                    epsilon = 1e-14 * full.abs().max(1.0)
                );
            }
        }
    }

    #[test]
    fn state_and_parameter_errors() {
        assert!(DirectConvolution::new(0.0, 0.1, 0.1, InterpKind::Linear, 1).is_err());
        assert!(DirectConvolution::new(1.0, 0.1, 0.1, InterpKind::Linear, 1).is_err());
        assert!(DirectConvolution::new(0.5, 0.1, 0.05, InterpKind::Linear, 1).is_err());
        assert!(DirectConvolution::new(0.5, 0.1, 0.13, InterpKind::Linear, 1).is_err());
        assert!(DirectConvolution::new(0.5, 0.1, 0.1, InterpKind::Linear, 0).is_err());

        let mut conv = DirectConvolution::new(0.5, 0.1, 0.1, InterpKind::Quadratic, 1).unwrap();
        conv.push_scalar(1.0).unwrap();
        conv.push_scalar(1.0).unwrap();
        // Quadratic needs n >= 2 and n+1 samples.
        assert!(matches!(conv.direct_eval(1), Err(Error::State(_))));
        assert!(matches!(conv.direct_eval(2), Err(Error::State(_))));
        conv.push_scalar(1.0).unwrap();
        assert!(conv.direct_eval(2).is_ok());
        assert!(matches!(conv.push_sample(&[1.0, 2.0]), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn gamma_helper_consistency() {
        // recip_gamma is used heavily above; pin it against gamma here so a
        // regression in either direction cannot silently bias these tests.
        for &x in &[1.5, 2.5, 3.5] {
            assert_relative_eq!(
                recip_gamma(x) * gamma(x).unwrap(),
                1.0,
                max_relative = 1e-14
            );
        }
    }
}
