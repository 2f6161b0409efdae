//! Convolution weights of the piecewise-interpolation schemes.
//!
//! On a uniform grid `t_j = j tau` the input is reconstructed per interval by
//! Lagrange interpolation — linear through the interval's endpoints, or
//! quadratic through the three points starting at the interval's left edge —
//! and the reconstruction is integrated exactly against the kernel
//! `k_a(t) = t^(a-1) / Gamma(a)`.  The result is a short list of closed-form
//! weights per interval:
//!
//! * history interval `[t_j, t_{j+1}]` at distance `m = n - 1 - j >= 1` from
//!   the evaluation point contributes `b1 u_j + b2 u_{j+1} + b3 u_{j+2}`
//!   (linear: `b3 = 0`);
//! * the final interval `[t_{n-1}, t_n]`, where the kernel is singular,
//!   contributes `d0 u_{n-2} + d1 u_{n-1} + d2 u_n` from the backward stencil.
//!
//! All formulas continue to negative orders `a` (Riemann–Liouville
//! derivatives) as Hadamard finite-part integrals with no separate code path;
//! at `a = -1` the weights collapse to the classical BDF stencils.

use crate::error::{Error, Result};
use crate::specfun::recip_gamma;

/// Interpolation order used to reconstruct the input between samples.
///
/// `Quadratic` needs three samples before it can act (evaluation starts at
/// the second step after the initial datum); `Linear` needs two.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterpKind {
    Linear,
    Quadratic,
}

/// `ell_j = ((j+1)^a - j^a) / a`, the basic kernel moment
/// `integral_j^{j+1} y^(a-1) dy`.
///
/// `j = 0` uses the finite-part value `1/a` for every `a != 0`.
pub fn ell_coeff(alpha: f64, j: usize) -> Result<f64> {
    if alpha == 0.0 {
        return Err(Error::InvalidParameter(
            "moment exponent must be nonzero".into(),
        ));
    }
    if j == 0 {
        return Ok(1.0 / alpha);
    }
    // (j+1)^a - j^a = j^a expm1(a ln1p(1/j)): no cancellation at large j.
    let jf = j as f64;
    Ok(jf.powf(alpha) * (alpha * (1.0 / jf).ln_1p()).exp_m1() / alpha)
}

/// Distance index below which the printed moment-combination formulas are
/// used verbatim; beyond it they cancel ~m^2 of precision and the binomial
/// series on the product form takes over.
const SERIES_SWITCH: usize = 8;

/// Moments `integral_0^1 (m + x)^(a-1) x^k dx` for `k = 0, 1, 2`, by the
/// binomial expansion of `(1 + x/m)^(a-1)` — every term positive-definite, so
/// no cancellation at any `m >= SERIES_SWITCH`.
fn shifted_power_moments(alpha: f64, m: f64) -> [f64; 3] {
    let lead = m.powf(alpha - 1.0);
    let mut moments = [0.0f64; 3];
    let mut coef = 1.0; // binomial(a-1, k) m^-k, built up iteratively
    for k in 0..60 {
        let kf = k as f64;
        let term0 = coef / (kf + 1.0);
        let term1 = coef / (kf + 2.0);
        let term2 = coef / (kf + 3.0);
        moments[0] += term0;
        moments[1] += term1;
        moments[2] += term2;
        if coef.abs() < 1e-18 * moments[0].abs() {
            break;
        }
        coef *= (alpha - 1.0 - kf) / (kf + 1.0) / m;
    }
    [lead * moments[0], lead * moments[1], lead * moments[2]]
}

/// Weights of one quadratic-reconstruction history interval at distance
/// `m = n - 1 - j >= 1`: the contribution of `[t_j, t_{j+1}]` to the
/// convolution at `t_n` is `b1 u_j + b2 u_{j+1} + b3 u_{j+2}`.
///
/// Closed form (with `ell_k` shorthand for [`ell_coeff`]`(a + k, m)`):
///
/// ```text
/// b1 =  tau^a / (2 Gamma(a)) [ell_2 - (2m-1) ell_1 + m(m-1) ell_0]
/// b2 = -tau^a /    Gamma(a)  [ell_2 -  2m    ell_1 + (m^2-1) ell_0]
/// b3 =  tau^a / (2 Gamma(a)) [ell_2 - (2m+1) ell_1 + m(m+1) ell_0]
/// ```
///
/// `b1 + b2 + b3 = tau^a ell_0 / Gamma(a)` (constant reproduction).
pub fn quad_history_weights(alpha: f64, tau: f64, m: usize) -> Result<(f64, f64, f64)> {
    check_history_args(alpha, tau, m)?;
    let rg = recip_gamma(alpha);
    if rg == 0.0 {
        // Pure-derivative degenerate orders: the prefactor kills every term.
        return Ok((0.0, 0.0, 0.0));
    }
    let scale = tau.powf(alpha) * rg;
    if m < SERIES_SWITCH {
        let mf = m as f64;
        let l0 = ell_coeff(alpha, m)?;
        let l1 = ell_coeff(alpha + 1.0, m)?;
        let l2 = ell_coeff(alpha + 2.0, m)?;
        let b1 = 0.5 * scale * (l2 - (2.0 * mf - 1.0) * l1 + mf * (mf - 1.0) * l0);
        let b2 = -scale * (l2 - 2.0 * mf * l1 + (mf * mf - 1.0) * l0);
        let b3 = 0.5 * scale * (l2 - (2.0 * mf + 1.0) * l1 + mf * (mf + 1.0) * l0);
        Ok((b1, b2, b3))
    } else {
        // Identical coefficients via integral_0^1 (m+x)^(a-1) p(x) dx with
        // p = x(x+1)/2, (1-x^2), x(x-1)/2 respectively.
        let [m0, m1, m2] = shifted_power_moments(alpha, m as f64);
        let b1 = 0.5 * scale * (m2 + m1);
        let b2 = scale * (m0 - m2);
        let b3 = 0.5 * scale * (m2 - m1);
        Ok((b1, b2, b3))
    }
}

/// Weights of one linear-reconstruction history interval at distance
/// `m = n - 1 - j >= 1`: contribution `b1 u_j + b2 u_{j+1}`.
///
/// ```text
/// b1 = tau^a / Gamma(a) [ell_1 - m ell_0]
/// b2 = tau^a / Gamma(a) [(m+1) ell_0 - ell_1]
/// ```
pub fn linear_history_weights(alpha: f64, tau: f64, m: usize) -> Result<(f64, f64)> {
    check_history_args(alpha, tau, m)?;
    let rg = recip_gamma(alpha);
    if rg == 0.0 {
        return Ok((0.0, 0.0));
    }
    let scale = tau.powf(alpha) * rg;
    if m < SERIES_SWITCH {
        let mf = m as f64;
        let l0 = ell_coeff(alpha, m)?;
        let l1 = ell_coeff(alpha + 1.0, m)?;
        Ok((scale * (l1 - mf * l0), scale * ((mf + 1.0) * l0 - l1)))
    } else {
        let [m0, m1, _] = shifted_power_moments(alpha, m as f64);
        Ok((scale * m1, scale * (m0 - m1)))
    }
}

/// Kind-dispatched history weights as a uniform triple (`b3 = 0` for linear).
pub fn history_weights(kind: InterpKind, alpha: f64, tau: f64, m: usize) -> Result<(f64, f64, f64)> {
    match kind {
        InterpKind::Quadratic => quad_history_weights(alpha, tau, m),
        InterpKind::Linear => {
            let (b1, b2) = linear_history_weights(alpha, tau, m)?;
            Ok((b1, b2, 0.0))
        }
    }
}

/// Weights of the final, kernel-singular interval `[t_{n-1}, t_n]`:
/// contribution `d0 u_{n-2} + d1 u_{n-1} + d2 u_n`.
///
/// Quadratic kind (backward stencil through `t_{n-2}, t_{n-1}, t_n`):
///
/// ```text
/// d0 = -a tau^a / (2 Gamma(a+3)),
/// d1 = a (3+a) tau^a / Gamma(a+3),
/// d2 = (4+a) tau^a / (2 Gamma(a+3)).
/// ```
///
/// Linear kind integrates the interpolant through `t_{n-1}, t_n` exactly:
/// `d0 = 0`, `d1 = tau^a (1/Gamma(a+1) - 1/Gamma(a+2))`,
/// `d2 = tau^a / Gamma(a+2)`.  Both kinds sum to `tau^a / Gamma(a+1)`, the
/// exact kernel mass of the interval.
pub fn local_weights(alpha: f64, tau: f64, kind: InterpKind) -> Result<(f64, f64, f64)> {
    if !(alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "kernel order must be below 1, got {alpha}"
        )));
    }
    if !(tau > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "step size must be positive, got {tau}"
        )));
    }
    let ta = tau.powf(alpha);
    match kind {
        InterpKind::Quadratic => {
            let rg3 = recip_gamma(alpha + 3.0);
            Ok((
                -0.5 * alpha * ta * rg3,
                alpha * (3.0 + alpha) * ta * rg3,
                0.5 * (4.0 + alpha) * ta * rg3,
            ))
        }
        InterpKind::Linear => {
            let rg1 = recip_gamma(alpha + 1.0);
            let rg2 = recip_gamma(alpha + 2.0);
            Ok((0.0, ta * (rg1 - rg2), ta * rg2))
        }
    }
}

fn check_history_args(alpha: f64, tau: f64, m: usize) -> Result<()> {
    if !(alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "kernel order must be below 1, got {alpha}"
        )));
    }
    if !(tau > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "step size must be positive, got {tau}"
        )));
    }
    if m == 0 {
        return Err(Error::InvalidParameter(
            "history distance index starts at 1".into(),
        ));
    }
    Ok(())
}

/// Cached weight table for one `(kind, alpha, tau)` combination.
///
/// History weights are extended on demand and never change once computed, so
/// a table built by one evaluation pass can be shared read-only afterwards.
#[derive(Debug, Clone)]
pub struct WeightTable {
    pub kind: InterpKind,
    pub alpha: f64,
    pub tau: f64,
    local: (f64, f64, f64),
    history: Vec<(f64, f64, f64)>,
}

impl WeightTable {
    pub fn new(kind: InterpKind, alpha: f64, tau: f64) -> Result<Self> {
        Ok(WeightTable {
            kind,
            alpha,
            tau,
            local: local_weights(alpha, tau, kind)?,
            history: Vec::new(),
        })
    }

    /// Weights `(d0, d1, d2)` of the final interval.
    pub fn local(&self) -> (f64, f64, f64) {
        self.local
    }

    /// Make history weights for all distances `1..=max_m` available.
    pub fn ensure(&mut self, max_m: usize) -> Result<()> {
        while self.history.len() < max_m {
            let m = self.history.len() + 1;
            self.history
                .push(history_weights(self.kind, self.alpha, self.tau, m)?);
        }
        Ok(())
    }

    /// Weights of the history interval at distance `m` (call [`Self::ensure`]
    /// first).
    pub fn history(&self, m: usize) -> (f64, f64, f64) {
        self.history[m - 1]
    }
}

/// Accumulate the interval contributions `b(m) . (u_j, u_{j+1}, u_{j+2})` for
/// `j in [j_lo, j_hi)` at step `n` into `acc`, treating the sample with index
/// `skip` as zero (pass `usize::MAX` to skip nothing).  Shared by both
/// evaluators so that their common summation is performed identically.
pub(crate) fn add_interval_terms(
    table: &WeightTable,
    n: usize,
    j_lo: usize,
    j_hi: usize,
    dim: usize,
    skip: usize,
    sample: &dyn Fn(usize, usize) -> f64,
    acc: &mut [f64],
) {
    for j in j_lo..j_hi {
        let (b1, b2, b3) = table.history(n - 1 - j);
        for c in 0..dim {
            let mut v = 0.0;
            if j != skip {
                v += b1 * sample(j, c);
            }
            if j + 1 != skip {
                v += b2 * sample(j + 1, c);
            }
            if b3 != 0.0 && j + 2 != skip {
                v += b3 * sample(j + 2, c);
            }
            acc[c] += v;
        }
    }
}

/// Accumulate the final-interval contribution `d . (u_{n-2}, u_{n-1}, u_n)`
/// at step `n` into `acc`, treating sample `skip` as zero.
pub(crate) fn add_final_terms(
    table: &WeightTable,
    n: usize,
    dim: usize,
    skip: usize,
    sample: &dyn Fn(usize, usize) -> f64,
    acc: &mut [f64],
) {
    let (d0, d1, d2) = table.local();
    for c in 0..dim {
        let mut v = 0.0;
        if d0 != 0.0 && n >= 2 {
            v += d0 * sample(n - 2, c);
        }
        if n - 1 != skip {
            v += d1 * sample(n - 1, c);
        }
        if n != skip {
            v += d2 * sample(n, c);
        }
        acc[c] += v;
    }
}
