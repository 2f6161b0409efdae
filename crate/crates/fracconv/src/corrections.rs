//! Starting-weight corrections.
//!
//! Solutions of fractional differential equations generically behave like
//! `u(t) = u(0) + c_1 t^s_1 + c_2 t^s_2 + ...` with fractional exponents, and
//! polynomial-interpolation quadrature loses its full order on such inputs.
//! The classical remedy is a small set of corrected weights on the first few
//! samples, chosen so the scheme becomes *exact* on the monomials `t^s_k`.
//! This module computes those weights for any evaluator implementing
//! [`HistoryOp`], by measuring each scheme's actual defect on the monomials
//! (via companion evaluators fed monomial samples) and solving a small
//! Vandermonde-type system.
//!
//! Because the defect is measured against the concrete evaluator — including,
//! for the compressed-history engine, its quadrature error — the corrected
//! operator is exact on the span of the correction monomials by construction.

use crate::error::{Error, Result};
use crate::linalg;
use crate::specfun::{gamma, recip_gamma};
use crate::HistoryOp;

/// Largest usable number of correction terms.  The correction system is a
/// Vandermonde matrix in the exponents and loses all double-precision
/// accuracy long before a few dozen terms; eight keeps the solve trustworthy.
pub const MAX_CORRECTION_TERMS: usize = 8;

/// A validated set of correction exponents `0 < s_1 < s_2 < ... < s_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionSet {
    sigmas: Vec<f64>,
}

impl CorrectionSet {
    /// `sigmas` must be strictly increasing, positive, finite, and at most
    /// [`MAX_CORRECTION_TERMS`] long.  An empty set is a valid no-op.
    pub fn new(sigmas: Vec<f64>) -> Result<Self> {
        if sigmas.len() > MAX_CORRECTION_TERMS {
            return Err(Error::InvalidParameter(format!(
                "{} correction terms exceed the conditioning limit of {}",
                sigmas.len(),
                MAX_CORRECTION_TERMS
            )));
        }
        for (k, &s) in sigmas.iter().enumerate() {
            if !s.is_finite() || s <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "correction exponent {s} is not positive and finite"
                )));
            }
            if k > 0 && s <= sigmas[k - 1] {
                return Err(Error::InvalidParameter(format!(
                    "correction exponents must increase strictly, got {} after {}",
                    s,
                    sigmas[k - 1]
                )));
            }
        }
        Ok(CorrectionSet { sigmas })
    }

    /// The empty set: corrections disabled.
    pub fn none() -> Self {
        CorrectionSet { sigmas: Vec::new() }
    }

    /// The standard choice for an equation of order `|alpha|`:
    /// `s_k = k |alpha|` for `k = 1..=m`, matching the leading terms of the
    /// solution's fractional power series.
    pub fn multiples_of(alpha: f64, m: usize) -> Result<Self> {
        let base = alpha.abs();
        if !(base > 0.0) || !base.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "cannot build correction exponents from order {alpha}"
            )));
        }
        Self::new((1..=m).map(|k| k as f64 * base).collect())
    }

    pub fn m(&self) -> usize {
        self.sigmas.len()
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }
}

/// Solve for the starting weights `W_{n,1..m}` at step `n`, given the base
/// scheme as a black box: `base_op(samples)` must return the scheme's value
/// at step `n` for the provided sample sequence `u_0..u_n`.
///
/// The weights satisfy, for each exponent `s_k`,
///
/// ```text
/// sum_j W_{n,j} j^s_k  =  G(s_k+1)/G(s_k+1+a) n^(s_k+a)  -  D_n[j^s_k] / tau^a
/// ```
///
/// i.e. the corrected scheme `D_n + tau^a sum_j W_{n,j} (u_j - u_0)` is exact
/// on `t^s_k`.  Normalizing by `tau^a` makes the weights independent of the
/// step size.  Returns the weights and the solve's relative residual
/// (infinity norm, scaled by the right-hand side).
pub fn starting_weights<F>(
    alpha: f64,
    tau: f64,
    sigmas: &[f64],
    n: usize,
    mut base_op: F,
) -> Result<(Vec<f64>, f64)>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if sigmas.len() > MAX_CORRECTION_TERMS {
        return Err(Error::InvalidParameter(format!(
            "{} correction terms exceed the conditioning limit of {}",
            sigmas.len(),
            MAX_CORRECTION_TERMS
        )));
    }
    if n < 1 {
        return Err(Error::State(
            "starting weights are defined for steps n >= 1".into(),
        ));
    }
    let mut applied = Vec::with_capacity(sigmas.len());
    let scale = tau.powf(alpha);
    for &sigma in sigmas {
        let samples: Vec<f64> = (0..=n).map(|j| (j as f64).powf(sigma)).collect();
        applied.push(base_op(&samples)? / scale);
    }
    solve_starting_system(alpha, sigmas, n, &applied)
}

/// Core solve shared by [`starting_weights`] and [`Corrected`]: `applied[k]`
/// is the tau-normalized base-scheme value `D_n[j^s_k] / tau^a`.
fn solve_starting_system(
    alpha: f64,
    sigmas: &[f64],
    n: usize,
    applied: &[f64],
) -> Result<(Vec<f64>, f64)> {
    let m = sigmas.len();
    if m == 0 {
        return Ok((Vec::new(), 0.0));
    }
    let mut matrix = vec![vec![0.0; m]; m];
    let mut rhs = vec![0.0; m];
    for (k, &sigma) in sigmas.iter().enumerate() {
        let exact = gamma(sigma + 1.0)?
            * recip_gamma(sigma + 1.0 + alpha)
            * (n as f64).powf(sigma + alpha);
        rhs[k] = exact - applied[k];
        for j in 1..=m {
            matrix[k][j - 1] = (j as f64).powf(sigma);
        }
    }
    let weights = linalg::solve(matrix.clone(), rhs.clone())?;
    let mut resid: f64 = 0.0;
    let mut rhs_norm: f64 = 0.0;
    for k in 0..m {
        let row: f64 = (0..m).map(|j| matrix[k][j] * weights[j]).sum();
        resid = resid.max((row - rhs[k]).abs());
        rhs_norm = rhs_norm.max(rhs[k].abs());
    }
    let rel = if rhs_norm > 0.0 { resid / rhs_norm } else { 0.0 };
    Ok((weights, rel))
}

/// An evaluator wrapped with starting-weight corrections.
///
/// The wrapper owns the base operator plus one scalar *companion* operator of
/// the same construction per correction exponent; companions consume monomial
/// samples and advance lazily when weights for a new step are first needed.
/// The corrected value is
///
/// ```text
/// corrected_n = base_n + tau^a sum_{j=1..m} W_{n,j} (u_j - u_0)
/// ```
///
/// which needs only the first `m + 1` samples beyond the base state; those
/// are kept in a small head log, so the wrapper adds O(m) memory.
#[derive(Debug, Clone)]
pub struct Corrected<Op> {
    base: Op,
    sigmas: Vec<f64>,
    companions: Vec<Op>,
    /// First `(m+1) * dim` sample values, in push order.
    head: Vec<f64>,
    /// Latest starting-weight solve, keyed by step.
    cache: Option<(usize, Vec<f64>)>,
    /// Worst relative residual seen across all solves.
    max_residual: f64,
    tau_pow_alpha: f64,
}

impl<Op: HistoryOp> Corrected<Op> {
    /// Wrap `base` (which must not have samples yet) with corrections for
    /// `set`.  `companions` must contain one fresh scalar evaluator per
    /// exponent, built with the same parameters as `base`.
    pub fn new(base: Op, set: CorrectionSet, companions: Vec<Op>) -> Result<Self> {
        if base.len() != 0 {
            return Err(Error::State(
                "corrections must be attached before any sample is pushed".into(),
            ));
        }
        if companions.len() != set.m() {
            return Err(Error::InvalidParameter(format!(
                "need {} companion evaluators, got {}",
                set.m(),
                companions.len()
            )));
        }
        for c in &companions {
            if c.dim() != 1 || c.len() != 0 || c.alpha() != base.alpha() || c.tau() != base.tau() {
                return Err(Error::InvalidParameter(
                    "companion evaluators must be fresh, scalar, and share the base parameters"
                        .into(),
                ));
            }
        }
        let tau_pow_alpha = base.tau().powf(base.alpha());
        Ok(Corrected {
            base,
            sigmas: set.sigmas,
            companions,
            head: Vec::new(),
            cache: None,
            max_residual: 0.0,
            tau_pow_alpha,
        })
    }

    pub fn m(&self) -> usize {
        self.sigmas.len()
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn base(&self) -> &Op {
        &self.base
    }

    pub fn companions(&self) -> &[Op] {
        &self.companions
    }

    /// Worst relative residual of the weight solves so far; a value creeping
    /// above ~1e-8 means the exponent set is too ill-conditioned to trust.
    pub fn max_residual(&self) -> f64 {
        self.max_residual
    }

    /// Starting weights `W_{n,1..m}` for step `n` (companions advance as
    /// needed; results are memoized per step).
    pub fn weights_at(&mut self, n: usize) -> Result<&[f64]> {
        if self.sigmas.is_empty() {
            return Ok(&[]);
        }
        if self.cache.as_ref().map(|(step, _)| *step) != Some(n) {
            let mut applied = Vec::with_capacity(self.sigmas.len());
            for (comp, &sigma) in self.companions.iter_mut().zip(&self.sigmas) {
                while comp.len() <= n {
                    let j = comp.len() as f64;
                    comp.push_sample(&[j.powf(sigma)])?;
                }
                applied.push(comp.eval(n)?[0] / self.tau_pow_alpha);
            }
            let (weights, resid) =
                solve_starting_system(self.base.alpha(), &self.sigmas, n, &applied)?;
            self.max_residual = self.max_residual.max(resid);
            self.cache = Some((n, weights));
        }
        Ok(&self.cache.as_ref().unwrap().1)
    }

    /// Correction term `tau^a sum_j W_{n,j} (u_j - u_0)` for each component.
    /// Requires the head log to hold `u_0..u_m`.
    fn correction(&mut self, n: usize) -> Result<Vec<f64>> {
        let m = self.sigmas.len();
        let dim = self.base.dim();
        if self.head.len() < (m + 1) * dim {
            return Err(Error::State(format!(
                "corrected evaluation needs the first {} samples, have {}",
                m + 1,
                self.head.len() / dim
            )));
        }
        let scale = self.tau_pow_alpha;
        let weights = self.weights_at(n)?.to_vec();
        let mut corr = vec![0.0; dim];
        for (j, w) in weights.iter().enumerate() {
            for c in 0..dim {
                corr[c] += scale * w * (self.head[(j + 1) * dim + c] - self.head[c]);
            }
        }
        Ok(corr)
    }
}

impl<Op: HistoryOp> HistoryOp for Corrected<Op> {
    fn alpha(&self) -> f64 {
        self.base.alpha()
    }

    fn tau(&self) -> f64 {
        self.base.tau()
    }

    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn len(&self) -> usize {
        self.base.len()
    }

    fn push_sample(&mut self, u: &[f64]) -> Result<()> {
        self.base.push_sample(u)?;
        if self.head.len() < (self.sigmas.len() + 1) * self.base.dim() {
            self.head.extend_from_slice(u);
        }
        Ok(())
    }

    /// Corrected operator value at step `n`.
    fn eval(&mut self, n: usize) -> Result<Vec<f64>> {
        let mut value = self.base.eval(n)?;
        if !self.sigmas.is_empty() {
            let corr = self.correction(n)?;
            for (v, c) in value.iter_mut().zip(&corr) {
                *v += c;
            }
        }
        Ok(value)
    }

    /// Corrected value at step `n` as `(known, lin)` with `u_n` unknown.
    /// Requires `n >= m`: earlier steps would involve future samples.
    fn affine_eval(&mut self, n: usize) -> Result<(Vec<f64>, f64)> {
        let (mut known, mut lin) = self.base.affine_eval(n)?;
        let m = self.sigmas.len();
        if m == 0 {
            return Ok((known, lin));
        }
        if n < m {
            return Err(Error::State(format!(
                "corrected implicit step needs n >= {m}, got {n}"
            )));
        }
        let dim = self.base.dim();
        let scale = self.tau_pow_alpha;
        let weights = self.weights_at(n)?.to_vec();
        if n == m {
            // The newest sample u_n is also the last corrected sample u_m:
            // its weight moves into the linear coefficient, its u_0 part
            // stays known.
            if self.head.len() < m * dim {
                return Err(Error::State(format!(
                    "corrected implicit step at n = {m} needs the first {m} samples"
                )));
            }
            for (j, w) in weights.iter().enumerate().take(m - 1) {
                for c in 0..dim {
                    known[c] += scale * w * (self.head[(j + 1) * dim + c] - self.head[c]);
                }
            }
            let w_last = weights[m - 1];
            for c in 0..dim {
                known[c] -= scale * w_last * self.head[c];
            }
            lin += scale * w_last;
        } else {
            let corr = self.correction(n)?;
            for (k, c) in known.iter_mut().zip(&corr) {
                *k += c;
            }
        }
        Ok((known, lin))
    }
}
