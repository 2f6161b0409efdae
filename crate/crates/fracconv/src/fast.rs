//! Memory-saving fast evaluation of the power-law convolution.
//!
//! The value at `t_n` is split at a fixed memory length `delta_t = n0 tau`
//! into a local part (evaluated directly, exactly as the reference scheme)
//! and a history part over `[0, t_n - delta_t]`.  The history is compressed
//! through the kernel's Laplace representation
//!
//! ```text
//! t^(a-1) / G(a)  =  sin(pi a)/pi  *  int_0^inf  x^(-a) e^(-t x) dx
//! ```
//!
//! discretized per *level* by a scaled, truncated generalized Gauss–Laguerre
//! rule.  Levels partition the history into exponentially growing windows
//! (basis `B`): level `l` covers a window whose distance from the current
//! time lies in `[B^l, 2 B^l - 1]` grid steps, so a rule whose accuracy
//! degrades with the ratio of window width to distance needs only `O(log n)`
//! levels with `O(1)` modes each.  Each level tiles time into aligned blocks
//! of `B^(l-1)` steps; a block stores, per quadrature mode `x`, the integral
//! `int_block e^((s - block_end) x) u~(s) ds` of the interpolated input, and
//! adjacent blocks combine exactly through the exponential semigroup
//! `y[a,c] = e^(-x (c-b)) y[a,b] + y[b,c]`.  Active memory is therefore
//! bounded by the recent-sample window plus a bounded FIFO of blocks per
//! level, independent of the step count.

use std::collections::VecDeque;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::interp::{self, InterpKind, WeightTable};
use crate::quadrature::QuadratureRule;
use crate::specfun::sin_pi;
use crate::HistoryOp;

/// Construction parameters of [`FastConvolution`].
#[derive(Debug, Clone)]
pub struct FastParams {
    /// Kernel order `a < 1`, nonzero; negative orders are derivatives.
    pub alpha: f64,
    /// Grid spacing.
    pub tau: f64,
    /// Memory length of the local part; must be a positive multiple of `tau`.
    pub delta_t: f64,
    /// Level basis `B >= 2`.
    pub basis: usize,
    /// Target accuracy of the level quadrature rules.
    pub eps: f64,
    /// Mode truncation threshold (weights below roughly this size are
    /// dropped); `1e-16` is the standard choice.
    pub eps0: f64,
    /// Interpolation kind shared by the local part and the block integrals.
    pub kind: InterpKind,
    /// Final time the instance must be able to reach.  Level machinery is
    /// provisioned from it (with generous margin); pushing far beyond is a
    /// state error.
    pub horizon: f64,
}

impl FastParams {
    /// Validate and return the window length in steps.
    fn validate(&self) -> Result<usize> {
        if !(self.alpha < 1.0) || self.alpha == 0.0 {
            return Err(Error::InvalidParameter(format!(
                "kernel order must be nonzero and below 1, got {}",
                self.alpha
            )));
        }
        if !(self.tau > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "step size must be positive, got {}",
                self.tau
            )));
        }
        let steps = self.delta_t / self.tau;
        let n0 = steps.round();
        if !(n0 >= 1.0) || (steps - n0).abs() > 1e-9 * n0.max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "memory length {} is not a positive integer multiple of tau {}",
                self.delta_t, self.tau
            )));
        }
        if self.basis < 2 {
            return Err(Error::InvalidParameter(format!(
                "level basis must be at least 2, got {}",
                self.basis
            )));
        }
        for (name, v) in [("eps", self.eps), ("eps0", self.eps0)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must lie in (0, 1), got {v}"
                )));
            }
        }
        if !(self.horizon >= self.tau) {
            return Err(Error::InvalidParameter(format!(
                "horizon {} is below one step {}",
                self.horizon, self.tau
            )));
        }
        Ok(n0 as usize)
    }
}

/// Anchor layout of the history window at one step.
///
/// With `n^ = n - n0 + 1` (so `t^ = n^ tau` is one step past the history),
/// the levels `l = 1..=L` cover `[s_l, s_(l-1)]` (in units of `tau`), where
/// `s_0 = n^ - 1`, `s_L = 0`, and interior anchors are the unique multiples
/// of `B^l` with `n^ - s_l` in `[B^l, 2 B^l - 1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HistoryPartition {
    /// Level count `L`; 0 means no history.
    pub level_count: usize,
    /// `s_0 >= s_1 >= ... >= s_L`, length `level_count + 1` (a single 0 when
    /// there is no history).
    pub anchors: Vec<usize>,
}

/// Compute the level partition at step `n` for window length `n0` and basis
/// `basis`.  Steps `n <= n0` have no history.
pub fn partition_for(n: usize, n0: usize, basis: usize) -> HistoryPartition {
    if n <= n0 {
        return HistoryPartition {
            level_count: 0,
            anchors: vec![0],
        };
    }
    let nh = n - n0 + 1;
    let mut level_count = 0usize;
    let mut pow = 1usize;
    while nh >= 2 * pow {
        level_count += 1;
        pow *= basis;
    }
    let mut anchors = Vec::with_capacity(level_count + 1);
    anchors.push(nh - 1);
    let mut bl = 1usize;
    for _ell in 1..level_count {
        bl *= basis;
        anchors.push((nh / bl - 1) * bl);
    }
    anchors.push(0);
    HistoryPartition {
        level_count,
        anchors,
    }
}

/// Number of quadrature nodes (minus one) needed by level `ell` so the
/// compressed kernel matches the true one to relative accuracy `eps` across
/// the level's window.  `ratio` is `delta_t / tau`.
pub fn select_level_order(basis: usize, ratio: f64, ell: usize, eps: f64) -> Result<usize> {
    if basis < 2 {
        return Err(Error::InvalidParameter(format!(
            "level basis must be at least 2, got {basis}"
        )));
    }
    if !(ratio >= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "window/step ratio must be at least 1, got {ratio}"
        )));
    }
    if ell < 1 {
        return Err(Error::InvalidParameter("levels start at 1".into()));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "accuracy target must lie in (0, 1), got {eps}"
        )));
    }
    let b = basis as f64;
    let bpow = b.powi(1 - ell as i32);
    let t = (2.0 * b - 1.0 - bpow) / (1.0 + bpow * (ratio - 1.0));
    let n = (eps.ln() / (2.0 * (t / (t + 1.0)).ln())).ceil();
    Ok((n as usize).max(1))
}

/// Normalized exponential moments `g_k(w) = int_0^1 e^(w (y-1)) y^k dy` for
/// `k = 0, 1, 2`.  Closed forms via `expm1` except for small `w`, where a
/// short Taylor series avoids cancellation.
pub(crate) fn exp_moments(w: f64) -> (f64, f64, f64) {
    debug_assert!(w >= 0.0);
    if w < 1.0 {
        // g_k = k! sum_i (-w)^i / (k+i+1)!.  The closed forms below lose
        // roughly three leading digits per decade as w shrinks (their
        // numerators behave like w^(k+1)), so the series must carry the
        // whole range where that bites; at w = 1 it needs ~20 terms.
        let mut g = [0.0_f64; 3];
        for (k, gk) in g.iter_mut().enumerate() {
            let mut sum = 0.0;
            let mut pw = 1.0;
            for i in 0..=22 {
                sum += pw * factorial(k) / factorial(k + i + 1);
                pw *= -w;
            }
            *gk = sum;
        }
        (g[0], g[1], g[2])
    } else {
        let em = (-w).exp_m1(); // e^{-w} - 1, no cancellation
        let g0 = -em / w;
        let g1 = (w + em) / (w * w);
        let g2 = (w * w - 2.0 * (w + em)) / (w * w * w);
        (g0, g1, g2)
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// One-step block-integral coefficients: the integral of
/// `e^((s - t_(j+1)) lambda)` times the interpolant over `[t_j, t_(j+1)]`
/// equals `c0 u_j + c1 u_(j+1) + c2 u_(j+2)` (with `c2 = 0` for linear
/// interpolation).
pub(crate) fn step_coeffs(kind: InterpKind, lambda: f64, tau: f64) -> (f64, f64, f64) {
    let (g0, g1, g2) = exp_moments(lambda * tau);
    match kind {
        InterpKind::Linear => (tau * (g0 - g1), tau * g1, 0.0),
        InterpKind::Quadratic => (
            tau * (g0 - 1.5 * g1 + 0.5 * g2),
            tau * (2.0 * g1 - g2),
            tau * 0.5 * (g2 - g1),
        ),
    }
}

/// A sealed block: per retained mode (and component) the integral of the
/// interpolated input against the mode's decaying exponential, anchored at
/// the block's end.
#[derive(Debug, Clone)]
struct Block {
    end_units: usize,
    /// Layout `[mode][component]`.
    modes: Vec<f64>,
}

#[derive(Debug, Clone)]
struct LevelState {
    /// Block length in grid steps (`B^(l-1)`).
    block_units: usize,
    /// Gauss–Laguerre order parameter `N_l`.
    order: usize,
    /// Rule scale `T^_l`.
    scale: f64,
    /// Retained scaled nodes and weights.
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// Per-mode `e^(-lambda tau)` and `e^(-lambda * block length)`.
    decay_tau: Vec<f64>,
    decay_block: Vec<f64>,
    /// Per-mode one-step integral coefficients.
    c0: Vec<f64>,
    c1: Vec<f64>,
    c2: Vec<f64>,
    /// In-progress block accumulator, layout `[mode][component]`.
    partial: Vec<f64>,
    blocks: VecDeque<Block>,
    /// Combined window value `y(cache_lo, cache_hi)` reused across steps.
    cache_lo: usize,
    cache_hi: usize,
    cache: Vec<f64>,
    cache_valid: bool,
}

impl LevelState {
    fn build(params: &FastParams, n0: usize, ell: usize, dim: usize) -> Result<Self> {
        let order = select_level_order(params.basis, n0 as f64, ell, params.eps)?;
        let block_units = (params.basis as u64)
            .checked_pow(ell as u32 - 1)
            .and_then(|v| usize::try_from(v).ok())
            .ok_or_else(|| {
                Error::InvalidParameter(format!("level {ell} block length overflows"))
            })?;
        let block_time = block_units as f64 * params.tau;
        let scale = block_time + (n0 as f64 - 1.0) * params.tau;
        let rule = QuadratureRule::gauss_laguerre(-params.alpha, order)?
            .scaled(scale)?
            .truncated(params.eps0);
        let q = rule.nodes.len();
        let mut decay_tau = Vec::with_capacity(q);
        let mut decay_block = Vec::with_capacity(q);
        let mut c0 = Vec::with_capacity(q);
        let mut c1 = Vec::with_capacity(q);
        let mut c2 = Vec::with_capacity(q);
        for &lambda in &rule.nodes {
            decay_tau.push((-lambda * params.tau).exp());
            decay_block.push((-lambda * block_time).exp());
            let (a, b, c) = step_coeffs(params.kind, lambda, params.tau);
            c0.push(a);
            c1.push(b);
            c2.push(c);
        }
        Ok(LevelState {
            block_units,
            order,
            scale,
            nodes: rule.nodes,
            weights: rule.weights,
            decay_tau,
            decay_block,
            c0,
            c1,
            c2,
            partial: vec![0.0; q * dim],
            blocks: VecDeque::new(),
            cache_lo: 0,
            cache_hi: 0,
            cache: vec![0.0; q * dim],
            cache_valid: false,
        })
    }

    fn retained(&self) -> usize {
        self.nodes.len()
    }

    /// Bring the cached combined window to exactly `(lo, hi]` (in units).
    fn update_window(&mut self, lo: usize, hi: usize, dim: usize) -> Result<()> {
        if !(self.cache_valid && self.cache_lo == lo && self.cache_hi <= hi) {
            self.cache_lo = lo;
            self.cache_hi = lo;
            self.cache.fill(0.0);
            self.cache_valid = true;
        }
        while self.cache_hi < hi {
            let target = self.cache_hi + self.block_units;
            let front = self
                .blocks
                .front()
                .map(|b| b.end_units)
                .ok_or_else(|| Error::State("history block missing from level FIFO".into()))?;
            if target < front || (target - front) % self.block_units != 0 {
                return Err(Error::State(
                    "history block missing from level FIFO".into(),
                ));
            }
            let idx = (target - front) / self.block_units;
            let block = self
                .blocks
                .get(idx)
                .filter(|b| b.end_units == target)
                .ok_or_else(|| Error::State("history block missing from level FIFO".into()))?;
            for m in 0..self.retained() {
                let d = self.decay_block[m];
                for c in 0..dim {
                    let i = m * dim + c;
                    self.cache[i] = d * self.cache[i] + block.modes[i];
                }
            }
            self.cache_hi = target;
        }
        Ok(())
    }
}

/// Per-level metadata for reporting.
#[derive(Debug, Clone)]
pub struct LevelDiagnostics {
    pub level: usize,
    /// Gauss–Laguerre order parameter of the level's rule.
    pub order: usize,
    /// Modes kept after truncation.
    pub retained: usize,
    /// The rule's time scale.
    pub scale: f64,
    /// Sealed blocks currently held.
    pub blocks_held: usize,
}

/// The fast evaluator: behaves like the direct scheme restricted to the
/// recent window plus a compressed, recursively updated history.
#[derive(Debug, Clone)]
pub struct FastConvolution {
    params: FastParams,
    n0: usize,
    dim: usize,
    sin_factor: f64,
    table: WeightTable,
    /// Recent samples, flattened; front is sample `recent_start`.
    recent: VecDeque<f64>,
    recent_start: usize,
    capacity_steps: usize,
    len: usize,
    /// Next interval index to integrate into the levels.
    intervals_done: usize,
    levels: Vec<LevelState>,
    /// History-side coefficient of the newest sample in the implicit form
    /// (quadratic kind with window length one only).
    lin_history_tail: f64,
    max_abs_sample: f64,
    /// Scratch stencil values, length `3 * dim`.
    scratch: Vec<f64>,
}

impl FastConvolution {
    pub fn new(params: FastParams, dim: usize) -> Result<Self> {
        let n0 = params.validate()?;
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        // Levels must integrate from t = 0 (each has its own mode set, so a
        // level cannot be reconstructed later without replaying the whole
        // input); provision enough of them for the horizon, with margin.
        let nh_max = ((params.horizon / params.tau).ceil() as i64 - n0 as i64 + 1).max(2) as u64;
        let mut level_cap = 0usize;
        let mut pow = 1u64;
        while nh_max >= 2 * pow {
            level_cap += 1;
            pow = pow.saturating_mul(params.basis as u64);
        }
        level_cap += 2;
        let mut levels = Vec::with_capacity(level_cap);
        for ell in 1..=level_cap {
            levels.push(LevelState::build(&params, n0, ell, dim)?);
        }
        let mut table = WeightTable::new(params.kind, params.alpha, params.tau)?;
        table.ensure(n0 + 2)?;
        let sin_factor = sin_pi(params.alpha) / PI;
        let lin_history_tail = match params.kind {
            InterpKind::Quadratic => {
                let l1 = &levels[0];
                sin_factor
                    * l1.weights
                        .iter()
                        .zip(&l1.c2)
                        .map(|(w, c)| w * c)
                        .sum::<f64>()
            }
            InterpKind::Linear => 0.0,
        };
        Ok(FastConvolution {
            n0,
            dim,
            sin_factor,
            table,
            recent: VecDeque::new(),
            recent_start: 0,
            capacity_steps: n0 + 3,
            len: 0,
            intervals_done: 0,
            levels,
            lin_history_tail,
            max_abs_sample: 0.0,
            scratch: vec![0.0; 3 * dim],
            params,
        })
    }

    pub fn params(&self) -> &FastParams {
        &self.params
    }

    pub fn window_steps(&self) -> usize {
        self.n0
    }

    pub fn kind(&self) -> InterpKind {
        self.params.kind
    }

    fn min_step(&self) -> usize {
        match self.params.kind {
            InterpKind::Linear => 1,
            InterpKind::Quadratic => 2,
        }
    }

    fn recent_get(&self, step: usize, c: usize) -> f64 {
        self.recent[(step - self.recent_start) * self.dim + c]
    }

    /// Integrate interval `[t_j, t_(j+1)]` into every level's partial block,
    /// sealing blocks that complete.
    fn integrate_interval(&mut self, j: usize) -> Result<()> {
        debug_assert_eq!(j, self.intervals_done);
        let dim = self.dim;
        for c in 0..dim {
            self.scratch[c] = self.recent_get(j, c);
            self.scratch[dim + c] = self.recent_get(j + 1, c);
            self.scratch[2 * dim + c] = match self.params.kind {
                InterpKind::Quadratic => self.recent_get(j + 2, c),
                InterpKind::Linear => 0.0,
            };
        }
        let scratch = &self.scratch;
        for level in &mut self.levels {
            let q = level.nodes.len();
            for m in 0..q {
                let (c0, c1, c2) = (level.c0[m], level.c1[m], level.c2[m]);
                let d = level.decay_tau[m];
                for c in 0..dim {
                    let i_val = c0 * scratch[c] + c1 * scratch[dim + c] + c2 * scratch[2 * dim + c];
                    let i = m * dim + c;
                    level.partial[i] = d * level.partial[i] + i_val;
                }
            }
            if (j + 1) % level.block_units == 0 {
                let modes = std::mem::replace(&mut level.partial, vec![0.0; q * dim]);
                level.blocks.push_back(Block {
                    end_units: j + 1,
                    modes,
                });
            }
        }
        self.intervals_done += 1;
        Ok(())
    }

    fn evict(&mut self, part: &HistoryPartition) {
        for ell in 1..=part.level_count {
            let keep_above = part.anchors[ell];
            let level = &mut self.levels[ell - 1];
            while level
                .blocks
                .front()
                .map(|b| b.end_units <= keep_above)
                .unwrap_or(false)
            {
                level.blocks.pop_front();
            }
        }
    }

    /// Compressed history at step `n`.  With `pending_tail`, the newest
    /// history interval (whose integration is deferred until the next push)
    /// is folded in from the recent samples, with any stencil value that is
    /// not yet known (the quadratic stencil reaches `u_n` when the window is
    /// one step long) treated as zero — the implicit-step path; its
    /// coefficient is reported separately through `affine_eval`.
    fn history_core(&mut self, n: usize, pending_tail: bool) -> Result<Vec<f64>> {
        let dim = self.dim;
        let mut out = vec![0.0; dim];
        if n <= self.n0 {
            return Ok(out);
        }
        let part = partition_for(n, self.n0, self.params.basis);
        if part.level_count > self.levels.len() {
            return Err(Error::State(format!(
                "step {n} exceeds the provisioned horizon {}",
                self.params.horizon
            )));
        }
        let nh = n - self.n0 + 1;
        // Stencil of the pending interval j* = n - n0 - 1 (known part only).
        let mut pend = vec![0.0; 3 * dim];
        if pending_tail {
            let j = n - self.n0 - 1;
            for c in 0..dim {
                pend[c] = self.recent_get(j, c);
                pend[dim + c] = self.recent_get(j + 1, c);
                pend[2 * dim + c] =
                    if self.params.kind == InterpKind::Quadratic && self.n0 >= 2 {
                        self.recent_get(j + 2, c)
                    } else {
                        0.0
                    };
            }
        }
        for ell in 1..=part.level_count {
            let s_hi = part.anchors[ell - 1];
            let s_lo = part.anchors[ell];
            let level = &mut self.levels[ell - 1];
            let k = nh - s_hi - level.block_units;
            let q = level.nodes.len();
            if ell == 1 && pending_tail {
                // Window up to the pending interval, then one virtual step.
                level.update_window(s_lo, s_hi - 1, dim)?;
                for m in 0..q {
                    let w = level.weights[m];
                    let d = level.decay_tau[m];
                    for c in 0..dim {
                        let y = d * level.cache[m * dim + c]
                            + level.c0[m] * pend[c]
                            + level.c1[m] * pend[dim + c]
                            + level.c2[m] * pend[2 * dim + c];
                        out[c] += w * y;
                    }
                }
            } else {
                level.update_window(s_lo, s_hi, dim)?;
                for m in 0..q {
                    let f = level.weights[m] * (-level.nodes[m] * k as f64 * self.params.tau).exp();
                    for c in 0..dim {
                        out[c] += f * level.cache[m * dim + c];
                    }
                }
            }
        }
        for v in &mut out {
            *v *= self.sin_factor;
        }
        Ok(out)
    }

    /// The compressed history part alone at the current step.
    pub fn history_eval(&mut self, n: usize) -> Result<Vec<f64>> {
        if n + 1 != self.len {
            return Err(Error::State(format!(
                "fast evaluation is sequential: step {n} requires exactly {} samples, have {}",
                n + 1,
                self.len
            )));
        }
        self.history_core(n, false)
    }

    /// Local (uncompressed) part at the current step — identical arithmetic
    /// to the direct evaluator's local part.
    fn local_eval(&self, n: usize, skip: usize) -> Vec<f64> {
        let mut acc = vec![0.0; self.dim];
        let j_n = n.saturating_sub(self.n0);
        let this = &self;
        let sample = move |step: usize, c: usize| this.recent_get(step, c);
        interp::add_interval_terms(
            &self.table,
            n,
            j_n,
            n - 1,
            self.dim,
            skip,
            &sample,
            &mut acc,
        );
        interp::add_final_terms(&self.table, n, self.dim, skip, &sample, &mut acc);
        acc
    }

    /// From-scratch evaluation of the compressed history from a full sample
    /// log: same partition, rules, and one-step integrals, but every window
    /// integral is recomputed term by term with explicit exponentials
    /// instead of the incremental block state.  Testing oracle.
    pub fn reference_history(&self, samples: &[f64], n: usize) -> Result<Vec<f64>> {
        let dim = self.dim;
        if samples.len() < (n + 1) * dim {
            return Err(Error::State(format!(
                "reference history at step {n} needs {} samples, got {}",
                n + 1,
                samples.len() / dim
            )));
        }
        let mut out = vec![0.0; dim];
        if n <= self.n0 {
            return Ok(out);
        }
        let part = partition_for(n, self.n0, self.params.basis);
        if part.level_count > self.levels.len() {
            return Err(Error::State(format!(
                "step {n} exceeds the provisioned horizon {}",
                self.params.horizon
            )));
        }
        let nh = n - self.n0 + 1;
        for ell in 1..=part.level_count {
            let s_hi = part.anchors[ell - 1];
            let s_lo = part.anchors[ell];
            let level = &self.levels[ell - 1];
            let k = nh - s_hi - level.block_units;
            for m in 0..level.nodes.len() {
                let f = level.weights[m] * level.decay_tau[m].powi(k as i32);
                for c in 0..dim {
                    let mut y = 0.0;
                    for j in s_lo..s_hi {
                        let shift = level.decay_tau[m].powi((s_hi - (j + 1)) as i32);
                        let u0 = samples[j * dim + c];
                        let u1 = samples[(j + 1) * dim + c];
                        let u2 = match self.params.kind {
                            InterpKind::Quadratic => samples[(j + 2) * dim + c],
                            InterpKind::Linear => 0.0,
                        };
                        y += shift * (level.c0[m] * u0 + level.c1[m] * u1 + level.c2[m] * u2);
                    }
                    out[c] += f * y;
                }
            }
        }
        for v in &mut out {
            *v *= self.sin_factor;
        }
        Ok(out)
    }

    /// Count of state values that scale with the retained window/blocks
    /// (recent samples, partial blocks, sealed blocks, window caches) —
    /// the quantities that must stay bounded as the step count grows.
    pub fn retained_reals(&self) -> usize {
        let mut count = self.recent.len();
        for level in &self.levels {
            let q = level.retained();
            count += level.partial.len() + level.cache.len();
            count += level.blocks.len() * q * self.dim;
        }
        count
    }

    /// Largest ratio of a stored mode magnitude to its a-priori bound
    /// `1.25 * block length * max |u|` (1.25 is the quadratic interpolant's
    /// overshoot constant).  Values above 1 would indicate an unstable
    /// recursion.
    pub fn stability_ratio(&self) -> f64 {
        if self.max_abs_sample == 0.0 {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for level in &self.levels {
            let bound = 1.25 * level.block_units as f64 * self.params.tau * self.max_abs_sample;
            for block in &level.blocks {
                for v in &block.modes {
                    worst = worst.max(v.abs() / bound);
                }
            }
            for v in &level.partial {
                worst = worst.max(v.abs() / bound);
            }
        }
        worst
    }

    pub fn level_diagnostics(&self) -> Vec<LevelDiagnostics> {
        self.levels
            .iter()
            .enumerate()
            .map(|(i, level)| LevelDiagnostics {
                level: i + 1,
                order: level.order,
                retained: level.retained(),
                scale: level.scale,
                blocks_held: level.blocks.len(),
            })
            .collect()
    }
}

impl HistoryOp for FastConvolution {
    fn alpha(&self) -> f64 {
        self.params.alpha
    }

    fn tau(&self) -> f64 {
        self.params.tau
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn len(&self) -> usize {
        self.len
    }

    fn push_sample(&mut self, u: &[f64]) -> Result<()> {
        if u.len() != self.dim {
            return Err(Error::InvalidParameter(format!(
                "sample dimension {} does not match operator dimension {}",
                u.len(),
                self.dim
            )));
        }
        let n = self.len;
        let part = partition_for(n, self.n0, self.params.basis);
        if part.level_count > self.levels.len() {
            return Err(Error::State(format!(
                "step {n} exceeds the provisioned horizon {}",
                self.params.horizon
            )));
        }
        self.recent.extend(u.iter().copied());
        while self.recent.len() > self.capacity_steps * self.dim {
            for _ in 0..self.dim {
                self.recent.pop_front();
            }
            self.recent_start += 1;
        }
        for &v in u {
            self.max_abs_sample = self.max_abs_sample.max(v.abs());
        }
        self.len += 1;
        if n >= self.n0 + 1 {
            self.integrate_interval(n - self.n0 - 1)?;
            self.evict(&part);
        }
        Ok(())
    }

    fn eval(&mut self, n: usize) -> Result<Vec<f64>> {
        if n + 1 != self.len {
            return Err(Error::State(format!(
                "fast evaluation is sequential: step {n} requires exactly {} samples, have {}",
                n + 1,
                self.len
            )));
        }
        if n < self.min_step() {
            return Err(Error::State(format!(
                "evaluation needs step >= {} for this interpolation kind, got {n}",
                self.min_step()
            )));
        }
        let local = self.local_eval(n, usize::MAX);
        let history = self.history_core(n, false)?;
        Ok(local.iter().zip(&history).map(|(l, h)| l + h).collect())
    }

    fn affine_eval(&mut self, n: usize) -> Result<(Vec<f64>, f64)> {
        if n != self.len {
            return Err(Error::State(format!(
                "implicit evaluation at step {n} needs exactly {n} samples, have {}",
                self.len
            )));
        }
        if n < self.min_step() {
            return Err(Error::State(format!(
                "evaluation needs step >= {} for this interpolation kind, got {n}",
                self.min_step()
            )));
        }
        let history = self.history_core(n, n > self.n0)?;
        let mut known = self.local_eval(n, n);
        for (k, h) in known.iter_mut().zip(&history) {
            *k += h;
        }
        let (_, _, d2) = self.table.local();
        let mut lin = d2;
        if self.params.kind == InterpKind::Quadratic {
            if n.saturating_sub(self.n0) <= n - 2 {
                // The adjacent interval is still in the local window.
                lin += self.table.history(1).2;
            } else {
                // Window length one: the adjacent interval is the newest
                // history interval, entering through the level-1 modes.
                lin += self.lin_history_tail;
            }
        }
        Ok((known, lin))
    }
}
