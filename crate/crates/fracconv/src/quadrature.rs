//! Generalized Gauss–Laguerre quadrature, the compression engine behind the
//! fast history evaluator.
//!
//! A rule indexed by `N` holds `N + 1` node/weight pairs `(lambda_j, w_j)`
//! approximating
//!
//! ```text
//! integral_0^inf lambda^a e^(-T lambda) f(lambda) d lambda  ~=  sum_j w_j f(lambda_j),
//! ```
//!
//! exactly when `f` is a polynomial of degree <= 2N + 1.  Applied to
//! `f(lambda) = e^(-t lambda)` this turns the Laplace representation of the
//! power-law kernel into a short sum of decaying exponentials; the quadrature
//! error decays like `(t/(t+T))^(2N)` (see [`error_envelope`]), so modest `N`
//! gives machine precision as long as `t` stays a bounded multiple of the
//! scale `T`.
//!
//! Nodes and weights come from the Golub–Welsch eigenproblem for the Jacobi
//! matrix of the weight `lambda^a e^(-lambda)`, solved by an implicit-shift QL
//! iteration that carries only the first eigenvector component of each
//! eigenvalue (all a weight needs), keeping construction O(N^2).

use crate::error::{Error, Result};
use crate::specfun;
use std::f64::consts::PI;

/// Hard cap on the rule index; construction is O(N^2) and nothing in the fast
/// evaluator ever asks for more than a few hundred nodes.
const MAX_ORDER: usize = 2048;

/// A generalized Gauss–Laguerre rule, possibly rescaled and/or truncated.
///
/// `nodes` are sorted ascending.  For rule indices beyond ~540 the outermost
/// weights fall below the smallest positive `f64` and flush to zero; the
/// orders selected by the fast evaluator stay far under that.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    /// Exponent `a` of the weight `lambda^a e^(-T lambda)`.
    pub weight_param: f64,
    /// Decay scale `T` of the weight (1 for a freshly constructed rule).
    pub scale: f64,
    /// Rule index `N`: an untruncated rule has `N + 1` points, the roots of
    /// the generalized Laguerre polynomial of degree `N + 1`.
    pub order: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    /// Build the `N + 1`-point rule for weight `lambda^a e^(-lambda)`.
    ///
    /// Requires `a > -1` (integrability at 0) and `N <= 2048`.
    ///
    /// # Examples
    ///
    /// ```
    /// use fracconv::QuadratureRule;
    /// let rule = QuadratureRule::gauss_laguerre(0.0, 1).unwrap();
    /// // Two-point rule: nodes 2 -+ sqrt(2), weights (2 +- sqrt(2))/4.
    /// assert!((rule.nodes[0] - (2.0 - 2f64.sqrt())).abs() < 1e-14);
    /// assert!((rule.weights[0] - (2.0 + 2f64.sqrt()) / 4.0).abs() < 1e-14);
    /// ```
    pub fn gauss_laguerre(weight_param: f64, order: usize) -> Result<Self> {
        if !(weight_param > -1.0) {
            return Err(Error::InvalidParameter(format!(
                "quadrature weight exponent must exceed -1, got {weight_param}"
            )));
        }
        if order > MAX_ORDER {
            return Err(Error::InvalidParameter(format!(
                "rule index {order} exceeds supported maximum {MAX_ORDER}"
            )));
        }
        let n = order + 1;
        // Jacobi matrix of the monic generalized Laguerre recurrence:
        // diagonal 2k + a + 1, off-diagonal sqrt(k (k + a)).
        let mut diag: Vec<f64> = (0..n)
            .map(|k| 2.0 * k as f64 + weight_param + 1.0)
            .collect();
        let mut off: Vec<f64> = (1..n)
            .map(|k| (k as f64 * (k as f64 + weight_param)).sqrt())
            .collect();
        let mut first = vec![0.0f64; n];
        first[0] = 1.0;
        tridiagonal_ql(&mut diag, &mut off, &mut first)?;

        let mut order_idx: Vec<usize> = (0..n).collect();
        order_idx.sort_by(|&i, &j| diag[i].total_cmp(&diag[j]));
        let mu0 = specfun::gamma(weight_param + 1.0)?;
        let nodes: Vec<f64> = order_idx.iter().map(|&i| diag[i]).collect();
        let weights: Vec<f64> = order_idx
            .iter()
            .map(|&i| mu0 * first[i] * first[i])
            .collect();
        Ok(QuadratureRule {
            weight_param,
            scale: 1.0,
            order,
            nodes,
            weights,
        })
    }

    /// Rescale to the weight `lambda^a e^(-t lambda)`: nodes shrink by `t`,
    /// weights pick up `t^(-a-1)`.  `t` must be positive.
    pub fn scaled(&self, t: f64) -> Result<Self> {
        if !(t > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "quadrature scale must be positive, got {t}"
            )));
        }
        let wscale = t.powf(-self.weight_param - 1.0);
        Ok(QuadratureRule {
            weight_param: self.weight_param,
            scale: self.scale * t,
            order: self.order,
            nodes: self.nodes.iter().map(|x| x / t).collect(),
            weights: self.weights.iter().map(|w| w * wscale).collect(),
        })
    }

    /// Drop the large-node tail, keeping the first
    /// [`truncation_count`]`(a, N, eps0)` points.
    ///
    /// The retained count is chosen so the discarded weights sum to O(eps0):
    /// the weights decay like `exp(-pi^2 (j+1)^2 / (4 (N+1)))`, so nodes past
    /// the cutoff contribute nothing at the target accuracy no matter how
    /// slowly the integrand decays.
    pub fn truncated(&self, eps0: f64) -> Self {
        let keep = truncation_count(self.weight_param, self.order, eps0).min(self.nodes.len());
        QuadratureRule {
            weight_param: self.weight_param,
            scale: self.scale,
            order: self.order,
            nodes: self.nodes[..keep].to_vec(),
            weights: self.weights[..keep].to_vec(),
        }
    }

    /// Apply the rule to `f`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Number of points kept when the index-`N` rule for weight parameter `a` is
/// truncated at tail tolerance `eps0`:
///
/// ```text
/// q = min(N, ceil((2/pi) sqrt((N+1) ln((N+1)^a / eps0))) - 1),
/// ```
///
/// and the retained count is `q + 1`.  When the logarithm's argument drops to
/// 1 or below the decay criterion is vacuous and the full rule is kept.
pub fn truncation_count(weight_param: f64, order: usize, eps0: f64) -> usize {
    let n1 = (order + 1) as f64;
    let arg = n1.powf(weight_param) / eps0;
    if !(arg > 1.0) {
        return order + 1;
    }
    let q_formula = ((2.0 / PI) * (n1 * arg.ln()).sqrt()).ceil() - 1.0;
    let q = (q_formula.max(0.0) as usize).min(order);
    q + 1
}

/// Envelope of the quadrature error committed when the index-`N` rule at
/// scale `T` is applied to `e^(-t lambda)`:
///
/// ```text
/// T^(-a-1) * (t / (t + T))^(2N).
/// ```
///
/// The true error is below a modest constant times this for all `t >= 0`; the
/// fast evaluator chooses per-level orders by inverting this bound.
pub fn error_envelope(weight_param: f64, order: usize, t: f64, scale: f64) -> f64 {
    let ratio = t / (t + scale);
    scale.powf(-weight_param - 1.0) * ratio.powi(2 * order as i32)
}

/// Implicit-shift QL iteration for a symmetric tridiagonal matrix,
/// accumulating only the first component of each eigenvector.
///
/// On return `diag` holds the (unsorted) eigenvalues and `first[i]` the first
/// component of the normalized eigenvector for `diag[i]`.  `off[i]` is the
/// entry coupling rows `i` and `i + 1` and is destroyed.
fn tridiagonal_ql(diag: &mut [f64], off: &mut [f64], first: &mut [f64]) -> Result<()> {
    let n = diag.len();
    if n == 1 {
        return Ok(());
    }
    debug_assert_eq!(off.len(), n - 1);
    // Sentinel slot so e[m] with m = n-1 is addressable inside the sweep.
    let mut e = off.to_vec();
    e.push(0.0);

    for l in 0..n {
        let mut iterations = 0;
        loop {
            // Find the first negligible coupling at or after l; the block
            // [l, m] is then isolated.
            let mut m = l;
            while m + 1 < n {
                let dd = diag[m].abs() + diag[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iterations += 1;
            if iterations > 50 {
                return Err(Error::ConvergenceFailure(format!(
                    "QL iteration stalled on eigenvalue {l} of {n}"
                )));
            }
            // Wilkinson-style shift from the 2x2 block at l.
            let mut g = (diag[l + 1] - diag[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = diag[m] - diag[l] + e[l] / (g + r.copysign(g));
            let mut s = 1.0f64;
            let mut c = 1.0f64;
            let mut p = 0.0f64;
            let mut underflowed = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    // Rotation annihilated prematurely; restart the sweep.
                    diag[i + 1] -= p;
                    e[m] = 0.0;
                    underflowed = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = diag[i + 1] - p;
                r = (diag[i] - g) * s + 2.0 * c * b;
                p = s * r;
                diag[i + 1] = g + p;
                g = c * r - b;
                // The same Givens rotation applied to the tracked first row
                // of the eigenvector matrix.
                f = first[i + 1];
                first[i + 1] = s * first[i] + c * f;
                first[i] = c * first[i] - s * f;
            }
            if underflowed {
                continue;
            }
            diag[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}
