//! End-to-end checks of the compressed-history evaluator: agreement with a
//! from-scratch oracle, with the quadratic-cost reference evaluator, and with
//! analytic convolutions; bounded-memory and stepsize-uniformity guarantees.

use std::f64::consts::PI;

use fracconv::corrections::CorrectionSet;
use fracconv::direct::DirectConvolution;
use fracconv::fast::{FastConvolution, FastParams};
use fracconv::specfun::gamma;
use fracconv::{Corrected, HistoryOp, InterpKind};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn params(
    alpha: f64,
    tau: f64,
    n0: usize,
    basis: usize,
    eps: f64,
    horizon_steps: usize,
    kind: InterpKind,
) -> FastParams {
    FastParams {
        alpha,
        tau,
        delta_t: n0 as f64 * tau,
        basis,
        eps,
        eps0: 1e-16,
        kind,
        horizon: horizon_steps as f64 * tau,
    }
}

/// The incremental block/cache machinery must reproduce the same quadrature
/// sums as a stateless re-integration of the full sample log.
#[test]
fn incremental_history_matches_from_scratch_recomputation() {
    for &(alpha, basis, n0, dim) in &[
        (-0.5_f64, 2_usize, 1_usize, 1_usize),
        (0.3, 5, 7, 2),
        (-0.9, 5, 1, 1),
    ] {
        let p = params(alpha, 0.05, n0, basis, 1e-10, 1100, InterpKind::Quadratic);
        let mut conv = FastConvolution::new(p, dim).unwrap();
        let mut rng = StdRng::seed_from_u64(0x0f_ace + basis as u64);
        let mut log = Vec::new();
        for n in 0..1000usize {
            let u: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            log.extend_from_slice(&u);
            conv.push_sample(&u).unwrap();
            if n > n0 {
                let inc = conv.history_eval(n).unwrap();
                let refv = conv.reference_history(&log, n).unwrap();
                for c in 0..dim {
                    let tol = 1e-13 * refv[c].abs().max(1.0);
                    assert!(
                        (inc[c] - refv[c]).abs() <= tol,
                        "α={alpha} B={basis} n={n} c={c}: incremental {} vs reference {}",
                        inc[c],
                        refv[c]
                    );
                }
            }
        }
    }
}

/// The compressed history may deviate from the exact (direct) history only at
/// the quadrature accuracy level, uniformly over a long run.
#[test]
fn compressed_history_tracks_direct_history() {
    let tau = 0.1;
    let n0 = 10;
    let p = params(-0.5, tau, n0, 5, 1e-10, 450, InterpKind::Quadratic);
    let mut fast = FastConvolution::new(p, 1).unwrap();
    let mut slow = DirectConvolution::new(-0.5, tau, 1.0, InterpKind::Quadratic, 1).unwrap();
    let mut rng = StdRng::seed_from_u64(0xdec_0de);
    let mut worst = 0.0_f64;
    for n in 0..=400usize {
        let u = rng.gen_range(-1.0..1.0);
        fast.push_sample(&[u]).unwrap();
        slow.push_scalar(u).unwrap();
        if n > n0 {
            let h_fast = fast.history_eval(n).unwrap()[0];
            let h_exact = slow.split_eval(n).unwrap().1[0];
            worst = worst.max((h_fast - h_exact).abs());
        }
    }
    assert!(worst <= 1e-8, "history gap {worst} exceeds 1e-8");
}

/// For the linear input u = 1 + t the interpolation is exact, so the fast
/// history must match the analytic windowed convolution to quadrature
/// accuracy at every step of a 10^4-step run.
#[test]
fn history_matches_analytic_windowed_convolution() {
    // With kernel order -1/2 and a one-step window,
    //   int_0^(t-1) (t-s)^(-3/2) (1+s) / Gamma(-1/2) ds
    //     = -(2 + t - 2 sqrt(t) - 1/sqrt(t)) / sqrt(pi).
    let exact = |t: f64| -(2.0 + t - 2.0 * t.sqrt() - 1.0 / t.sqrt()) / PI.sqrt();
    let p = params(-0.5, 1.0, 1, 5, 1e-10, 10_050, InterpKind::Quadratic);
    let mut conv = FastConvolution::new(p, 1).unwrap();
    let mut worst = 0.0_f64;
    for n in 0..=10_000usize {
        let t = n as f64;
        conv.push_sample(&[1.0 + t]).unwrap();
        if n == 1 {
            assert_eq!(conv.history_eval(1).unwrap()[0], 0.0);
        }
        if n >= 2 {
            let h = conv.history_eval(n).unwrap()[0];
            let e = exact(t);
            worst = worst.max((h - e).abs() / e.abs());
        }
    }
    assert!(worst <= 1e-10, "relative history error {worst} exceeds 1e-10");
}

/// Full fast evaluation (local + compressed history) against the analytic
/// half-derivative of 1 + t over 10^5 steps.
#[test]
fn full_evaluation_matches_analytic_derivative_long_run() {
    // d^(1/2)/dt^(1/2) (1 + t) = (1 + 2t) / sqrt(pi t).
    let exact = |t: f64| (1.0 + 2.0 * t) / (PI * t).sqrt();
    let tau = 0.1;
    let p = params(-0.5, tau, 10, 5, 1e-10, 100_200, InterpKind::Quadratic);
    let mut conv = FastConvolution::new(p, 1).unwrap();
    let mut worst = 0.0_f64;
    for n in 0..=100_000usize {
        let t = n as f64 * tau;
        conv.push_sample(&[1.0 + t]).unwrap();
        if n >= 2 {
            let v = conv.eval(n).unwrap()[0];
            let e = exact(t);
            worst = worst.max((v - e).abs() / e.abs());
        }
    }
    assert!(worst <= 1e-10, "relative error {worst} exceeds 1e-10");
}

/// Active memory must stay below a step-count-independent budget derived
/// from the window length and the per-level mode counts.
#[test]
fn retained_state_bounded_independent_of_steps() {
    let basis = 5usize;
    let n0 = 1usize;
    let p = params(-0.5, 1.0, n0, basis, 1e-10, 100_500, InterpKind::Quadratic);
    let mut conv = FastConvolution::new(p, 1).unwrap();
    let budget: usize = {
        let per_level: usize = conv
            .level_diagnostics()
            .iter()
            .map(|d| (2 * basis + 1) * d.retained)
            .sum();
        2 * (n0 + per_level)
    };
    let mut seen = Vec::new();
    for n in 0..100_000usize {
        conv.push_sample(&[(0.1 * n as f64).sin()]).unwrap();
        if n + 1 == 1_000 || n + 1 == 10_000 || n + 1 == 100_000 {
            let held = conv.retained_reals();
            assert!(
                held <= budget,
                "retained {held} exceeds budget {budget} at {} steps",
                n + 1
            );
            seen.push(held);
        }
    }
    assert_eq!(seen.len(), 3);
    // FIFO discipline: no level holds more than 2B+1 sealed blocks.
    for d in conv.level_diagnostics() {
        assert!(
            d.blocks_held <= 2 * basis + 1,
            "level {} holds {} blocks",
            d.level,
            d.blocks_held
        );
    }
}

/// The fast-vs-direct gap is governed by the quadrature targets alone — one
/// constant bounds it across a fourfold range of step sizes.
#[test]
fn gap_bounded_uniformly_across_stepsizes() {
    let t_end = 20.0;
    let eps = 1e-10;
    let bound = 10.0 * (t_end - 1.0) * 2.0 * (eps + 1e-16);
    for k in 5..=9u32 {
        let tau = 0.5_f64.powi(k as i32);
        let n0 = (1.0 / tau).round() as usize;
        let steps = (t_end / tau).round() as usize;
        let p = params(-0.5, tau, n0, 5, eps, steps + 10, InterpKind::Quadratic);
        let mut fast = FastConvolution::new(p, 1).unwrap();
        let mut slow = DirectConvolution::new(-0.5, tau, 1.0, InterpKind::Quadratic, 1).unwrap();
        let mut eta = 0.0_f64;
        for n in 0..=steps {
            let u = 1.0 + (n as f64 * tau).sin();
            fast.push_sample(&[u]).unwrap();
            slow.push_scalar(u).unwrap();
            if n >= 2 {
                let f = fast.eval(n).unwrap()[0];
                let d = slow.direct_eval(n).unwrap()[0];
                eta = eta.max((f - d).abs());
            }
        }
        assert!(
            eta <= bound,
            "tau = 2^-{k}: gap {eta} exceeds uniform bound {bound}"
        );
    }
}

/// Starting-weight corrections compose with the fast evaluator: the corrected
/// operator reproduces the fractional integral of t^(1/2) to far better than
/// the uncorrected scheme can.
#[test]
fn corrected_fast_operator_exact_on_singular_monomial() {
    let alpha = 0.5;
    let tau = 0.05;
    let make = || {
        FastConvolution::new(
            params(alpha, tau, 5, 3, 1e-12, 80, InterpKind::Quadratic),
            1,
        )
        .unwrap()
    };
    let set = CorrectionSet::new(vec![0.5]).unwrap();
    let companions = vec![make()];
    let mut op = Corrected::new(make(), set, companions).unwrap();
    // I^(1/2) t^(1/2) = Gamma(3/2)/Gamma(2) * t.
    let factor = gamma(1.5).unwrap() / gamma(2.0).unwrap();
    for n in 0..=60usize {
        let t = n as f64 * tau;
        op.push_sample(&[t.sqrt()]).unwrap();
        if n >= 2 {
            let v = op.eval(n).unwrap()[0];
            let e = factor * t;
            assert!(
                (v - e).abs() <= 1e-9 * e.abs().max(1.0),
                "n={n}: corrected value {v} vs exact {e}"
            );
        }
    }
}
