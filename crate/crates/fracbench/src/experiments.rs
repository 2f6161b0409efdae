//! The experiment runners behind each subcommand.
//!
//! Every runner resolves its parameters (flags override config file, config
//! file overrides defaults), fans the sweep out over a worker pool, and
//! writes one deterministic CSV plus a timing sidecar into the output
//! directory.

use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;

use fracconv::fast::{partition_for, FastConvolution, FastParams};
use fracconv::fde::{
    graded_l1_solve, linear_relaxation_solution, solve_fde_instrumented, solve_fde_system,
    solve_scalar_fde, FdeProblem, OperatorChoice, SolverConfig,
};
use fracconv::specfun::recip_gamma;
use fracconv::{HistoryOp, InterpKind, QuadratureRule};

use crate::config::{
    resolve_f64, resolve_opt_string, resolve_string, resolve_sweep, resolve_usize,
    resolve_usize_sweep, single, FileConfig,
};
use crate::report::{fmt, prepare_out_dir, write_csv, Timings};
use crate::{AppError, Common};

fn out_dir(common: &Common, file: &FileConfig) -> Result<PathBuf, AppError> {
    let dir = common
        .out
        .clone()
        .or_else(|| file.get("out").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    prepare_out_dir(&dir).map_err(AppError::Usage)?;
    Ok(dir)
}

fn single_usize(values: Vec<f64>, what: &str) -> Result<usize, AppError> {
    let v = single(values, what).map_err(AppError::Usage)?;
    if v >= 1.0 && (v - v.round()).abs() < 1e-9 {
        Ok(v.round() as usize)
    } else {
        Err(AppError::Usage(format!(
            "{what} must be a positive integer, got {v}"
        )))
    }
}

fn interp_kind(name: &str) -> Result<InterpKind, AppError> {
    match name {
        "linear" => Ok(InterpKind::Linear),
        "quadratic" => Ok(InterpKind::Quadratic),
        other => Err(AppError::Usage(format!(
            "--interp must be `linear` or `quadratic`, got `{other}`"
        ))),
    }
}

fn steps(t_end: f64, tau: f64) -> Result<usize, AppError> {
    let ratio = t_end / tau;
    let n = ratio.round();
    if !(t_end > 0.0) || !(n >= 1.0) || (ratio - n).abs() > 1e-9 * n.max(1.0) {
        return Err(AppError::Usage(format!(
            "T = {t_end} is not a positive integer multiple of tau = {tau}"
        )));
    }
    Ok(n as usize)
}

/// The operator applied to u(t) = 1 + t in closed form (finite part for
/// negative orders).
fn ramp_exact(alpha: f64, t: f64) -> f64 {
    t.powf(alpha) * recip_gamma(1.0 + alpha) + t.powf(1.0 + alpha) * recip_gamma(2.0 + alpha)
}

fn sigma_override(common: &Common, file: &FileConfig) -> Result<Option<Vec<f64>>, AppError> {
    match resolve_opt_string(common.sigma.clone(), file, "sigma") {
        Some(spec) => Ok(Some(
            crate::sweep::parse_sweep(&spec).map_err(AppError::Usage)?,
        )),
        None => Ok(None),
    }
}

/// Least-squares slope of log(error) against log(tau).
fn fitted_order(taus: &[f64], errors: &[f64]) -> f64 {
    let n = taus.len() as f64;
    let xs: Vec<f64> = taus.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Pairwise order column: empty for the first row of a group, then
/// log(e_prev/e_cur) / log(tau_prev/tau_cur).
fn pairwise_orders(taus: &[f64], errors: &[f64]) -> Vec<String> {
    let mut out = vec![String::new()];
    for i in 1..taus.len() {
        let order = (errors[i - 1] / errors[i]).ln() / (taus[i - 1] / taus[i]).ln();
        out.push(fmt(order));
    }
    out
}

/// `kernel-error`: max relative error of the compressed operator applied to
/// u = 1 + t against the closed form, per (B, eps), with retained-point
/// totals.
pub fn kernel_error(common: &Common, file: &FileConfig) -> Result<(), AppError> {
    let out = out_dir(common, file)?;
    let alpha = single(
        resolve_sweep(common.alpha.clone(), file, "alpha", "-0.5").map_err(AppError::Usage)?,
        "--alpha",
    )
    .map_err(AppError::Usage)?;
    let tau = single(
        resolve_sweep(common.tau.clone(), file, "tau", "0.1").map_err(AppError::Usage)?,
        "--tau",
    )
    .map_err(AppError::Usage)?;
    let delta_t = resolve_f64(common.delta_t, file, "deltaT", 1.0).map_err(AppError::Usage)?;
    let t_end = resolve_f64(common.t_end, file, "T", 1e4).map_err(AppError::Usage)?;
    let eps_list = resolve_sweep(common.eps.clone(), file, "eps", "1e-10").map_err(AppError::Usage)?;
    let eps0 = resolve_f64(common.eps0, file, "eps0", 1e-16).map_err(AppError::Usage)?;
    let bases =
        resolve_usize_sweep(common.basis.clone(), file, "B", "2,5,10").map_err(AppError::Usage)?;
    let kind = interp_kind(&resolve_string(
        common.interp.clone(),
        file,
        "interp",
        "quadratic",
    ))?;
    let n_t = steps(t_end, tau)?;

    let points: Vec<(usize, f64)> = bases
        .iter()
        .flat_map(|&b| eps_list.iter().map(move |&e| (b, e)))
        .collect();
    let mut timings = Timings::new(&out, "kernel-error");
    let started = Instant::now();
    let rows: Vec<Vec<String>> = points
        .par_iter()
        .map(|&(basis, eps)| -> Result<Vec<String>, AppError> {
            let params = FastParams {
                alpha,
                tau,
                delta_t,
                basis,
                eps,
                eps0,
                kind,
                horizon: t_end + 4.0 * tau,
            };
            let mut op = FastConvolution::new(params, 1)?;
            let min_n = match kind {
                InterpKind::Linear => 1,
                InterpKind::Quadratic => 2,
            };
            op.push_sample(&[1.0])?;
            let mut max_rel = 0.0_f64;
            for n in 1..=n_t {
                let t = n as f64 * tau;
                op.push_sample(&[1.0 + t])?;
                if n >= min_n {
                    let y = op.eval(n)?[0];
                    let exact = ramp_exact(alpha, t);
                    max_rel = max_rel.max((y - exact).abs() / exact.abs());
                }
            }
            let n0 = (delta_t / tau).round() as usize;
            let active = partition_for(n_t, n0, basis).level_count;
            let diags = op.level_diagnostics();
            let sum_n: usize = diags.iter().take(active).map(|d| d.order).sum();
            let sum_q: usize = diags.iter().take(active).map(|d| d.retained).sum();
            Ok(vec![
                basis.to_string(),
                fmt(eps),
                fmt(max_rel),
                sum_n.to_string(),
                sum_q.to_string(),
            ])
        })
        .collect::<Result<_, _>>()?;
    let path = out.join("kernel-error.csv");
    write_csv(&path, "B,eps,max_rel_error,sum_N,sum_q", &rows).map_err(AppError::Usage)?;
    timings.record("total", started);
    timings.write().map_err(AppError::Usage)?;
    for row in &rows {
        println!(
            "B = {:>3}  eps = {}  max_rel_error = {}  sum_N = {}  sum_q = {}",
            row[0], row[1], row[2], row[3], row[4]
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}

/// `convergence`: error norms of the corrected solver for the linear
/// relaxation problem across a step-size sweep.
pub fn convergence(common: &Common, file: &FileConfig) -> Result<(), AppError> {
    let out = out_dir(common, file)?;
    let alpha = single(
        resolve_sweep(common.alpha.clone(), file, "alpha", "0.8").map_err(AppError::Usage)?,
        "--alpha",
    )
    .map_err(AppError::Usage)?;
    let taus = resolve_sweep(common.tau.clone(), file, "tau", "2^-5..2^-9")
        .map_err(AppError::Usage)?;
    let m = resolve_usize(common.m, file, "m", 3).map_err(AppError::Usage)?;
    let t_end = resolve_f64(common.t_end, file, "T", 40.0).map_err(AppError::Usage)?;
    let delta_t = resolve_f64(common.delta_t, file, "deltaT", 0.5).map_err(AppError::Usage)?;
    let basis = single_usize(
        resolve_sweep(common.basis.clone(), file, "B", "5").map_err(AppError::Usage)?,
    "--B",
)?;
    let eps = single(
        resolve_sweep(common.eps.clone(), file, "eps", "1e-10").map_err(AppError::Usage)?,
        "--eps",
    )
    .map_err(AppError::Usage)?;
    let eps0 = resolve_f64(common.eps0, file, "eps0", 1e-16).map_err(AppError::Usage)?;
    let kind = interp_kind(&resolve_string(
        common.interp.clone(),
        file,
        "interp",
        "quadratic",
    ))?;
    let sigma = sigma_override(common, file)?;

    let problem = FdeProblem::linear_relaxation(alpha, 1.0)?;
    let mut timings = Timings::new(&out, "convergence");
    let started = Instant::now();
    let results: Vec<(f64, f64)> = taus
        .par_iter()
        .map(|&tau| -> Result<(f64, f64), AppError> {
            steps(t_end, tau)?;
            let config = SolverConfig {
                tau,
                kind,
                corrections: m,
                sigma_override: sigma.clone(),
                operator: OperatorChoice::Fast {
                    basis,
                    delta_t,
                    eps,
                    eps0,
                },
                newton_tol: 1e-12,
                newton_max_iter: 50,
            };
            let traj = solve_scalar_fde(&problem, &config, t_end)?;
            let exact = |t: f64| linear_relaxation_solution(alpha, 1.0, t).unwrap();
            Ok((traj.max_error(exact), traj.final_error(exact)))
        })
        .collect::<Result<_, _>>()?;
    let max_errors: Vec<f64> = results.iter().map(|r| r.0).collect();
    let orders = pairwise_orders(&taus, &max_errors);
    let rows: Vec<Vec<String>> = taus
        .iter()
        .zip(&results)
        .zip(&orders)
        .map(|((&tau, &(max_err, end_err)), order)| {
            vec![
                fmt(alpha),
                m.to_string(),
                fmt(tau),
                fmt(max_err),
                fmt(end_err),
                order.clone(),
            ]
        })
        .collect();
    let path = out.join("convergence.csv");
    write_csv(
        &path,
        "alpha,m,tau,max_error,endpoint_error,order",
        &rows,
    )
    .map_err(AppError::Usage)?;
    timings.record("total", started);
    if taus.len() >= 2 {
        let fit = fitted_order(&taus, &max_errors);
        timings.note("fitted_order", fmt(fit));
        println!("fitted order over {} step sizes: {fit:.4}", taus.len());
    }
    timings.write().map_err(AppError::Usage)?;
    for row in &rows {
        println!(
            "tau = {}  max_error = {}  endpoint_error = {}",
            row[2], row[3], row[4]
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}

/// `gap`: max deviation between the direct-operator and compressed-operator
/// solutions of the same problem, per (eps, tau).
pub fn gap(common: &Common, file: &FileConfig) -> Result<(), AppError> {
    let out = out_dir(common, file)?;
    let alpha = single(
        resolve_sweep(common.alpha.clone(), file, "alpha", "0.1").map_err(AppError::Usage)?,
        "--alpha",
    )
    .map_err(AppError::Usage)?;
    let taus = resolve_sweep(common.tau.clone(), file, "tau", "2^-5,2^-7,2^-9")
        .map_err(AppError::Usage)?;
    let eps_list = resolve_sweep(common.eps.clone(), file, "eps", "1e-10,1e-8,1e-6")
        .map_err(AppError::Usage)?;
    let m = resolve_usize(common.m, file, "m", 0).map_err(AppError::Usage)?;
    let t_end = resolve_f64(common.t_end, file, "T", 40.0).map_err(AppError::Usage)?;
    let delta_t = resolve_f64(common.delta_t, file, "deltaT", 0.5).map_err(AppError::Usage)?;
    let basis = single_usize(
        resolve_sweep(common.basis.clone(), file, "B", "5").map_err(AppError::Usage)?,
    "--B",
)?;
    let eps0 = resolve_f64(common.eps0, file, "eps0", 1e-16).map_err(AppError::Usage)?;
    let kind = interp_kind(&resolve_string(
        common.interp.clone(),
        file,
        "interp",
        "quadratic",
    ))?;

    let problem = FdeProblem::linear_relaxation(alpha, 1.0)?;
    let mut timings = Timings::new(&out, "gap");
    let started = Instant::now();
    // One quadratic-cost reference run per tau, shared by all eps points.
    let per_tau: Vec<Vec<(usize, usize, f64)>> = taus
        .par_iter()
        .enumerate()
        .map(|(ti, &tau)| -> Result<Vec<(usize, usize, f64)>, AppError> {
            steps(t_end, tau)?;
            let mut direct_cfg = SolverConfig::direct(tau).with_corrections(m).with_kind(kind);
            direct_cfg.sigma_override = None;
            let reference = solve_scalar_fde(&problem, &direct_cfg, t_end)?;
            let mut rows = Vec::new();
            for (ei, &eps) in eps_list.iter().enumerate() {
                let config = SolverConfig {
                    operator: OperatorChoice::Fast {
                        basis,
                        delta_t,
                        eps,
                        eps0,
                    },
                    ..direct_cfg.clone()
                };
                let fast = solve_scalar_fde(&problem, &config, t_end)?;
                let eta = (0..reference.len())
                    .map(|n| (reference.state(n)[0] - fast.state(n)[0]).abs())
                    .fold(0.0_f64, f64::max);
                rows.push((ei, ti, eta));
            }
            Ok(rows)
        })
        .collect::<Result<_, _>>()?;
    let mut flat: Vec<(usize, usize, f64)> = per_tau.into_iter().flatten().collect();
    flat.sort_by_key(|&(ei, ti, _)| (ei, ti));
    let rows: Vec<Vec<String>> = flat
        .iter()
        .map(|&(ei, ti, eta)| vec![fmt(eps_list[ei]), fmt(taus[ti]), fmt(eta)])
        .collect();
    let path = out.join("gap.csv");
    write_csv(&path, "eps,tau,eta", &rows).map_err(AppError::Usage)?;
    timings.record("total", started);
    timings.write().map_err(AppError::Usage)?;
    for row in &rows {
        println!("eps = {}  tau = {}  eta = {}", row[0], row[1], row[2]);
    }
    println!("wrote {}", path.display());
    Ok(())
}

/// `graded`: graded-mesh L1 baseline versus the corrected uniform-mesh
/// solver for a solution with a strong initial singularity.
pub fn graded(common: &Common, file: &FileConfig, r_flag: Option<String>) -> Result<(), AppError> {
    let out = out_dir(common, file)?;
    let alpha = single(
        resolve_sweep(common.alpha.clone(), file, "alpha", "0.5").map_err(AppError::Usage)?,
        "--alpha",
    )
    .map_err(AppError::Usage)?;
    let taus = resolve_sweep(common.tau.clone(), file, "tau", "2^-5..2^-9")
        .map_err(AppError::Usage)?;
    let rs = resolve_sweep(r_flag, file, "r", "1,3").map_err(AppError::Usage)?;
    let t_end = resolve_f64(common.t_end, file, "T", 1.0).map_err(AppError::Usage)?;
    let m = resolve_usize(common.m, file, "m", 1).map_err(AppError::Usage)?;
    let delta_t = resolve_f64(common.delta_t, file, "deltaT", 0.5).map_err(AppError::Usage)?;
    let basis = single_usize(
        resolve_sweep(common.basis.clone(), file, "B", "5").map_err(AppError::Usage)?,
    "--B",
)?;
    let eps = single(
        resolve_sweep(common.eps.clone(), file, "eps", "1e-10").map_err(AppError::Usage)?,
        "--eps",
    )
    .map_err(AppError::Usage)?;
    let eps0 = resolve_f64(common.eps0, file, "eps0", 1e-16).map_err(AppError::Usage)?;
    let kind = interp_kind(&resolve_string(
        common.interp.clone(),
        file,
        "interp",
        "linear",
    ))?;

    let problem = FdeProblem::linear_relaxation(alpha, 1.0)?;
    let exact = |t: f64| linear_relaxation_solution(alpha, 1.0, t).unwrap();
    let mut timings = Timings::new(&out, "graded");
    let started = Instant::now();

    // Graded-mesh points: (r, tau) pairs; corrected-fast points: tau only.
    let graded_points: Vec<(f64, f64)> = rs
        .iter()
        .flat_map(|&r| taus.iter().map(move |&tau| (r, tau)))
        .collect();
    let graded_errs: Vec<f64> = graded_points
        .par_iter()
        .map(|&(r, tau)| -> Result<f64, AppError> {
            let m_steps = steps(t_end, tau)?;
            let config = SolverConfig::direct(tau).with_kind(InterpKind::Linear);
            let traj = graded_l1_solve(&problem, &config, r, m_steps, t_end)?;
            Ok(traj.max_error(exact))
        })
        .collect::<Result<_, _>>()?;
    let fast_errs: Vec<f64> = taus
        .par_iter()
        .map(|&tau| -> Result<f64, AppError> {
            steps(t_end, tau)?;
            let config = SolverConfig {
                tau,
                kind,
                corrections: m,
                sigma_override: None,
                operator: OperatorChoice::Fast {
                    basis,
                    delta_t,
                    eps,
                    eps0,
                },
                newton_tol: 1e-12,
                newton_max_iter: 50,
            };
            let traj = solve_scalar_fde(&problem, &config, t_end)?;
            Ok(traj.max_error(exact))
        })
        .collect::<Result<_, _>>()?;

    let mut rows: Vec<Vec<String>> = Vec::new();
    for (ri, &r) in rs.iter().enumerate() {
        let errs = &graded_errs[ri * taus.len()..(ri + 1) * taus.len()];
        let orders = pairwise_orders(&taus, errs);
        for ((&tau, &err), order) in taus.iter().zip(errs).zip(&orders) {
            rows.push(vec![
                "graded-l1".to_string(),
                format!("{r}"),
                fmt(tau),
                fmt(err),
                order.clone(),
            ]);
        }
        timings.note(
            &format!("fitted_order_graded_r_{r}"),
            fmt(fitted_order(&taus, errs)),
        );
    }
    let fast_orders = pairwise_orders(&taus, &fast_errs);
    for ((&tau, &err), order) in taus.iter().zip(&fast_errs).zip(&fast_orders) {
        rows.push(vec![
            "corrected-fast".to_string(),
            String::new(),
            fmt(tau),
            fmt(err),
            order.clone(),
        ]);
    }
    timings.note(
        "fitted_order_corrected_fast",
        fmt(fitted_order(&taus, &fast_errs)),
    );

    let path = out.join("graded.csv");
    write_csv(&path, "method,r,tau,max_error,order", &rows).map_err(AppError::Usage)?;
    timings.record("total", started);
    timings.write().map_err(AppError::Usage)?;
    for row in &rows {
        println!(
            "{:<15} r = {:<3} tau = {}  max_error = {}",
            row[0], row[1], row[2], row[3]
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}

/// `lorenz`: integrate the fractional Lorenz-type system and write the
/// trajectory with the squared norm per step.
pub fn lorenz(
    common: &Common,
    file: &FileConfig,
    stride_flag: Option<usize>,
) -> Result<(), AppError> {
    let out = out_dir(common, file)?;
    let alpha_list =
        resolve_sweep(common.alpha.clone(), file, "alpha", "0.9").map_err(AppError::Usage)?;
    let alphas: [f64; 3] = match alpha_list.len() {
        1 => [alpha_list[0]; 3],
        3 => [alpha_list[0], alpha_list[1], alpha_list[2]],
        n => {
            return Err(AppError::Usage(format!(
                "--alpha for the Lorenz system takes 1 or 3 values, got {n}"
            )))
        }
    };
    let tau = single(
        resolve_sweep(common.tau.clone(), file, "tau", "0.01").map_err(AppError::Usage)?,
        "--tau",
    )
    .map_err(AppError::Usage)?;
    let t_end = resolve_f64(common.t_end, file, "T", 1000.0).map_err(AppError::Usage)?;
    let m = resolve_usize(common.m, file, "m", 2).map_err(AppError::Usage)?;
    let delta_t = resolve_f64(common.delta_t, file, "deltaT", tau).map_err(AppError::Usage)?;
    let basis = single_usize(
        resolve_sweep(common.basis.clone(), file, "B", "5").map_err(AppError::Usage)?,
    "--B",
)?;
    let eps = single(
        resolve_sweep(common.eps.clone(), file, "eps", "1e-10").map_err(AppError::Usage)?,
        "--eps",
    )
    .map_err(AppError::Usage)?;
    let eps0 = resolve_f64(common.eps0, file, "eps0", 1e-16).map_err(AppError::Usage)?;
    let kind = interp_kind(&resolve_string(
        common.interp.clone(),
        file,
        "interp",
        "quadratic",
    ))?;
    let stride = resolve_usize(stride_flag, file, "stride", 1).map_err(AppError::Usage)?;
    if stride == 0 {
        return Err(AppError::Usage("--stride must be at least 1".into()));
    }
    steps(t_end, tau)?;

    let problem = FdeProblem::lorenz(alphas)?;
    let config = SolverConfig {
        tau,
        kind,
        corrections: m,
        sigma_override: None,
        operator: OperatorChoice::Fast {
            basis,
            delta_t,
            eps,
            eps0,
        },
        newton_tol: 1e-12,
        newton_max_iter: 50,
    };
    let mut timings = Timings::new(&out, "lorenz");
    let started = Instant::now();
    let traj = solve_fde_system(&problem, &config, t_end)?;
    timings.record("solve", started);

    let mut rows = Vec::new();
    let mut max_sq = 0.0_f64;
    for n in 0..traj.len() {
        let s = traj.state(n);
        let sq = s.iter().map(|v| v * v).sum::<f64>();
        max_sq = max_sq.max(sq);
        if n % stride == 0 || n + 1 == traj.len() {
            rows.push(vec![
                n.to_string(),
                fmt(traj.time(n)),
                fmt(s[0]),
                fmt(s[1]),
                fmt(s[2]),
                fmt(sq),
            ]);
        }
    }
    let path = out.join("lorenz.csv");
    write_csv(&path, "n,t,U,V,W,norm_sq", &rows).map_err(AppError::Usage)?;
    timings.note("max_norm_sq", fmt(max_sq));
    timings.write().map_err(AppError::Usage)?;
    println!("max U^2+V^2+W^2 over the run: {max_sq:.6}");
    println!("wrote {}", path.display());
    Ok(())
}

/// `benchmark`: wall time of the compressed and direct solvers over growing
/// step counts, run sequentially so the clocks are meaningful, plus the
/// deterministic memory footprint of the compressed operator bank.
pub fn benchmark(
    common: &Common,
    file: &FileConfig,
    steps_flag: Option<String>,
    skip_direct: bool,
) -> Result<(), AppError> {
    let out = out_dir(common, file)?;
    let alpha = single(
        resolve_sweep(common.alpha.clone(), file, "alpha", "0.8").map_err(AppError::Usage)?,
        "--alpha",
    )
    .map_err(AppError::Usage)?;
    let tau = single(
        resolve_sweep(common.tau.clone(), file, "tau", "0.01").map_err(AppError::Usage)?,
        "--tau",
    )
    .map_err(AppError::Usage)?;
    let step_counts =
        resolve_usize_sweep(steps_flag, file, "steps", "1e4,5e4,1e5").map_err(AppError::Usage)?;
    let m = resolve_usize(common.m, file, "m", 0).map_err(AppError::Usage)?;
    let delta_t = resolve_f64(common.delta_t, file, "deltaT", 0.5).map_err(AppError::Usage)?;
    let basis = single_usize(
        resolve_sweep(common.basis.clone(), file, "B", "5").map_err(AppError::Usage)?,
    "--B",
)?;
    let eps = single(
        resolve_sweep(common.eps.clone(), file, "eps", "1e-10").map_err(AppError::Usage)?,
        "--eps",
    )
    .map_err(AppError::Usage)?;
    let eps0 = resolve_f64(common.eps0, file, "eps0", 1e-16).map_err(AppError::Usage)?;
    let kind = interp_kind(&resolve_string(
        common.interp.clone(),
        file,
        "interp",
        "quadratic",
    ))?;

    let problem = FdeProblem::cubic_decay(alpha)?;
    let mut memory_rows = Vec::new();
    let mut timing_rows = Vec::new();
    for &n in &step_counts {
        let t_end = n as f64 * tau;
        let fast_cfg = SolverConfig {
            tau,
            kind,
            corrections: m,
            sigma_override: None,
            operator: OperatorChoice::Fast {
                basis,
                delta_t,
                eps,
                eps0,
            },
            newton_tol: 1e-12,
            newton_max_iter: 50,
        };
        let clock = Instant::now();
        let report = solve_fde_instrumented(&problem, &fast_cfg, t_end)?;
        let fast_secs = clock.elapsed().as_secs_f64();
        drop(report.trajectory);
        memory_rows.push(vec![n.to_string(), report.retained_reals.to_string()]);
        timing_rows.push(vec!["fast".to_string(), n.to_string(), fmt(fast_secs)]);
        println!(
            "n = {n:>7}  fast: {fast_secs:.3} s, {} retained reals",
            report.retained_reals
        );
        if !skip_direct {
            let direct_cfg = SolverConfig::direct(tau).with_corrections(m).with_kind(kind);
            let clock = Instant::now();
            let traj = solve_scalar_fde(&problem, &direct_cfg, t_end)?;
            let direct_secs = clock.elapsed().as_secs_f64();
            drop(traj);
            timing_rows.push(vec!["direct".to_string(), n.to_string(), fmt(direct_secs)]);
            println!("n = {n:>7}  direct: {direct_secs:.3} s");
        }
    }
    let mem_path = out.join("benchmark.csv");
    write_csv(&mem_path, "n_steps,fast_retained_reals", &memory_rows).map_err(AppError::Usage)?;
    let timing_path = out.join("benchmark_timing.csv");
    write_csv(&timing_path, "engine,n_steps,seconds", &timing_rows).map_err(AppError::Usage)?;
    println!("wrote {} and {}", mem_path.display(), timing_path.display());
    Ok(())
}

/// `rule-dump`: with `--N`, the scaled and truncated quadrature rule itself;
/// otherwise the per-level rule summary of a compressed-operator
/// configuration.
pub fn rule_dump(
    common: &Common,
    file: &FileConfig,
    order_flag: Option<usize>,
) -> Result<(), AppError> {
    let out = out_dir(common, file)?;
    let alpha = single(
        resolve_sweep(common.alpha.clone(), file, "alpha", "-0.5").map_err(AppError::Usage)?,
        "--alpha",
    )
    .map_err(AppError::Usage)?;
    let eps0 = resolve_f64(common.eps0, file, "eps0", 1e-16).map_err(AppError::Usage)?;
    let path = out.join("rule-dump.csv");
    match order_flag {
        Some(order) => {
            let scale = resolve_f64(common.t_end, file, "T", 1.0).map_err(AppError::Usage)?;
            let rule = QuadratureRule::gauss_laguerre(-alpha, order)?
                .scaled(scale)?
                .truncated(eps0);
            let rows: Vec<Vec<String>> = rule
                .nodes
                .iter()
                .zip(&rule.weights)
                .enumerate()
                .map(|(j, (&x, &w))| vec![j.to_string(), fmt(x), fmt(w)])
                .collect();
            write_csv(&path, "j,node,weight", &rows).map_err(AppError::Usage)?;
            println!(
                "order {order} rule at scale {scale}: {} points retained",
                rows.len()
            );
        }
        None => {
            let tau = single(
                resolve_sweep(common.tau.clone(), file, "tau", "0.1").map_err(AppError::Usage)?,
                "--tau",
            )
            .map_err(AppError::Usage)?;
            let delta_t =
                resolve_f64(common.delta_t, file, "deltaT", 1.0).map_err(AppError::Usage)?;
            let t_end = resolve_f64(common.t_end, file, "T", 1e4).map_err(AppError::Usage)?;
            let basis = single_usize(
                resolve_sweep(common.basis.clone(), file, "B", "5").map_err(AppError::Usage)?,
            "--B",
        )?;
            let eps = single(
                resolve_sweep(common.eps.clone(), file, "eps", "1e-10")
                    .map_err(AppError::Usage)?,
                "--eps",
            )
            .map_err(AppError::Usage)?;
            let kind = interp_kind(&resolve_string(
                common.interp.clone(),
                file,
                "interp",
                "quadratic",
            ))?;
            let params = FastParams {
                alpha,
                tau,
                delta_t,
                basis,
                eps,
                eps0,
                kind,
                horizon: t_end + 4.0 * tau,
            };
            let op = FastConvolution::new(params, 1)?;
            let rows: Vec<Vec<String>> = op
                .level_diagnostics()
                .iter()
                .map(|d| {
                    vec![
                        d.level.to_string(),
                        d.order.to_string(),
                        d.retained.to_string(),
                        fmt(d.scale),
                    ]
                })
                .collect();
            write_csv(&path, "level,N,retained,scale", &rows).map_err(AppError::Usage)?;
            println!("{} levels provisioned for T = {t_end}", rows.len());
        }
    }
    println!("wrote {}", path.display());
    Ok(())
}
