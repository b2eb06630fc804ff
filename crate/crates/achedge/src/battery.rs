//! The verification battery behind `achedge verify`: every cross-check the
//! library supports, run against one problem, with machine-readable
//! pass/fail results. The acceptance test suite runs the same checks at
//! pinned scales; the battery applies them to whatever problem the user
//! configured.

use achedge_core::dual::{self, QuadConfig};
use achedge_core::model::{positivity_margins, validate_problem, ProblemSpec};
use achedge_core::rng;
use achedge_core::simulate::{
    gradient_check, mc_certainty_equivalent, sample_path, BaseStrategy, McConfig, Perturbation,
    StrategySource,
};
use achedge_core::strategy::{feedback_rate, initial_rate, integrate_closed_loop};
use achedge_core::variational::{
    evaluate_delta, solve_closed_form, solve_discretized, VariationalInstance,
};
use serde::Serialize;

/// One check outcome. `measured` and `tolerance` are in the same units, and
/// the check passes when `measured <= tolerance` (margins are reported as
/// negated minima so the convention holds everywhere).
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub check: &'static str,
    pub pass: bool,
    pub measured: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl CheckResult {
    fn bounded(check: &'static str, measured: f64, tolerance: f64, detail: String) -> Self {
        CheckResult {
            check,
            pass: measured <= tolerance,
            measured,
            tolerance,
            detail,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BatteryOptions {
    pub paths: u64,
    pub steps: usize,
    pub seed: u64,
    pub quad_nodes: usize,
    /// Random liquidation-preserving directions for the gradient check.
    pub gradient_directions: usize,
    /// Seeds for the martingale-residual convergence ratio.
    pub residual_seeds: usize,
}

impl Default for BatteryOptions {
    fn default() -> Self {
        Self {
            paths: crate::config::DEFAULT_PATHS,
            steps: crate::config::DEFAULT_STEPS,
            seed: crate::config::DEFAULT_SEED,
            quad_nodes: crate::config::DEFAULT_QUAD_NODES,
            gradient_directions: 5,
            residual_seeds: 3,
        }
    }
}

/// Deterministic random direction for the gradient check.
pub fn random_direction(seed: u64, index: u64, n_steps: usize, horizon: f64) -> Perturbation {
    let raw: Vec<f64> = (0..n_steps)
        .map(|i| 2.0 * rng::uniform(seed ^ 0x677261645f646972, index, i as u64) - 1.0)
        .collect();
    Perturbation::centered(raw, horizon).expect("centered directions are liquidation-preserving")
}

/// Runs the full battery. If validation fails, that single failed check is
/// returned and everything else is skipped.
pub fn run_battery(problem: &ProblemSpec, opts: &BatteryOptions) -> Vec<CheckResult> {
    let mut results = Vec::new();

    // 1. validation and positivity margins
    let p = match validate_problem(*problem) {
        Ok(p) => p,
        Err(e) => {
            results.push(CheckResult {
                check: "validation",
                pass: false,
                measured: f64::NAN,
                tolerance: 0.0,
                detail: format!("{e}; remaining checks skipped"),
            });
            return results;
        }
    };
    let (m_rate, m_target) = positivity_margins(&p);
    results.push(CheckResult::bounded(
        "validation",
        -m_rate.min(m_target),
        0.0,
        format!("denominator margins {m_rate:.6e}, {m_target:.6e} (must stay positive)"),
    ));

    let inst = dual::i_instance(&p);

    // 2. closed form vs discretized oracle
    results.push(oracle_equivalence(&inst));

    // 3. and 4. optimizer structure on a fine grid
    results.push(euler_lagrange(&inst));
    results.push(energy_identity(&inst));

    // 5. initial-rate consistency chain
    results.push(consistency_chain(&p));

    // 6. liquidation of the closed loop
    results.push(liquidation(&p, opts.seed));

    // 7. quadrature convergence + strong duality
    let quad = QuadConfig {
        nodes: opts.quad_nodes,
        rel_tolerance: 1e-6,
    };
    match dual::dual_value(&p, &quad) {
        Ok(report) => {
            results.push(CheckResult::bounded(
                "quadrature-convergence",
                report.quad_error_estimate,
                1e-6 * (1.0 + report.total.abs()),
                format!(
                    "j_integral {} at {} nodes",
                    report.j_integral, report.quad_nodes
                ),
            ));
            results.push(strong_duality(&p, opts, report.total));
        }
        Err(e) => results.push(CheckResult {
            check: "quadrature-convergence",
            pass: false,
            measured: f64::NAN,
            tolerance: 0.0,
            detail: format!("{e}"),
        }),
    }

    // 8. first-order optimality of the feedback strategy
    results.push(gradient_at_optimum(&p, opts));

    // 9. martingale-structure residual convergence
    results.push(martingale_ratio(&p, opts));

    results
}

fn oracle_equivalence(inst: &VariationalInstance) -> CheckResult {
    let n = 2000;
    match (solve_closed_form(inst), solve_discretized(inst, n)) {
        (Ok(sol), Ok(traj)) => {
            let rel = (sol.value - traj.objective_value).abs() / (1.0 + sol.value.abs());
            let mut sup = 0.0f64;
            for (i, &t) in traj.grid.iter().enumerate() {
                let cf = evaluate_delta(&sol, inst, t.min(inst.horizon_v)).unwrap_or(f64::NAN);
                sup = sup.max((cf - traj.values[i]).abs());
            }
            CheckResult::bounded(
                "oracle-equivalence",
                rel.max(sup / 10.0),
                1e-4,
                format!("value gap {rel:.3e} (tol 1e-4), trajectory sup {sup:.3e} (tol 1e-3)"),
            )
        }
        (Err(e), _) | (_, Err(e)) => CheckResult {
            check: "oracle-equivalence",
            pass: false,
            measured: f64::NAN,
            tolerance: 1e-4,
            detail: format!("{e}"),
        },
    }
}

fn euler_lagrange(inst: &VariationalInstance) -> CheckResult {
    let sol = match solve_closed_form(inst) {
        Ok(s) => s,
        Err(e) => {
            return CheckResult {
                check: "euler-lagrange",
                pass: false,
                measured: f64::NAN,
                tolerance: 1e-6,
                detail: format!("{e}"),
            }
        }
    };
    let n = 10_000usize;
    let h = inst.horizon_v / n as f64;
    let rho = inst.rho();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut prev = evaluate_delta(&sol, inst, 0.0).unwrap();
    let mut here = evaluate_delta(&sol, inst, h).unwrap();
    for i in 1..n {
        let next = evaluate_delta(&sol, inst, ((i + 1) as f64 * h).min(inst.horizon_v)).unwrap();
        let c = (next - 2.0 * here + prev) / (h * h) - rho * here;
        lo = lo.min(c);
        hi = hi.max(c);
        prev = here;
        here = next;
    }
    let mid = 0.5 * (lo + hi);
    CheckResult::bounded(
        "euler-lagrange",
        (hi - lo) / (1.0 + mid.abs()),
        1e-6,
        format!("second difference minus rho*delta spans [{lo:.6e}, {hi:.6e}]"),
    )
}

fn energy_identity(inst: &VariationalInstance) -> CheckResult {
    let sol = match solve_closed_form(inst) {
        Ok(s) => s,
        Err(e) => {
            return CheckResult {
                check: "energy-identity",
                pass: false,
                measured: f64::NAN,
                tolerance: 1e-6,
                detail: format!("{e}"),
            }
        }
    };
    let n = 10_000usize; // even: composite Simpson
    let h = inst.horizon_v / n as f64;
    let rho = inst.rho();
    let f = |t: f64| {
        let d = evaluate_delta(&sol, inst, t).unwrap();
        let dd = achedge_core::variational::delta_derivative(&sol, inst, t).unwrap();
        rho * d * d + dd * dd
    };
    let mut acc = f(0.0) + f(inst.horizon_v);
    for i in 1..n {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    let quad = acc * h / 3.0;
    let sq = inst.sqrt_rho();
    let z = sq * inst.horizon_v;
    let tanh_half = (0.5 * z).tanh();
    let pinned = sol.x_bar * tanh_half - sq * sol.y_bar;
    let denom = z - 2.0 * tanh_half;
    let closed = sq * (sol.x_bar * sol.x_bar / z.tanh() + pinned * pinned / denom);
    CheckResult::bounded(
        "energy-identity",
        (quad - closed).abs() / (1.0 + closed.abs()),
        1e-6,
        format!("quadrature {quad:.12e} vs closed form {closed:.12e}"),
    )
}

fn consistency_chain(p: &ProblemSpec) -> CheckResult {
    let via_mean = (dual::m0_hat(p) - p.s0) / p.lambda_impact;
    let rate = initial_rate(p);
    let fb = feedback_rate(p, 0.0, p.s0, p.phi0).unwrap_or(f64::NAN);
    let rel = ((via_mean - rate).abs().max((fb - rate).abs())) / (1.0 + rate.abs());
    CheckResult::bounded(
        "consistency-chain",
        rel,
        1e-12,
        format!("(m0_hat - s0)/lambda = {via_mean:.15e}, initial rate = {rate:.15e}"),
    )
}

fn liquidation(p: &ProblemSpec, seed: u64) -> CheckResult {
    let n = 4000;
    let path = sample_path(p, n, seed, 0);
    match integrate_closed_loop(p, &path) {
        Ok(strat) => {
            let pre_forced = strat.position[n - 1].abs();
            let tol = 0.01 * p.phi0.abs() + 0.01;
            let exact_zero = strat.position[n] == 0.0;
            CheckResult {
                check: "liquidation",
                pass: pre_forced <= tol && exact_zero,
                measured: pre_forced,
                tolerance: tol,
                detail: format!(
                    "|position| before the forced step {pre_forced:.3e}; terminal exactly zero: {exact_zero}"
                ),
            }
        }
        Err(e) => CheckResult {
            check: "liquidation",
            pass: false,
            measured: f64::NAN,
            tolerance: 0.0,
            detail: format!("{e}"),
        },
    }
}

fn strong_duality(p: &ProblemSpec, opts: &BatteryOptions, dual_total: f64) -> CheckResult {
    let cfg = McConfig::new(opts.paths, opts.steps, opts.seed);
    match mc_certainty_equivalent(p, &cfg, &StrategySource::feedback()) {
        Ok(est) => {
            let gap = (est.value - dual_total).abs();
            let ratio = if est.std_err > 0.0 {
                gap / est.std_err
            } else if gap == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            CheckResult::bounded(
                "strong-duality",
                ratio,
                3.0,
                format!(
                    "CE {} +- {} vs dual total {} ({} paths x {} steps)",
                    est.value, est.std_err, dual_total, opts.paths, opts.steps
                ),
            )
        }
        Err(e) => CheckResult {
            check: "strong-duality",
            pass: false,
            measured: f64::NAN,
            tolerance: 3.0,
            detail: format!("{e}"),
        },
    }
}

fn gradient_at_optimum(p: &ProblemSpec, opts: &BatteryOptions) -> CheckResult {
    // This check runs at its own calibrated scale rather than the user's:
    // the discrete feedback strategy sits O(dt) away from the discrete
    // optimum, so the measured slope carries an O(1/steps) bias, while for
    // claims near half the admissibility bound the weight distribution is
    // heavy-tailed enough that slope standard errors destabilize at small
    // path counts. 5000 paths x 2000 steps keeps the bias safely inside
    // the noise with stable error estimates.
    let steps = opts.steps.max(2_000);
    let paths = opts.paths.clamp(1_000, 5_000);
    let cfg = McConfig::new(paths, steps, opts.seed);
    let mut worst = 0.0f64;
    let mut detail = String::new();
    for k in 0..opts.gradient_directions {
        let psi = random_direction(opts.seed, k as u64, steps, p.t_horizon);
        match gradient_check(p, &cfg, BaseStrategy::Feedback, &psi, &[0.02]) {
            Ok(slopes) => {
                let s = &slopes[0];
                let ratio = if s.std_err > 0.0 {
                    s.slope.abs() / s.std_err
                } else if s.slope == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                };
                worst = worst.max(ratio);
            }
            Err(e) => {
                return CheckResult {
                    check: "gradient-at-optimum",
                    pass: false,
                    measured: f64::NAN,
                    tolerance: 3.0,
                    detail: format!("{e}"),
                }
            }
        }
    }
    detail.push_str(&format!(
        "max |slope|/se over {} directions at {} paths x {} steps",
        opts.gradient_directions, paths, steps
    ));
    CheckResult::bounded("gradient-at-optimum", worst, 3.0, detail)
}

fn martingale_ratio(p: &ProblemSpec, opts: &BatteryOptions) -> CheckResult {
    // Trivial dual objects (kappa = 0 with mu = 0 and phi0 = 0) give a
    // residual that is zero to round-off at any resolution; the ratio is
    // then meaningless and the residual itself is the check.
    let n = 1000;
    let mut worst_ratio: f64 = 2.0;
    let mut residuals = Vec::new();
    for s in 0..opts.residual_seeds {
        let seed = opts.seed.wrapping_add(s as u64);
        let coarse = match dual::verify_martingale_structure(p, seed, n) {
            Ok(r) => r,
            Err(e) => {
                return CheckResult {
                    check: "martingale-residual",
                    pass: false,
                    measured: f64::NAN,
                    tolerance: 0.0,
                    detail: format!("{e}"),
                }
            }
        };
        let fine = dual::verify_martingale_structure(p, seed, 2 * n).unwrap_or(f64::NAN);
        residuals.push((coarse, fine));
        if fine > 1e-12 {
            let ratio = coarse / fine;
            if (ratio - 2.0).abs() > (worst_ratio - 2.0).abs() {
                worst_ratio = ratio;
            }
        }
    }
    let degenerate = residuals.iter().all(|&(c, f)| c <= 1e-12 && f <= 1e-12);
    if degenerate {
        let max_res = residuals.iter().fold(0.0f64, |a, &(c, f)| a.max(c).max(f));
        return CheckResult::bounded(
            "martingale-residual",
            max_res,
            1e-12,
            "all dual objects vanish; residual is round-off".to_string(),
        );
    }
    CheckResult {
        check: "martingale-residual",
        pass: worst_ratio > 1.7 && worst_ratio < 2.35,
        measured: worst_ratio,
        tolerance: 2.35,
        detail: format!(
            "halving ratio at n={n}->{} across {} seeds (window 1.7..2.35); residuals {:?}",
            2 * n,
            opts.residual_seeds,
            residuals
        ),
    }
}

/// Residual statistics across a sweep of seeds, for `verify --seed-sweep`.
#[derive(Debug, Clone, Serialize)]
pub struct ResidualSweep {
    pub seeds: usize,
    pub n_steps: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub mean_ratio: f64,
    pub max_residual_fine: f64,
}

pub fn residual_seed_sweep(
    p: &ProblemSpec,
    base_seed: u64,
    seeds: usize,
    n_steps: usize,
) -> Result<ResidualSweep, achedge_core::Error> {
    let mut ratios = Vec::with_capacity(seeds);
    let mut max_fine = 0.0f64;
    for s in 0..seeds {
        let seed = base_seed.wrapping_add(s as u64);
        let coarse = dual::verify_martingale_structure(p, seed, n_steps)?;
        let fine = dual::verify_martingale_structure(p, seed, 2 * n_steps)?;
        max_fine = max_fine.max(fine);
        if fine > 0.0 {
            ratios.push(coarse / fine);
        }
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len().max(1) as f64;
    Ok(ResidualSweep {
        seeds,
        n_steps,
        min_ratio: ratios.iter().copied().fold(f64::INFINITY, f64::min),
        max_ratio: ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean_ratio: mean,
        max_residual_fine: max_fine,
    })
}
