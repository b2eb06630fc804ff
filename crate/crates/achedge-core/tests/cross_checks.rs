//! Cross-module checks: the closed forms against independent discretized
//! oracles, and the primal Monte Carlo estimate against the dual value.
//! The acceptance suite in the `achedge` crate re-runs these at full desk
//! scale; these stay small enough for routine test runs.

use achedge_core::dual;
use achedge_core::model::ProblemSpec;
use achedge_core::simulate::{mc_certainty_equivalent, McConfig, StrategySource};
use achedge_core::variational::{constrained_min_value, VariationalInstance};

fn worked() -> ProblemSpec {
    ProblemSpec {
        s0: 1.0,
        sigma: 1.0,
        mu: 0.0,
        lambda_impact: 1.0,
        alpha: 1.0,
        kappa: 0.25,
        t_horizon: 1.0,
        phi0: 0.0,
    }
}

fn asymmetric() -> ProblemSpec {
    ProblemSpec {
        s0: 2.0,
        sigma: 0.8,
        mu: 0.3,
        lambda_impact: 0.5,
        alpha: 2.0,
        kappa: 0.1,
        t_horizon: 2.0,
        phi0: 1.5,
    }
}

/// Thomas-algorithm solve of a symmetric positive-definite tridiagonal
/// system; deliberately separate from the library's factorization so the
/// oracle below shares no code with what it checks.
fn tridiag_solve(diag: &[f64], off: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = off[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - off[i - 1] * c[i - 1];
        if i < n - 1 {
            c[i] = off[i] / m;
        }
        d[i] = (rhs[i] - off[i - 1] * d[i - 1]) / m;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        let next = x[i + 1];
        x[i] -= c[i] * next;
    }
    x
}

/// Equality-constrained discrete minimization of the running cost
/// `int (delta' - mu)^2 / (2 alpha sigma^2) + delta^2 / (2 lambda)` over
/// piecewise-linear trajectories with `delta_0 = 0`, `delta_n = x`, and
/// trapezoid integral y. Solved exactly through the KKT system with two
/// multipliers.
fn constrained_min_oracle(inst: &VariationalInstance, x: f64, y: f64, n: usize) -> f64 {
    let h = inst.horizon_v / n as f64;
    let as2 = inst.alpha_v * inst.sigma_v * inst.sigma_v;
    let lam = inst.lambda_v;

    let mut diag = vec![2.0 / (h * as2) + 2.0 * h / (3.0 * lam); n];
    diag[n - 1] = 1.0 / (h * as2) + h / (3.0 * lam);
    let mut off = vec![0.0; n - 1];
    for o in off.iter_mut() {
        *o = -1.0 / (h * as2) + h / (6.0 * lam);
    }

    // rhs of the unconstrained stationarity; constraints enter through
    // multipliers on e_n and the trapezoid weights w.
    let mut rhs = vec![0.0; n];
    rhs[n - 1] = inst.mu_v / as2;
    let mut e_n = vec![0.0; n];
    e_n[n - 1] = 1.0;
    let mut w = vec![h; n];
    w[n - 1] = 0.5 * h;

    let z0 = tridiag_solve(&diag, &off, &rhs);
    let t1 = tridiag_solve(&diag, &off, &e_n);
    let t2 = tridiag_solve(&diag, &off, &w);
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();

    // [e_n^T; w^T] (z0 + l1 t1 + l2 t2) = [x; y]
    let a11 = t1[n - 1];
    let a12 = t2[n - 1];
    let a21 = dot(&w, &t1);
    let a22 = dot(&w, &t2);
    let b1 = x - z0[n - 1];
    let b2 = y - dot(&w, &z0);
    let det = a11 * a22 - a12 * a21;
    let l1 = (b1 * a22 - b2 * a12) / det;
    let l2 = (a11 * b2 - a21 * b1) / det;

    let z: Vec<f64> = (0..n).map(|i| z0[i] + l1 * t1[i] + l2 * t2[i]).collect();

    let mut cost = 0.0;
    let mut prev = 0.0;
    for (i, &v) in z.iter().enumerate() {
        let slope = (v - prev) / h;
        let dev = slope - inst.mu_v;
        cost += h * dev * dev / (2.0 * as2);
        cost += h / 3.0 * (prev * prev + prev * v + v * v) / (2.0 * lam);
        let _ = i;
        prev = v;
    }
    cost
}

#[test]
fn constrained_minimum_matches_the_discrete_oracle() {
    let cases = [(0.7, 0.2), (-0.5, 0.4), (1.3, -0.9), (0.0, 1.0)];
    for p in [worked(), asymmetric()] {
        let inst = VariationalInstance::from_problem(&p);
        for &(x, y) in &cases {
            let closed = constrained_min_value(&inst, x, y).unwrap();
            let discrete = constrained_min_oracle(&inst, x, y, 2000);
            let rel = (closed - discrete).abs() / (1.0 + closed.abs());
            assert!(
                rel <= 1e-4,
                "({x}, {y}) on {p:?}: closed {closed} vs oracle {discrete} (rel {rel:.2e})"
            );
            // the discrete class is a restriction, so its minimum sits above
            assert!(discrete >= closed - 1e-9 * (1.0 + closed.abs()));
        }
    }
}

#[test]
fn strong_duality_holds_at_test_scale() {
    // |MC certainty equivalent under feedback - dual total| within MC noise;
    // run at a scale that keeps this test in the seconds range. The bias is
    // O(dt), so the window is 3 se plus a small dt allowance.
    for (p, paths, steps) in [
        (worked(), 20_000u64, 500usize),
        (
            ProblemSpec {
                kappa: 0.0,
                phi0: 1.0,
                ..worked()
            },
            20_000,
            500,
        ),
    ] {
        let report = dual::dual_value(&p, &dual::QuadConfig::default()).unwrap();
        let est = mc_certainty_equivalent(
            &p,
            &McConfig::new(paths, steps, 20240817),
            &StrategySource::feedback(),
        )
        .unwrap();
        let gap = (est.value - report.total).abs();
        let window = 3.0 * est.std_err + 10.0 / steps as f64;
        assert!(
            gap <= window,
            "spec {p:?}: CE {} vs dual {} (gap {gap:.4e}, window {window:.4e})",
            est.value,
            report.total
        );
    }
}

#[test]
fn dual_total_is_nondecreasing_in_kappa() {
    let mut prev = f64::NEG_INFINITY;
    for k in 0..=9 {
        let mut p = worked();
        p.kappa = 0.9 * 0.5 * k as f64 / 9.0;
        let total = dual::dual_value(&p, &dual::QuadConfig::default())
            .unwrap()
            .total;
        assert!(
            total >= prev - 1e-12,
            "kappa {}: {} < {}",
            p.kappa,
            total,
            prev
        );
        prev = total;
    }
}

#[test]
fn feedback_beats_naive_strategies_under_common_random_numbers() {
    // paired comparison on shared paths: not trading at all carries the
    // full claim exposure and must cost more than the feedback hedge by
    // far more than the paired noise.
    use achedge_core::simulate::mc_compare;
    let p = worked();
    let cfg = McConfig::new(20_000, 500, 5);
    let zeros = vec![0.0; 500];
    let cmp = mc_compare(
        &p,
        &cfg,
        &StrategySource::fixed(&zeros),
        &StrategySource::feedback(),
    )
    .unwrap();
    assert!(
        cmp.diff > 3.0 * cmp.diff_std_err,
        "no-trading CE {} vs feedback CE {} (diff {} +- {})",
        cmp.ce_a,
        cmp.ce_b,
        cmp.diff,
        cmp.diff_std_err
    );
}

#[test]
fn discretized_maximizer_is_strictly_optimal() {
    // any nonzero grid perturbation (fixing delta_0 = 0) strictly lowers
    // the discrete objective.
    use achedge_core::variational::{objective, solve_discretized, DiscreteTrajectory};
    let inst = VariationalInstance::from_problem(&asymmetric());
    let traj = solve_discretized(&inst, 128).unwrap();
    for k in 0..8u64 {
        let mut values = traj.values.clone();
        for (i, v) in values.iter_mut().enumerate().skip(1) {
            let u = achedge_core::rng::uniform(31, k, i as u64) - 0.5;
            *v += 1e-3 * u;
        }
        let perturbed = DiscreteTrajectory {
            grid: traj.grid.clone(),
            values,
            objective_value: 0.0,
        };
        let obj = objective(&inst, &perturbed).unwrap();
        assert!(
            obj < traj.objective_value,
            "direction {k}: {obj} vs optimum {}",
            traj.objective_value
        );
    }
}

#[test]
fn gamma_hat_matches_the_discretized_route() {
    // 1 + time-average of the J_0 instance trajectory, via the independent
    // quadratic-program oracle.
    use achedge_core::variational::solve_discretized;
    let p = worked();
    let inst = dual::j_instance(&p, 0.0).unwrap();
    let traj = solve_discretized(&inst, 2000).unwrap();
    let h = inst.horizon_v / 2000.0;
    let mut integral = 0.0;
    for w in traj.values.windows(2) {
        integral += 0.5 * h * (w[0] + w[1]);
    }
    let gamma_oracle = 1.0 + integral / inst.horizon_v;
    let gamma = dual::gamma_hat(&p, 0.0).unwrap();
    assert!(
        (gamma - gamma_oracle).abs() <= 1e-4,
        "closed form {gamma} vs oracle {gamma_oracle}"
    );
}
