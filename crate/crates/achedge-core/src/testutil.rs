//! Shared fixtures for in-crate tests: the instances whose solution values
//! were frozen from an independent high-precision evaluation of the closed
//! forms (40-digit arithmetic) and, where marked, cross-checked against the
//! discretized oracle.

use crate::model::ProblemSpec;

/// kappa = 0.25, everything else 1, phi0 = 0; the standing worked instance.
pub fn worked() -> ProblemSpec {
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

/// Pure liquidation: kappa = 0, phi0 = 1, everything else 1.
pub fn liquidation() -> ProblemSpec {
    ProblemSpec {
        kappa: 0.0,
        phi0: 1.0,
        ..worked()
    }
}

/// An asymmetric instance exercising every parameter away from 1:
/// rho = 2.56, kappa bound 0.1953125.
pub fn asymmetric() -> ProblemSpec {
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

pub fn assert_close(got: f64, want: f64, tol: f64, what: &str) {
    let err = (got - want).abs();
    assert!(
        err <= tol * (1.0 + want.abs()),
        "{what}: got {got}, want {want} (err {err:.3e})"
    );
}
