//! Problem parameterization, validation, and derived constants shared by
//! every other module.

use serde::{Deserialize, Serialize};

use crate::math;
use crate::{Error, Result};

/// Full parameterization of the hedging problem.
///
/// Units: `s0` currency; `sigma` currency/sqrt(time); `mu` currency/time;
/// `lambda_impact` currency*time/shares; `alpha` 1/currency; `kappa`
/// 1/currency; `t_horizon` time; `phi0` shares. Units are documented, not
/// enforced; validation is numeric only.
///
/// Admissibility: `sigma`, `lambda_impact`, `alpha`, `t_horizon` strictly
/// positive and `0 <= kappa < 1/(2 alpha sigma^2 t_horizon)`. The claim
/// coefficient bound is exclusive; `kappa = 0` (no claim, pure liquidation)
/// is admitted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    /// Initial asset price.
    pub s0: f64,
    /// Constant volatility of the arithmetic price dynamics.
    pub sigma: f64,
    /// Constant drift.
    pub mu: f64,
    /// Temporary impact coefficient: trading at rate phi executes at
    /// price S + (lambda_impact/2) phi.
    pub lambda_impact: f64,
    /// Absolute risk aversion of the exponential utility.
    pub alpha: f64,
    /// Claim coefficient: the hedged payoff is kappa * S_T^2.
    pub kappa: f64,
    /// Maturity; the position must be fully liquidated by then.
    pub t_horizon: f64,
    /// Initial position in shares.
    pub phi0: f64,
}

/// Quantities derived from a validated [`ProblemSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedConstants {
    /// Risk-liquidity ratio alpha*sigma^2/lambda_impact (1/time); sets the
    /// mean-reversion speed of the optimal position.
    pub rho: f64,
    pub sqrt_rho: f64,
    /// Exclusive upper bound for `kappa`: 1/(2 alpha sigma^2 t_horizon).
    pub kappa_bound: f64,
}

/// Number of grid points used for the numeric positivity assertions.
const MARGIN_GRID: usize = 10_001;

fn require(ok: bool, name: &'static str, value: f64, constraint: &'static str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Invalid {
            name,
            value,
            constraint,
        })
    }
}

/// Validates a raw spec and returns it unchanged if admissible.
///
/// Besides the parameter constraints this asserts, on a uniform
/// 10,001-point time grid, the two denominator positivity facts the
/// feedback law relies on; a violation means the parameter set is outside
/// the domain the closed forms cover.
pub fn validate_problem(raw: ProblemSpec) -> Result<ProblemSpec> {
    for (name, value) in [
        ("s0", raw.s0),
        ("sigma", raw.sigma),
        ("mu", raw.mu),
        ("lambda_impact", raw.lambda_impact),
        ("alpha", raw.alpha),
        ("kappa", raw.kappa),
        ("t_horizon", raw.t_horizon),
        ("phi0", raw.phi0),
    ] {
        require(value.is_finite(), name, value, "a finite number")?;
    }
    require(raw.sigma > 0.0, "sigma", raw.sigma, "sigma > 0")?;
    require(
        raw.lambda_impact > 0.0,
        "lambda_impact",
        raw.lambda_impact,
        "lambda_impact > 0",
    )?;
    require(raw.alpha > 0.0, "alpha", raw.alpha, "alpha > 0")?;
    require(
        raw.t_horizon > 0.0,
        "t_horizon",
        raw.t_horizon,
        "t_horizon > 0",
    )?;
    require(raw.kappa >= 0.0, "kappa", raw.kappa, "kappa >= 0")?;
    let bound = 1.0 / (2.0 * raw.alpha * raw.sigma * raw.sigma * raw.t_horizon);
    require(
        raw.kappa < bound,
        "kappa",
        raw.kappa,
        "kappa < 1/(2 alpha sigma^2 t_horizon), exclusive",
    )?;

    let (m_rate, m_target) = positivity_margins(&raw);
    require(
        m_rate > 0.0,
        "kappa",
        raw.kappa,
        "positive rate denominator 1/sqrt(rho) - 4 kappa lambda tanh(...) on [0,T)",
    )?;
    require(
        m_target > 0.0,
        "kappa",
        raw.kappa,
        "positive reversion coefficient coth(...) - 2 lambda sqrt(rho) kappa on [0,T)",
    )?;
    Ok(raw)
}

/// Derived constants; pure, so repeated calls are bit-identical.
pub fn derived_constants(p: &ProblemSpec) -> DerivedConstants {
    let rho = p.alpha * p.sigma * p.sigma / p.lambda_impact;
    DerivedConstants {
        rho,
        sqrt_rho: math::sqrt(rho),
        kappa_bound: 1.0 / (2.0 * p.alpha * p.sigma * p.sigma * p.t_horizon),
    }
}

/// Minima over a uniform 10,001-point grid on [0, T] of the two feedback
/// denominators: `1/sqrt(rho) - 4 kappa lambda tanh(sqrt(rho)(T-t)/2)` and
/// `coth(sqrt(rho)(T-t)) - 2 lambda sqrt(rho) kappa`.
///
/// Both are provably positive on [0, T) for any admissible spec; the grid
/// scan is a cheap runtime assertion of that fact and feeds the sweep
/// reports. (At t = T the second expression is +inf in IEEE arithmetic.)
pub fn positivity_margins(p: &ProblemSpec) -> (f64, f64) {
    let d = derived_constants(p);
    let mut min_rate = f64::INFINITY;
    let mut min_target = f64::INFINITY;
    for j in 0..MARGIN_GRID {
        // iterate the time-to-maturity directly: computing it as T - t can
        // round one ulp below zero at the final node and flip coth's sign
        let tau = p.t_horizon * j as f64 / (MARGIN_GRID - 1) as f64;
        let z = d.sqrt_rho * tau;
        let rate = 1.0 / d.sqrt_rho - 4.0 * p.kappa * p.lambda_impact * math::tanh(0.5 * z);
        let target = math::coth(z) - 2.0 * p.lambda_impact * d.sqrt_rho * p.kappa;
        min_rate = min_rate.min(rate);
        min_target = min_target.min(target);
    }
    (min_rate, min_target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::worked;

    #[test]
    fn accepts_the_worked_instance() {
        let p = validate_problem(worked()).unwrap();
        assert_eq!(p, worked());
    }

    #[test]
    fn kappa_bound_is_exclusive() {
        let mut p = worked();
        p.kappa = 0.5; // alpha = sigma = T = 1 puts the bound exactly there
        match validate_problem(p) {
            Err(Error::Invalid { name: "kappa", .. }) => {}
            other => panic!("expected kappa rejection, got {other:?}"),
        }
        p.kappa = 0.5 - 1e-12;
        assert!(validate_problem(p).is_ok());
        p.kappa = 0.0;
        assert!(validate_problem(p).is_ok());
    }

    #[test]
    fn rejects_nonpositive_sigma() {
        let mut p = worked();
        p.sigma = 0.0;
        match validate_problem(p) {
            Err(Error::Invalid { name: "sigma", .. }) => {}
            other => panic!("expected sigma rejection, got {other:?}"),
        }
    }

    #[test]
    fn rejects_non_finite_fields() {
        let mut p = worked();
        p.mu = f64::NAN;
        assert!(validate_problem(p).is_err());
    }

    #[test]
    fn derived_constants_examples() {
        let d = derived_constants(&worked());
        assert_eq!(d.rho, 1.0);
        assert_eq!(d.kappa_bound, 0.5);
        let mut p = worked();
        p.alpha = 2.0;
        p.sigma = 3.0;
        p.lambda_impact = 6.0;
        assert_eq!(derived_constants(&p).rho, 3.0);
        // pure function: repeated calls are bit-identical
        assert_eq!(derived_constants(&p), derived_constants(&p));
    }

    #[test]
    fn margins_positive_across_kappa_range() {
        for k in 0..40 {
            let mut p = worked();
            p.kappa = 0.999 * 0.5 * k as f64 / 39.0;
            let (a, b) = positivity_margins(&p);
            assert!(a > 0.0 && b > 0.0, "kappa = {}: {a} {b}", p.kappa);
        }
    }

    #[test]
    fn spec_json_round_trip_rejects_unknown_keys() {
        let json = r#"{"s0":1.0,"sigma":1.0,"mu":0.0,"lambda_impact":1.0,
                       "alpha":1.0,"kappa":0.25,"t_horizon":1.0,"phi0":0.0}"#;
        let p: ProblemSpec = serde_json::from_str(json).unwrap();
        assert_eq!(p, worked());
        let bad = json.replace("\"phi0\":0.0", "\"phi0\":0.0,\"extra\":1");
        assert!(serde_json::from_str::<ProblemSpec>(&bad).is_err());
    }
}
