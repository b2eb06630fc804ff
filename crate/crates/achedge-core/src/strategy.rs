//! The optimal feedback trading law and its closed-loop integration.
//!
//! The optimal rate at time t, price s, position phi is
//!
//! ```text
//! [ (2 kappa s + mu/(alpha sigma^2)) tanh(sqrt(rho)(T-t)/2)
//!   - (coth(sqrt(rho)(T-t)) - 2 lambda sqrt(rho) kappa) phi ]
//!   / [ 1/sqrt(rho) - 4 kappa lambda tanh(sqrt(rho)(T-t)/2) ]
//! ```
//!
//! a mean reversion of the position towards a price-driven target that
//! collapses to zero at maturity. Closed-loop integration steps this with
//! the explicit left-endpoint rule and forces exact liquidation on the
//! final interval, where the reversion coefficient blows up and naive
//! stepping would too.

use alloc::vec;
use alloc::vec::Vec;

use serde::Serialize;

use crate::math;
use crate::model::{derived_constants, ProblemSpec};
use crate::simulate::PricePath;
use crate::{Error, Result};

/// Ingredients of the feedback rate at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeedbackCoefficients {
    pub t: f64,
    /// tanh(sqrt(rho) (T - t) / 2)
    pub tanh_half: f64,
    /// coth(sqrt(rho) (T - t))
    pub coth_full: f64,
    /// 1/sqrt(rho) - 4 kappa lambda tanh_half; positive on [0, T).
    pub denom: f64,
}

impl FeedbackCoefficients {
    pub fn at(p: &ProblemSpec, t: f64) -> Result<Self> {
        if !(0.0..p.t_horizon).contains(&t) {
            return Err(Error::OutOfRange {
                name: "t",
                value: t,
                lo: 0.0,
                hi: p.t_horizon,
            });
        }
        let d = derived_constants(p);
        let z = d.sqrt_rho * (p.t_horizon - t);
        let tanh_half = math::tanh(0.5 * z);
        Ok(Self {
            t,
            tanh_half,
            coth_full: math::coth(z),
            denom: 1.0 / d.sqrt_rho - 4.0 * p.kappa * p.lambda_impact * tanh_half,
        })
    }
}

/// Optimal trading rate at `(t, s, phi_pos)`; rejects `t >= T`.
pub fn feedback_rate(p: &ProblemSpec, t: f64, s: f64, phi_pos: f64) -> Result<f64> {
    let c = FeedbackCoefficients::at(p, t)?;
    let d = derived_constants(p);
    let as2 = p.alpha * p.sigma * p.sigma;
    let drive = (2.0 * p.kappa * s + p.mu / as2) * c.tanh_half;
    let revert = (c.coth_full - 2.0 * p.lambda_impact * d.sqrt_rho * p.kappa) * phi_pos;
    Ok((drive - revert) / c.denom)
}

/// The position the feedback law reverts towards at `(t, s)`; tends to 0
/// as t -> T and to the frictionless holding `2 kappa s + mu/(alpha sigma^2)`
/// as lambda -> 0.
pub fn target_position(p: &ProblemSpec, t: f64, s: f64) -> Result<f64> {
    let c = FeedbackCoefficients::at(p, t)?;
    let d = derived_constants(p);
    let as2 = p.alpha * p.sigma * p.sigma;
    Ok((2.0 * p.kappa * s + p.mu / as2) * c.tanh_half
        / (c.coth_full - 2.0 * p.lambda_impact * d.sqrt_rho * p.kappa))
}

/// The optimal rate at t = 0: `feedback_rate(p, 0, s0, phi0)`.
pub fn initial_rate(p: &ProblemSpec) -> f64 {
    feedback_rate(p, 0.0, p.s0, p.phi0).expect("t = 0 is always inside [0, T)")
}

/// Trading-rate/position trajectory on a uniform grid: `phi[i]` is the rate
/// held on `[grid[i], grid[i+1])`, `position` the holdings at the nodes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategyPath {
    pub grid: Vec<f64>,
    pub phi: Vec<f64>,
    pub position: Vec<f64>,
}

impl StrategyPath {
    /// Builds a path from per-interval rates, integrating positions from
    /// `phi0`. No liquidation requirement is imposed: deliberately
    /// non-admissible strategies (which never reach zero) are legitimate
    /// comparison points for the optimality checks.
    pub fn from_rates(phi0: f64, grid: Vec<f64>, phi: Vec<f64>) -> Result<Self> {
        if grid.len() != phi.len() + 1 {
            return Err(Error::GridMismatch {
                expected: phi.len() + 1,
                found: grid.len(),
            });
        }
        let mut position = vec![0.0; grid.len()];
        position[0] = phi0;
        for i in 0..phi.len() {
            position[i + 1] = position[i] + phi[i] * (grid[i + 1] - grid[i]);
        }
        Ok(Self {
            grid,
            phi,
            position,
        })
    }

    pub fn n_steps(&self) -> usize {
        self.phi.len()
    }

    pub fn terminal_position(&self) -> f64 {
        *self.position.last().expect("position is never empty")
    }

    pub fn is_liquidated(&self, tol: f64) -> bool {
        math::abs(self.terminal_position()) <= tol
    }
}

/// Feedback-rate coefficients tabulated on a uniform grid, so closed-loop
/// stepping (and the Monte Carlo driver, which re-runs it per path) pays the
/// hyperbolic evaluations once per grid instead of once per step.
///
/// Node i carries the decomposition `rate = price_coef * s + drift_coef
/// - pos_coef * position` at `t_i = i T / n`, for i = 0..n-1.
#[derive(Debug, Clone)]
pub struct FeedbackTable {
    price_coef: Vec<f64>,
    drift_coef: Vec<f64>,
    pos_coef: Vec<f64>,
}

impl FeedbackTable {
    pub fn new(p: &ProblemSpec, n_steps: usize) -> Self {
        let d = derived_constants(p);
        let as2 = p.alpha * p.sigma * p.sigma;
        let mut price_coef = Vec::with_capacity(n_steps);
        let mut drift_coef = Vec::with_capacity(n_steps);
        let mut pos_coef = Vec::with_capacity(n_steps);
        for i in 0..n_steps {
            let t = p.t_horizon * i as f64 / n_steps as f64;
            let z = d.sqrt_rho * (p.t_horizon - t);
            let th = math::tanh(0.5 * z);
            let denom = 1.0 / d.sqrt_rho - 4.0 * p.kappa * p.lambda_impact * th;
            price_coef.push(2.0 * p.kappa * th / denom);
            drift_coef.push(p.mu / as2 * th / denom);
            pos_coef.push((math::coth(z) - 2.0 * p.lambda_impact * d.sqrt_rho * p.kappa) / denom);
        }
        Self {
            price_coef,
            drift_coef,
            pos_coef,
        }
    }

    pub fn len(&self) -> usize {
        self.price_coef.len()
    }

    pub fn is_empty(&self) -> bool {
        self.price_coef.is_empty()
    }

    #[inline(always)]
    pub fn rate(&self, i: usize, s: f64, position: f64) -> f64 {
        self.price_coef[i] * s + self.drift_coef[i] - self.pos_coef[i] * position
    }
}

pub(crate) fn check_uniform_grid(grid: &[f64], horizon: f64) -> Result<f64> {
    if grid.len() < 2 {
        return Err(Error::Invalid {
            name: "grid",
            value: grid.len() as f64,
            constraint: "at least two nodes",
        });
    }
    let n = grid.len() - 1;
    let h = horizon / n as f64;
    let tol = 1e-9 * horizon.max(1.0);
    if math::abs(grid[0]) > tol || math::abs(grid[n] - horizon) > tol {
        return Err(Error::NonUniformGrid);
    }
    for (i, &g) in grid.iter().enumerate() {
        if math::abs(g - i as f64 * h) > tol {
            return Err(Error::NonUniformGrid);
        }
    }
    Ok(h)
}

/// Integrates the feedback law closed-loop along a price path.
///
/// Explicit first-order stepping with the rate held at the left endpoint of
/// each interval; the final interval instead trades at `-position/dt` so the
/// terminal position is exactly zero at any resolution.
pub fn integrate_closed_loop(p: &ProblemSpec, path: &PricePath) -> Result<StrategyPath> {
    let n = path.grid.len().saturating_sub(1);
    if n < 16 {
        return Err(Error::Invalid {
            name: "n_steps",
            value: n as f64,
            constraint: "n >= 16",
        });
    }
    if path.prices.len() != path.grid.len() {
        return Err(Error::GridMismatch {
            expected: path.grid.len(),
            found: path.prices.len(),
        });
    }
    let h = check_uniform_grid(&path.grid, p.t_horizon)?;
    let table = FeedbackTable::new(p, n);
    let mut phi = vec![0.0; n];
    let mut position = vec![0.0; n + 1];
    position[0] = p.phi0;
    for i in 0..n - 1 {
        phi[i] = table.rate(i, path.prices[i], position[i]);
        position[i + 1] = position[i] + phi[i] * h;
    }
    phi[n - 1] = -position[n - 1] / h;
    position[n] = 0.0;
    Ok(StrategyPath {
        grid: path.grid.clone(),
        phi,
        position,
    })
}
