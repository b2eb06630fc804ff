//! The deterministic variational backbone.
//!
//! A trajectory delta on [0, T] with delta(0) = 0 is scored by
//!
//! ```text
//! kappa (S0 + delta_T)^2 - 1/(2 alpha sigma^2) * int (delta' - mu)^2 dt
//!   + 1/(2 lambda) * [ (Phi0 lambda - int delta dt)^2 / T - int delta^2 dt ]
//! ```
//!
//! and the maximizer is a hyperbolic-sine profile
//! `c1 sinh(sqrt(rho) t) + c2 sinh(sqrt(rho)(T-t)) + c3`. Both the primal
//! feedback strategy at t = 0 and the dual value decompose into instances of
//! this problem, which is why it gets two independent solvers here:
//!
//! * [`solve_closed_form`] — the exact optimum via the reduced 2-D quadratic
//!   form in (delta_T, int delta);
//! * [`solve_discretized`] — a piecewise-linear discretization solved as a
//!   strictly concave quadratic program, used as the oracle the closed form
//!   is verified against.

use alloc::vec;
use alloc::vec::Vec;

use serde::Serialize;

use crate::math;
use crate::model::ProblemSpec;
use crate::{Error, Result};

/// Horizons with sqrt(rho)*T below this are rejected rather than evaluated;
/// the shape denominator scales like (sqrt(rho) T)^3 / 12 there and the
/// closed forms would only amplify round-off.
pub const MIN_SQRT_RHO_T: f64 = 1e-6;

/// A free-standing instance of the variational problem. Fields mirror
/// [`ProblemSpec`] semantics but are decoupled from it: the dual value
/// evaluates a family of instances with remapped parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VariationalInstance {
    pub kappa_v: f64,
    pub s0_v: f64,
    pub mu_v: f64,
    pub phi0_v: f64,
    pub sigma_v: f64,
    pub alpha_v: f64,
    pub lambda_v: f64,
    pub horizon_v: f64,
}

impl VariationalInstance {
    /// Instance carrying the problem's own parameters.
    pub fn from_problem(p: &ProblemSpec) -> Self {
        Self {
            kappa_v: p.kappa,
            s0_v: p.s0,
            mu_v: p.mu,
            phi0_v: p.phi0,
            sigma_v: p.sigma,
            alpha_v: p.alpha,
            lambda_v: p.lambda_impact,
            horizon_v: p.t_horizon,
        }
    }

    pub fn rho(&self) -> f64 {
        self.alpha_v * self.sigma_v * self.sigma_v / self.lambda_v
    }

    pub fn sqrt_rho(&self) -> f64 {
        math::sqrt(self.rho())
    }

    /// Checks the instance invariants: positive sigma/alpha/lambda/horizon
    /// and `0 <= kappa_v < 1/(2 alpha_v sigma_v^2 horizon_v)`.
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("sigma_v", self.sigma_v),
            ("alpha_v", self.alpha_v),
            ("lambda_v", self.lambda_v),
            ("horizon_v", self.horizon_v),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::Invalid {
                    name,
                    value,
                    constraint: "finite and > 0",
                });
            }
        }
        let bound = 1.0 / (2.0 * self.alpha_v * self.sigma_v * self.sigma_v * self.horizon_v);
        if !(self.kappa_v >= 0.0 && self.kappa_v < bound) {
            return Err(Error::Invalid {
                name: "kappa_v",
                value: self.kappa_v,
                constraint: "0 <= kappa_v < 1/(2 alpha_v sigma_v^2 horizon_v)",
            });
        }
        Ok(())
    }
}

/// Coefficients of the reduced two-dimensional quadratic form
/// `A x^2 + B y^2 + 2 C x y + eta x + theta y` in x = delta_T and
/// y = int delta. For any admissible instance `B < 0` and `A B - C^2 > 0`,
/// so the form has a unique maximizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadCoefficients {
    pub a_coef: f64,
    pub b_coef: f64,
    pub c_coef: f64,
    pub eta: f64,
    pub theta: f64,
}

/// Closed-form optimum of an instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VariationalSolution {
    /// Shape constants of the optimal trajectory
    /// `c1 sinh(sqrt(rho) t) + c2 sinh(sqrt(rho)(T-t)) + c3`. For very large
    /// sqrt(rho)*T these underflow; [`evaluate_delta`] therefore works with
    /// exponentially scaled ratios instead of c1/c2 directly.
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// Terminal value of the optimal trajectory.
    pub x_bar: f64,
    /// Time integral of the optimal trajectory.
    pub y_bar: f64,
    /// Optimal objective value.
    pub value: f64,
    /// y_bar / horizon.
    pub mean: f64,
}

/// A trajectory on a grid together with its discrete objective.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteTrajectory {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub objective_value: f64,
}

fn shape_denom_checked(inst: &VariationalInstance) -> Result<f64> {
    let z = inst.sqrt_rho() * inst.horizon_v;
    if z < MIN_SQRT_RHO_T {
        return Err(Error::DegenerateHorizon { sqrt_rho_t: z });
    }
    Ok(z)
}

/// Coefficients of the reduced quadratic form.
pub fn coefficients(inst: &VariationalInstance) -> Result<QuadCoefficients> {
    inst.validate()?;
    let z = shape_denom_checked(inst)?;
    let lam = inst.lambda_v;
    let sq = inst.sqrt_rho();
    let d = math::shape_denom(z);
    let th = math::tanh(0.5 * z);
    let coth = math::coth(z);

    let a_coef = inst.kappa_v - (coth + th * th / d) / (2.0 * lam * sq);
    let b_coef = -th / (lam * inst.horizon_v * d);
    let c_coef = th / (2.0 * lam * d);
    let eta =
        2.0 * inst.kappa_v * inst.s0_v + inst.mu_v / (inst.alpha_v * inst.sigma_v * inst.sigma_v);
    let theta = -inst.phi0_v / inst.horizon_v;

    debug_assert!(b_coef < 0.0);
    debug_assert!(a_coef * b_coef - c_coef * c_coef > 0.0);
    Ok(QuadCoefficients {
        a_coef,
        b_coef,
        c_coef,
        eta,
        theta,
    })
}

/// Unique maximizer (x_bar, y_bar) of the reduced quadratic form.
pub fn optimal_endpoints(q: &QuadCoefficients) -> (f64, f64) {
    let det = q.a_coef * q.b_coef - q.c_coef * q.c_coef;
    (
        (q.c_coef * q.theta - q.b_coef * q.eta) / (2.0 * det),
        (q.c_coef * q.eta - q.a_coef * q.theta) / (2.0 * det),
    )
}

/// Minimum of `int H(delta', delta) dt` with
/// `H(u, v) = (u - mu)^2/(2 alpha sigma^2) + v^2/(2 lambda)` over
/// trajectories pinned to delta(0) = 0, delta(T) = x, int delta = y.
pub fn constrained_min_value(inst: &VariationalInstance, x: f64, y: f64) -> Result<f64> {
    inst.validate()?;
    let z = shape_denom_checked(inst)?;
    let as2 = inst.alpha_v * inst.sigma_v * inst.sigma_v;
    let sq = inst.sqrt_rho();
    let d = math::shape_denom(z);
    let th = math::tanh(0.5 * z);
    let pinned = x * th - sq * y;
    Ok(
        inst.mu_v * inst.mu_v * inst.horizon_v / (2.0 * as2) - inst.mu_v * x / as2
            + (x * x * math::coth(z) + pinned * pinned / d) / (2.0 * inst.lambda_v * sq),
    )
}

/// Closed-form solution of the instance.
pub fn solve_closed_form(inst: &VariationalInstance) -> Result<VariationalSolution> {
    let q = coefficients(inst)?;
    let (x_bar, y_bar) = optimal_endpoints(&q);
    let z = inst.sqrt_rho() * inst.horizon_v;
    let sq = inst.sqrt_rho();
    let d = math::shape_denom(z);
    let c3 = (sq * y_bar - x_bar * math::tanh(0.5 * z)) / d;
    let sinh_z = math::sinh(z);
    let c1 = (x_bar - c3) / sinh_z;
    let c2 = -c3 / sinh_z;
    let lam = inst.lambda_v;
    let value = inst.kappa_v * (inst.s0_v + x_bar) * (inst.s0_v + x_bar)
        + (inst.phi0_v * lam - y_bar) * (inst.phi0_v * lam - y_bar) / (2.0 * lam * inst.horizon_v)
        - constrained_min_value(inst, x_bar, y_bar)?;
    Ok(VariationalSolution {
        c1,
        c2,
        c3,
        x_bar,
        y_bar,
        value,
        mean: y_bar / inst.horizon_v,
    })
}

/// Pointwise value of the optimal trajectory at `t in [0, horizon]`.
///
/// Evaluates `(x_bar - c3) sinh(sqrt(rho) t)/sinh(sqrt(rho) T) -
/// c3 sinh(sqrt(rho)(T-t))/sinh(sqrt(rho) T) + c3` through scaled ratios,
/// which stays finite for arbitrarily large sqrt(rho)*T.
pub fn evaluate_delta(
    sol: &VariationalSolution,
    inst: &VariationalInstance,
    t: f64,
) -> Result<f64> {
    let horizon = inst.horizon_v;
    if !(0.0..=horizon).contains(&t) {
        return Err(Error::OutOfRange {
            name: "t",
            value: t,
            lo: 0.0,
            hi: horizon,
        });
    }
    let sq = inst.sqrt_rho();
    let z = sq * horizon;
    Ok((sol.x_bar - sol.c3) * math::sinh_ratio(sq * t, z)
        - sol.c3 * math::sinh_ratio(sq * (horizon - t), z)
        + sol.c3)
}

/// Time derivative of the optimal trajectory at `t in [0, horizon]`.
pub fn delta_derivative(
    sol: &VariationalSolution,
    inst: &VariationalInstance,
    t: f64,
) -> Result<f64> {
    let horizon = inst.horizon_v;
    if !(0.0..=horizon).contains(&t) {
        return Err(Error::OutOfRange {
            name: "t",
            value: t,
            lo: 0.0,
            hi: horizon,
        });
    }
    let sq = inst.sqrt_rho();
    let z = sq * horizon;
    Ok(sq
        * ((sol.x_bar - sol.c3) * math::cosh_sinh_ratio(sq * t, z)
            + sol.c3 * math::cosh_sinh_ratio(sq * (horizon - t), z)))
}

/// Discrete objective of a piecewise-linear trajectory.
///
/// Per interval, int delta'^2 is exact from the slope, int delta^2 is the
/// exact (h/3)(v0^2 + v0 v1 + v1^2), and int delta is the trapezoid rule
/// (exact for piecewise-linear); the only approximation error relative to
/// the continuous problem is the restriction to the piecewise-linear class.
pub fn objective(inst: &VariationalInstance, traj: &DiscreteTrajectory) -> Result<f64> {
    objective_of(inst, &traj.grid, &traj.values)
}

pub(crate) fn objective_of(
    inst: &VariationalInstance,
    grid: &[f64],
    values: &[f64],
) -> Result<f64> {
    if grid.len() != values.len() {
        return Err(Error::GridMismatch {
            expected: grid.len(),
            found: values.len(),
        });
    }
    if grid.len() < 2 {
        return Err(Error::Invalid {
            name: "grid",
            value: grid.len() as f64,
            constraint: "at least two nodes",
        });
    }
    if values[0] != 0.0 {
        return Err(Error::Invalid {
            name: "values[0]",
            value: values[0],
            constraint: "the trajectory must start at 0",
        });
    }
    let horizon = inst.horizon_v;
    let last = *grid.last().unwrap();
    if grid[0] != 0.0 || math::abs(last - horizon) > 1e-9 * horizon {
        return Err(Error::Invalid {
            name: "grid",
            value: last,
            constraint: "must span [0, horizon]",
        });
    }

    let mut int_rate_sq = 0.0; // int (delta' - mu)^2
    let mut int_sq = 0.0; // int delta^2
    let mut int_traj = 0.0; // int delta
    for i in 0..grid.len() - 1 {
        let h = grid[i + 1] - grid[i];
        if !(h > 0.0) {
            return Err(Error::NonUniformGrid);
        }
        let (v0, v1) = (values[i], values[i + 1]);
        let slope = (v1 - v0) / h;
        let dev = slope - inst.mu_v;
        int_rate_sq += h * dev * dev;
        int_sq += h / 3.0 * (v0 * v0 + v0 * v1 + v1 * v1);
        int_traj += 0.5 * h * (v0 + v1);
    }
    let as2 = inst.alpha_v * inst.sigma_v * inst.sigma_v;
    let lam = inst.lambda_v;
    let tail = inst.s0_v + values[values.len() - 1];
    let pool = inst.phi0_v * lam - int_traj;
    Ok(inst.kappa_v * tail * tail - int_rate_sq / (2.0 * as2)
        + (pool * pool / horizon - int_sq) / (2.0 * lam))
}

/// Symmetric LDL^T factorization of a positive-definite tridiagonal matrix.
struct TridiagLdl {
    d: Vec<f64>,
    l: Vec<f64>,
}

impl TridiagLdl {
    fn factor(diag: &[f64], off: &[f64]) -> Option<Self> {
        let n = diag.len();
        let mut d = vec![0.0; n];
        let mut l = vec![0.0; n.saturating_sub(1)];
        d[0] = diag[0];
        if !(d[0] > 0.0) {
            return None;
        }
        for i in 0..n - 1 {
            l[i] = off[i] / d[i];
            d[i + 1] = diag[i + 1] - l[i] * l[i] * d[i];
            if !(d[i + 1] > 0.0) {
                return None;
            }
        }
        Some(Self { d, l })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.d.len();
        let mut x = b.to_vec();
        for i in 1..n {
            x[i] -= self.l[i - 1] * x[i - 1];
        }
        for (xi, di) in x.iter_mut().zip(&self.d) {
            *xi /= di;
        }
        for i in (0..n - 1).rev() {
            x[i] -= self.l[i] * x[i + 1];
        }
        x
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// Maximizes the discrete objective over grid trajectories with delta_0 = 0.
///
/// The negated Hessian of the discrete quadratic is a positive-definite
/// tridiagonal matrix minus two rank-one terms (claim curvature at the last
/// node and the squared-integral pool term). It is factored symmetrically:
/// LDL^T on the tridiagonal part plus a 2x2 capacitance for the downdates;
/// positive pivots together with a positive-definite capacitance certify
/// strict concavity, otherwise the claim coefficient is out of range and
/// [`Error::NonConcave`] is returned. The stationarity system is then solved
/// exactly (up to round-off) through the same factorization.
pub fn solve_discretized(inst: &VariationalInstance, n: usize) -> Result<DiscreteTrajectory> {
    if n < 8 {
        return Err(Error::Invalid {
            name: "n",
            value: n as f64,
            constraint: "n >= 8",
        });
    }
    for (name, value) in [
        ("sigma_v", inst.sigma_v),
        ("alpha_v", inst.alpha_v),
        ("lambda_v", inst.lambda_v),
        ("horizon_v", inst.horizon_v),
    ] {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::Invalid {
                name,
                value,
                constraint: "finite and > 0",
            });
        }
    }
    if !(inst.kappa_v >= 0.0 && inst.kappa_v.is_finite()) {
        return Err(Error::Invalid {
            name: "kappa_v",
            value: inst.kappa_v,
            constraint: "finite and >= 0",
        });
    }

    let horizon = inst.horizon_v;
    let h = horizon / n as f64;
    let as2 = inst.alpha_v * inst.sigma_v * inst.sigma_v;
    let lam = inst.lambda_v;

    // Tridiagonal part: stiffness/(alpha sigma^2) + mass/lambda, nodes 1..=n.
    let mut diag = vec![2.0 / (h * as2) + 2.0 * h / (3.0 * lam); n];
    diag[n - 1] = 1.0 / (h * as2) + h / (3.0 * lam);
    let mut off = vec![0.0; n - 1];
    for o in off.iter_mut() {
        *o = -1.0 / (h * as2) + h / (6.0 * lam);
    }

    // Rank-one downdates: sqrt(2 kappa) e_n and w/sqrt(lambda T), where w is
    // the trapezoid weight vector.
    let mut u1 = vec![0.0; n];
    u1[n - 1] = math::sqrt(2.0 * inst.kappa_v);
    let wt = 1.0 / math::sqrt(lam * horizon);
    let mut u2 = vec![h * wt; n];
    u2[n - 1] = 0.5 * h * wt;

    let mut b = vec![0.0; n];
    b[n - 1] = 2.0 * inst.kappa_v * inst.s0_v + inst.mu_v / as2;
    let pool = inst.phi0_v / horizon;
    for (bi, u2i) in b.iter_mut().zip(u2.iter()) {
        *bi -= pool * u2i / wt;
    }

    let ldl = TridiagLdl::factor(&diag, &off).ok_or(Error::NonConcave)?;
    let w1 = ldl.solve(&u1);
    let w2 = ldl.solve(&u2);
    // Capacitance I - U^T T^{-1} U; positive definite iff the downdated
    // matrix is (Schur complement of the extended system).
    let c11 = 1.0 - dot(&u1, &w1);
    let c22 = 1.0 - dot(&u2, &w2);
    let c12 = -0.5 * (dot(&u1, &w2) + dot(&u2, &w1));
    let cap_det = c11 * c22 - c12 * c12;
    if !(c11 > 0.0 && cap_det > 0.0) {
        return Err(Error::NonConcave);
    }

    let z0 = ldl.solve(&b);
    let r1 = dot(&u1, &z0);
    let r2 = dot(&u2, &z0);
    let s1 = (c22 * r1 - c12 * r2) / cap_det;
    let s2 = (c11 * r2 - c12 * r1) / cap_det;

    let mut values = Vec::with_capacity(n + 1);
    values.push(0.0);
    for i in 0..n {
        values.push(z0[i] + s1 * w1[i] + s2 * w2[i]);
    }
    let grid: Vec<f64> = (0..=n).map(|i| horizon * i as f64 / n as f64).collect();
    let objective_value = objective_of(inst, &grid, &values)?;
    Ok(DiscreteTrajectory {
        grid,
        values,
        objective_value,
    })
}

/// Closed-form time average of the optimal trajectory,
/// `y_bar / horizon`, computed directly (not through the quadratic form):
///
/// ```text
/// [ (2 kappa S0 + mu/(alpha sigma^2)) tanh(sqrt(rho) T/2)
///   - (coth(sqrt(rho) T) - 2 lambda sqrt(rho) kappa) Phi0 ]
///   / [ 1/(sqrt(rho) lambda) - 4 kappa tanh(sqrt(rho) T/2) ]  +  Phi0 lambda / T
/// ```
pub fn mean_of_optimal_delta(inst: &VariationalInstance) -> f64 {
    let sq = inst.sqrt_rho();
    let z = sq * inst.horizon_v;
    let as2 = inst.alpha_v * inst.sigma_v * inst.sigma_v;
    let th = math::tanh(0.5 * z);
    let num = (2.0 * inst.kappa_v * inst.s0_v + inst.mu_v / as2) * th
        - (math::coth(z) - 2.0 * inst.lambda_v * sq * inst.kappa_v) * inst.phi0_v;
    let den = 1.0 / (sq * inst.lambda_v) - 4.0 * inst.kappa_v * th;
    num / den + inst.phi0_v * inst.lambda_v / inst.horizon_v
}

#[cfg(test)]
mod tests {
    // reference constants carry their full 40-digit provenance
    #![allow(clippy::excessive_precision)]

    use super::*;
    use crate::testutil::{assert_close, asymmetric, liquidation, worked};

    fn w_inst() -> VariationalInstance {
        VariationalInstance::from_problem(&worked())
    }

    fn r_inst() -> VariationalInstance {
        VariationalInstance::from_problem(&asymmetric())
    }

    fn l_inst() -> VariationalInstance {
        VariationalInstance::from_problem(&liquidation())
    }

    fn zero_inst() -> VariationalInstance {
        let mut inst = w_inst();
        inst.kappa_v = 0.0;
        inst
    }

    // Reference values in this module were frozen from an independent
    // 40-digit evaluation of the printed closed forms and cross-checked
    // against the discretized oracle below.

    #[test]
    fn coefficients_match_reference() {
        let q = coefficients(&w_inst()).unwrap();
        assert_close(q.a_coef, -1.815811742586585653306, 1e-14, "A");
        assert_close(q.b_coef, -6.099293556607689764453, 1e-14, "B");
        assert_close(q.c_coef, 3.049646778303844882226, 1e-14, "C");
        assert_eq!(q.eta, 0.5);
        assert_eq!(q.theta, -0.0);

        let q0 = coefficients(&zero_inst()).unwrap();
        assert_close(q0.a_coef, -2.065811742586585653306, 1e-14, "A at kappa=0");
        assert_close(q0.b_coef, q.b_coef, 0.0, "B is kappa-free");
        assert_eq!(q0.eta, 0.0);

        let qr = coefficients(&r_inst()).unwrap();
        assert_close(qr.a_coef, -0.9184234414736014171749, 1e-14, "A (asym)");
        assert_close(qr.b_coef, -0.6793644614249208570325, 1e-14, "B (asym)");
        assert_close(qr.c_coef, 0.6793644614249208570325, 1e-14, "C (asym)");
        assert_close(qr.eta, 0.634375, 1e-15, "eta (asym)");
        assert_close(qr.theta, -0.75, 1e-15, "theta (asym)");
    }

    #[test]
    fn endpoints_match_reference_and_scale_linearly() {
        let q = coefficients(&w_inst()).unwrap();
        let (x, y) = optimal_endpoints(&q);
        assert_close(x, 0.8591409142295226176801, 1e-13, "x_bar");
        assert_close(y, 0.4295704571147613088401, 1e-13, "y_bar");

        let (xr, yr) = optimal_endpoints(&coefficients(&r_inst()).unwrap());
        assert_close(xr, -0.2418336261128002956407, 1e-13, "x_bar (asym)");
        assert_close(yr, -0.7938201094997336465874, 1e-13, "y_bar (asym)");

        // eta = theta = 0 is exactly stationary at the origin.
        let mut q0 = q;
        q0.eta = 0.0;
        q0.theta = 0.0;
        assert_eq!(optimal_endpoints(&q0), (0.0, 0.0));

        // scaling the linear part scales the maximizer.
        let mut q3 = coefficients(&r_inst()).unwrap();
        q3.eta *= 3.0;
        q3.theta *= 3.0;
        let (x3, y3) = optimal_endpoints(&q3);
        assert_close(x3, 3.0 * xr, 1e-14, "3x");
        assert_close(y3, 3.0 * yr, 1e-14, "3y");
    }

    #[test]
    fn closed_form_solution_matches_reference() {
        let sol = solve_closed_form(&w_inst()).unwrap();
        assert_close(sol.c1, 0.3655292893150024396256, 1e-13, "c1");
        assert_close(sol.c2, -0.3655292893150024396256, 1e-13, "c2");
        assert_close(sol.c3, 0.4295704571147613088401, 1e-13, "c3");
        assert_close(sol.value, 0.46478522855738065442, 1e-13, "value");
        assert_close(sol.mean, 0.4295704571147613088401, 1e-13, "mean");

        let sol_l = solve_closed_form(&l_inst()).unwrap();
        assert_close(sol_l.x_bar, -0.4621171572600097585023, 1e-13, "x_bar (liq)");
        assert_close(sol_l.c1, 0.724061660966310466408, 1e-13, "c1 (liq)");
        assert_close(sol_l.c2, 1.117285527449274171483, 1e-13, "c2 (liq)");
        assert_close(sol_l.c3, -1.313035285499331303636, 1e-13, "c3 (liq)");
        assert_close(sol_l.value, 0.6565176427496656518181, 1e-13, "value (liq)");

        let sol_r = solve_closed_form(&r_inst()).unwrap();
        assert_close(sol_r.c1, 0.04328608933301450362998, 1e-13, "c1 (asym)");
        assert_close(sol_r.c2, 0.06303424521793269414451, 1e-13, "c2 (asym)");
        assert_close(sol_r.c3, -0.7719100547498668232937, 1e-13, "c3 (asym)");
        assert_close(sol_r.value, 0.8319134377797462736967, 1e-13, "value (asym)");
    }

    #[test]
    fn zero_claim_zero_drift_zero_position_is_trivial() {
        let sol = solve_closed_form(&zero_inst()).unwrap();
        assert_eq!(sol.value, 0.0);
        assert_eq!(sol.mean, 0.0);
        assert_eq!(sol.x_bar, 0.0);
        let inst = zero_inst();
        assert_eq!(evaluate_delta(&sol, &inst, 0.5).unwrap(), 0.0);
        assert_eq!(mean_of_optimal_delta(&inst), 0.0);
    }

    #[test]
    fn delta_boundary_identities_and_pointwise_values() {
        for inst in [w_inst(), l_inst(), r_inst()] {
            let sol = solve_closed_form(&inst).unwrap();
            let at0 = evaluate_delta(&sol, &inst, 0.0).unwrap();
            assert!(
                math::abs(at0) <= 1e-14 * (1.0 + math::abs(sol.c3)),
                "delta(0) = {at0}"
            );
            let at_t = evaluate_delta(&sol, &inst, inst.horizon_v).unwrap();
            assert_close(at_t, sol.x_bar, 1e-13, "delta(T) is x_bar");
        }
        let (w, r) = (w_inst(), r_inst());
        let sol_w = solve_closed_form(&w).unwrap();
        assert_close(
            evaluate_delta(&sol_w, &w, 0.3).unwrap(),
            0.2635969821411429544299,
            1e-13,
            "delta_W(0.3)",
        );
        let sol_r = solve_closed_form(&r).unwrap();
        assert_close(
            evaluate_delta(&sol_r, &r, 0.6).unwrap(),
            -0.4309764509961722474834,
            1e-13,
            "delta_R(0.6)",
        );
        assert!(matches!(
            evaluate_delta(&sol_w, &w, 1.0 + 1e-9),
            Err(Error::OutOfRange { .. })
        ));
        assert!(matches!(
            evaluate_delta(&sol_w, &w, -0.1),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn scaled_evaluation_agrees_with_printed_shape_constants() {
        // at moderate sqrt(rho)T the direct c1/c2 form is usable; the scaled
        // path must agree with it.
        for inst in [w_inst(), l_inst(), r_inst()] {
            let sol = solve_closed_form(&inst).unwrap();
            let sq = inst.sqrt_rho();
            for j in 0..=10 {
                let t = inst.horizon_v * j as f64 / 10.0;
                let direct = sol.c1 * math::sinh(sq * t)
                    + sol.c2 * math::sinh(sq * (inst.horizon_v - t))
                    + sol.c3;
                let scaled = evaluate_delta(&sol, &inst, t).unwrap();
                assert_close(scaled, direct, 1e-12, "scaled vs direct");
            }
        }
    }

    #[test]
    fn huge_mean_reversion_does_not_overflow() {
        // sqrt(rho) * T ~ 2000: raw sinh overflows, the solver must not.
        let inst = VariationalInstance {
            kappa_v: 1e-5,
            s0_v: 1.0,
            mu_v: 0.1,
            phi0_v: 1.0,
            sigma_v: 20.0,
            alpha_v: 10.0,
            lambda_v: 1.0,
            horizon_v: 1.0,
        };
        let sol = solve_closed_form(&inst).unwrap();
        assert!(sol.value.is_finite());
        for j in 0..=20 {
            let t = inst.horizon_v * j as f64 / 20.0;
            assert!(evaluate_delta(&sol, &inst, t).unwrap().is_finite());
        }
    }

    #[test]
    fn mean_of_optimal_delta_matches_endpoints_route() {
        for inst in [w_inst(), l_inst(), r_inst()] {
            let sol = solve_closed_form(&inst).unwrap();
            assert_close(
                mean_of_optimal_delta(&inst),
                sol.y_bar / inst.horizon_v,
                1e-12,
                "two closed-form routes to the mean",
            );
        }
        assert_close(
            mean_of_optimal_delta(&w_inst()),
            0.4295704571147613088401,
            1e-13,
            "mean (worked)",
        );
        assert_close(
            mean_of_optimal_delta(&r_inst()),
            -0.3969100547498668232937,
            1e-13,
            "mean (asym)",
        );
        // kappa = 0, mu = 0: mean = lambda phi0 (1/T - sqrt(rho) coth(sqrt(rho) T)).
        let l = l_inst();
        let want = l.lambda_v
            * l.phi0_v
            * (1.0 / l.horizon_v - l.sqrt_rho() * math::coth(l.sqrt_rho() * l.horizon_v));
        assert_close(
            mean_of_optimal_delta(&l),
            want,
            1e-13,
            "pure-liquidation mean",
        );
    }

    #[test]
    fn constrained_min_reference_values() {
        let w = w_inst();
        assert_eq!(constrained_min_value(&w, 0.0, 0.0).unwrap(), 0.0);
        assert_close(
            constrained_min_value(&w, 0.7, 0.2).unwrap(),
            0.4223183982066579936745,
            1e-13,
            "cmin_W(0.7, 0.2)",
        );
        let r = r_inst();
        // x = 0, y = 0 with drift: mu^2 T / (2 alpha sigma^2).
        let want = r.mu_v * r.mu_v * r.horizon_v / (2.0 * r.alpha_v * r.sigma_v * r.sigma_v);
        assert_close(
            constrained_min_value(&r, 0.0, 0.0).unwrap(),
            want,
            1e-14,
            "drift-only",
        );
        assert_close(
            constrained_min_value(&r, 0.7, 0.2).unwrap(),
            0.2622300155800836887279,
            1e-13,
            "cmin_R(0.7, 0.2)",
        );
    }

    fn flat_trajectory(inst: &VariationalInstance, n: usize) -> DiscreteTrajectory {
        let grid: Vec<f64> = (0..=n)
            .map(|i| inst.horizon_v * i as f64 / n as f64)
            .collect();
        DiscreteTrajectory {
            grid,
            values: vec![0.0; n + 1],
            objective_value: 0.0,
        }
    }

    #[test]
    fn objective_of_flat_trajectory() {
        // delta = 0: kappa S0^2 + lambda phi0^2/(2T) - mu^2 T/(2 alpha sigma^2).
        let w = w_inst();
        assert_close(
            objective(&w, &flat_trajectory(&w, 64)).unwrap(),
            0.25,
            1e-14,
            "flat objective (worked)",
        );
        let l = l_inst();
        assert_close(
            objective(&l, &flat_trajectory(&l, 64)).unwrap(),
            0.5,
            1e-14,
            "flat objective (liq)",
        );
        let r = r_inst();
        let want = r.kappa_v * r.s0_v * r.s0_v
            + r.lambda_v * r.phi0_v * r.phi0_v / (2.0 * r.horizon_v)
            - r.mu_v * r.mu_v * r.horizon_v / (2.0 * r.alpha_v * r.sigma_v * r.sigma_v);
        assert_close(
            objective(&r, &flat_trajectory(&r, 64)).unwrap(),
            want,
            1e-14,
            "flat objective (asym)",
        );
    }

    #[test]
    fn objective_rejects_malformed_trajectories() {
        let w = w_inst();
        let mut traj = flat_trajectory(&w, 16);
        traj.values.pop();
        assert!(matches!(
            objective(&w, &traj),
            Err(Error::GridMismatch { .. })
        ));
        let mut traj = flat_trajectory(&w, 16);
        traj.values[0] = 0.5;
        assert!(matches!(objective(&w, &traj), Err(Error::Invalid { .. })));
    }

    #[test]
    fn sampled_closed_form_attains_its_value() {
        let w = w_inst();
        let sol = solve_closed_form(&w).unwrap();
        let n = 2000;
        let grid: Vec<f64> = (0..=n).map(|i| w.horizon_v * i as f64 / n as f64).collect();
        let mut values: Vec<f64> = grid
            .iter()
            .map(|&t| evaluate_delta(&sol, &w, t).unwrap())
            .collect();
        values[0] = 0.0;
        let obj = objective_of(&w, &grid, &values).unwrap();
        assert_close(
            obj,
            sol.value,
            1e-6,
            "discrete objective at sampled optimum",
        );
    }

    #[test]
    fn discretized_solver_matches_closed_form() {
        for inst in [w_inst(), l_inst(), r_inst()] {
            let sol = solve_closed_form(&inst).unwrap();
            let traj = solve_discretized(&inst, 2000).unwrap();
            assert_close(traj.objective_value, sol.value, 1e-6, "oracle value");
            let mut sup = 0.0f64;
            for (i, &t) in traj.grid.iter().enumerate() {
                let cf = evaluate_delta(&sol, &inst, t.min(inst.horizon_v)).unwrap();
                sup = sup.max(math::abs(cf - traj.values[i]));
            }
            assert!(sup <= 1e-5, "sup-norm distance {sup}");
        }
    }

    #[test]
    fn discretized_zero_instance_is_flat() {
        let traj = solve_discretized(&zero_inst(), 256).unwrap();
        let sup = traj.values.iter().fold(0.0f64, |a, &v| a.max(math::abs(v)));
        assert!(sup <= 1e-10, "sup {sup}");
    }

    #[test]
    fn discretized_objective_increases_under_refinement() {
        let inst = r_inst();
        let value = solve_closed_form(&inst).unwrap().value;
        let mut prev = f64::NEG_INFINITY;
        for n in [125, 250, 500, 1000] {
            let obj = solve_discretized(&inst, n).unwrap().objective_value;
            assert!(obj >= prev - 1e-12, "objective dropped under refinement");
            assert!(obj <= value + 1e-9 * (1.0 + math::abs(value)));
            prev = obj;
        }
        assert_close(prev, value, 1e-6, "refined oracle approaches the value");
    }

    #[test]
    fn discretized_solver_flags_nonconcave_claims() {
        let mut inst = w_inst();
        inst.kappa_v = 1.5; // three times the admissible bound
        assert!(matches!(
            solve_discretized(&inst, 256),
            Err(Error::NonConcave)
        ));
    }

    #[test]
    fn degenerate_horizon_is_rejected() {
        let mut inst = w_inst();
        inst.horizon_v = 1e-7;
        assert!(matches!(
            coefficients(&inst),
            Err(Error::DegenerateHorizon { .. })
        ));
        assert!(matches!(
            solve_closed_form(&inst),
            Err(Error::DegenerateHorizon { .. })
        ));
        assert!(matches!(
            constrained_min_value(&inst, 0.1, 0.1),
            Err(Error::DegenerateHorizon { .. })
        ));
    }

    #[test]
    fn euler_lagrange_residual_is_constant() {
        // the optimum solves delta'' - rho delta = const; check the second
        // central difference minus rho delta is flat across the interior.
        let inst = w_inst();
        let sol = solve_closed_form(&inst).unwrap();
        let n = 2000;
        let h = inst.horizon_v / n as f64;
        let rho = inst.rho();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 1..n {
            let t = inst.horizon_v * i as f64 / n as f64;
            let d0 = evaluate_delta(&sol, &inst, (t - h).max(0.0)).unwrap();
            let d1 = evaluate_delta(&sol, &inst, t).unwrap();
            let d2 = evaluate_delta(&sol, &inst, (t + h).min(inst.horizon_v)).unwrap();
            let c = (d2 - 2.0 * d1 + d0) / (h * h) - rho * d1;
            lo = lo.min(c);
            hi = hi.max(c);
        }
        let mid = 0.5 * (lo + hi);
        assert!(
            hi - lo <= 1e-6 * (1.0 + math::abs(mid)),
            "residual spread {} around {}",
            hi - lo,
            mid
        );
        // and the constant is -rho c3.
        assert_close(mid, -rho * sol.c3, 1e-5, "residual constant");
    }

    #[test]
    fn energy_identity_holds() {
        // quadrature of rho int delta^2 + int delta'^2 against
        // sqrt(rho) (x^2 coth(sqrt(rho) T) + pinned^2 / shape denom).
        for inst in [w_inst(), r_inst()] {
            let sol = solve_closed_form(&inst).unwrap();
            let n = 4000; // even, Simpson
            let h = inst.horizon_v / n as f64;
            let rho = inst.rho();
            let f = |t: f64| {
                let d = evaluate_delta(&sol, &inst, t).unwrap();
                let dd = delta_derivative(&sol, &inst, t).unwrap();
                rho * d * d + dd * dd
            };
            let mut acc = f(0.0) + f(inst.horizon_v);
            for i in 1..n {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                acc += w * f(inst.horizon_v * i as f64 / n as f64);
            }
            let quad = acc * h / 3.0;
            let sq = inst.sqrt_rho();
            let z = sq * inst.horizon_v;
            let pinned = sol.x_bar * math::tanh(0.5 * z) - sq * sol.y_bar;
            let closed = sq
                * (sol.x_bar * sol.x_bar * math::coth(z) + pinned * pinned / math::shape_denom(z));
            assert_close(quad, closed, 1e-9, "energy identity");
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn instances() -> impl Strategy<Value = VariationalInstance> {
            (
                0.3f64..2.5,
                0.2f64..3.0,
                0.25f64..4.0,
                0.3f64..2.5,
                -1.0f64..1.0,
                0.3f64..3.0,
                -2.0f64..2.0,
                0.0f64..0.95,
            )
                .prop_map(|(sigma, alpha, lambda, horizon, mu, s0, phi0, frac)| {
                    let bound = 1.0 / (2.0 * alpha * sigma * sigma * horizon);
                    VariationalInstance {
                        kappa_v: frac * bound,
                        s0_v: s0,
                        mu_v: mu,
                        phi0_v: phi0,
                        sigma_v: sigma,
                        alpha_v: alpha,
                        lambda_v: lambda,
                        horizon_v: horizon,
                    }
                })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(128))]

            #[test]
            fn quadratic_form_is_always_nondegenerate(inst in instances()) {
                let q = coefficients(&inst).unwrap();
                prop_assert!(q.b_coef < 0.0);
                prop_assert!(q.a_coef * q.b_coef - q.c_coef * q.c_coef > 0.0);
            }

            #[test]
            fn mean_routes_agree(inst in instances()) {
                let sol = solve_closed_form(&inst).unwrap();
                let direct = mean_of_optimal_delta(&inst);
                prop_assert!(
                    math::abs(direct - sol.y_bar / inst.horizon_v)
                        <= 1e-10 * (1.0 + math::abs(direct))
                );
            }

            #[test]
            fn no_feasible_trajectory_beats_the_value(
                inst in instances(),
                raw in proptest::collection::vec(-1.5f64..1.5, 24),
            ) {
                let sol = solve_closed_form(&inst).unwrap();
                let n = raw.len();
                let grid: Vec<f64> =
                    (0..=n).map(|i| inst.horizon_v * i as f64 / n as f64).collect();
                let mut values = Vec::with_capacity(n + 1);
                values.push(0.0);
                values.extend(raw.iter());
                let obj = objective_of(&inst, &grid, &values).unwrap();
                prop_assert!(obj <= sol.value + 1e-9 * (1.0 + math::abs(sol.value)));
            }
        }
    }
}
