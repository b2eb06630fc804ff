//! Fixed CSV schemas. Header row mandatory, `.` decimal, no locale; floats
//! are written with Rust's shortest round-trip formatting so files are
//! byte-stable across runs and machines with the same build.

use std::fmt::Write as _;

use achedge_core::simulate::PricePath;
use achedge_core::strategy::StrategyPath;
use achedge_core::variational::DiscreteTrajectory;

/// Two-column trajectory export: `t,delta`.
pub fn trajectory_csv(traj: &DiscreteTrajectory) -> String {
    let mut out = String::from("t,delta\n");
    for (t, v) in traj.grid.iter().zip(&traj.values) {
        let _ = writeln!(out, "{t},{v}");
    }
    out
}

/// Strategy export: `t,price,phi,position`. The rate column on the final
/// row (maturity) is 0 by convention: the position is already liquidated
/// and no interval starts there.
pub fn strategy_csv(path: &PricePath, strat: &StrategyPath) -> String {
    let mut out = String::from("t,price,phi,position\n");
    for i in 0..strat.grid.len() {
        let phi = if i < strat.phi.len() {
            strat.phi[i]
        } else {
            0.0
        };
        let _ = writeln!(
            out,
            "{},{},{},{}",
            strat.grid[i], path.prices[i], phi, strat.position[i]
        );
    }
    out
}

/// Dual profile export: `s,j_star`.
pub fn j_profile_csv(points: &[(f64, f64)]) -> String {
    let mut out = String::from("s,j_star\n");
    for (s, j) in points {
        let _ = writeln!(out, "{s},{j}");
    }
    out
}

/// Target-position and optimal-trajectory profile for `solve`:
/// `t,target_position,nu_hat` (target at the initial price).
pub fn solve_profile_csv(rows: &[(f64, f64, f64)]) -> String {
    let mut out = String::from("t,target_position,nu_hat\n");
    for (t, target, nu) in rows {
        let _ = writeln!(out, "{t},{target},{nu}");
    }
    out
}

/// Per-path dump for `simulate`: `path_index,claim,wealth,exponent`.
pub fn per_path_csv(rows: &[(u64, f64, f64, f64)]) -> String {
    let mut out = String::from("path_index,claim,wealth,exponent\n");
    for (j, claim, wealth, exponent) in rows {
        let _ = writeln!(out, "{j},{claim},{wealth},{exponent}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_is_headered_and_stable() {
        let traj = DiscreteTrajectory {
            grid: vec![0.0, 0.5, 1.0],
            values: vec![0.0, 0.25, 1.0 / 3.0],
            objective_value: 0.0,
        };
        let a = trajectory_csv(&traj);
        assert_eq!(a, trajectory_csv(&traj));
        assert!(a.starts_with("t,delta\n0,0\n0.5,0.25\n"));
        // shortest round-trip float formatting
        assert!(a.contains("0.3333333333333333"));
    }
}
