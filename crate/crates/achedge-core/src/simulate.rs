//! Price-path generation, wealth and claim evaluation, Monte Carlo
//! certainty-equivalent estimation, and perturbation-based optimality checks.
//!
//! Determinism contract: every estimate is a pure function of
//! `(seed, n_paths, n_steps)` and the strategy source. Per-path work is keyed
//! by path index through the counter-based RNG and the cross-path reduction
//! is a fixed-shape pairwise sum, so results are bit-identical regardless of
//! how many workers run the loop.

use alloc::vec;
use alloc::vec::Vec;

use serde::Serialize;

use crate::math;
use crate::model::ProblemSpec;
use crate::rng;
use crate::strategy::{check_uniform_grid, FeedbackTable, StrategyPath};
use crate::{Error, Result};

/// A discretized price trajectory on a uniform grid over [0, T].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PricePath {
    pub grid: Vec<f64>,
    pub prices: Vec<f64>,
}

/// Certainty-equivalent estimate with its standard error and the
/// reproducibility key that generated it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    /// (1/alpha) log E[exp(alpha (claim - wealth))]: the cost-form certainty
    /// equivalent the optimal strategy minimizes.
    pub value: f64,
    /// Delta-method standard error of `value`.
    pub std_err: f64,
    pub n_paths: u64,
    pub n_steps: usize,
    pub seed: u64,
}

/// Monte Carlo run parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McConfig {
    pub n_paths: u64,
    pub n_steps: usize,
    pub seed: u64,
}

impl McConfig {
    pub fn new(n_paths: u64, n_steps: usize, seed: u64) -> Self {
        Self {
            n_paths,
            n_steps,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::Invalid {
                name: "n_paths",
                value: 0.0,
                constraint: "n_paths >= 1",
            });
        }
        if self.n_steps < 16 {
            return Err(Error::Invalid {
                name: "n_steps",
                value: self.n_steps as f64,
                constraint: "n_steps >= 16",
            });
        }
        Ok(())
    }
}

/// Samples one exact-increment Gaussian price path:
/// `S_{i+1} = S_i + mu dt + sigma sqrt(dt) Z_i` with `Z_i` drawn from the
/// counter-based stream keyed by `(seed, path_index, i)`. Bit-identical for
/// identical keys.
pub fn sample_path(p: &ProblemSpec, n_steps: usize, seed: u64, path_index: u64) -> PricePath {
    assert!(n_steps >= 1, "n_steps must be at least 1");
    let h = p.t_horizon / n_steps as f64;
    let sd = p.sigma * math::sqrt(h);
    let mut grid = Vec::with_capacity(n_steps + 1);
    let mut prices = Vec::with_capacity(n_steps + 1);
    grid.push(0.0);
    prices.push(p.s0);
    let mut s = p.s0;
    for i in 0..n_steps {
        s += p.mu * h + sd * rng::standard_normal(seed, path_index, i as u64);
        grid.push(p.t_horizon * (i + 1) as f64 / n_steps as f64);
        prices.push(s);
    }
    PricePath { grid, prices }
}

fn grids_match(a: &[f64], b: &[f64], scale: f64) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(x, y)| math::abs(x - y) <= 1e-9 * scale.max(1.0))
}

/// Trading profit and loss along a path:
/// `-phi0 S0 - sum_i phi_i S_i dt - (lambda/2) sum_i phi_i^2 dt`,
/// the left-endpoint quadrature that is exact for the piecewise-constant
/// rate class the strategies live in.
pub fn wealth(p: &ProblemSpec, path: &PricePath, strat: &StrategyPath) -> Result<f64> {
    if path.grid.len() != strat.grid.len() {
        return Err(Error::GridMismatch {
            expected: path.grid.len(),
            found: strat.grid.len(),
        });
    }
    if !grids_match(&path.grid, &strat.grid, p.t_horizon) {
        return Err(Error::NonUniformGrid);
    }
    let mut traded = 0.0;
    let mut impact = 0.0;
    for i in 0..strat.phi.len() {
        let h = path.grid[i + 1] - path.grid[i];
        traded += strat.phi[i] * path.prices[i] * h;
        impact += strat.phi[i] * strat.phi[i] * h;
    }
    let v = -p.phi0 * p.s0 - traded - 0.5 * p.lambda_impact * impact;
    #[cfg(debug_assertions)]
    {
        // Pathwise upper bound: V <= -phi0 S0 + (1/(2 lambda)) int S^2 dt.
        let mut s_sq = 0.0;
        for i in 0..strat.phi.len() {
            let h = path.grid[i + 1] - path.grid[i];
            s_sq += path.prices[i] * path.prices[i] * h;
        }
        let bound = -p.phi0 * p.s0 + s_sq / (2.0 * p.lambda_impact);
        debug_assert!(
            v <= bound + 1e-9 * (1.0 + math::abs(bound)),
            "wealth {v} above its pathwise bound {bound}"
        );
    }
    Ok(v)
}

/// Claim payoff: kappa times the squared terminal price.
pub fn claim_payoff(p: &ProblemSpec, path: &PricePath) -> f64 {
    let s_t = *path.prices.last().expect("price path is never empty");
    p.kappa * s_t * s_t
}

/// A liquidation-preserving perturbation direction: per-interval rate
/// values whose time integral vanishes, so adding `eps * psi` to any
/// strategy leaves its terminal position unchanged.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Perturbation {
    psi: Vec<f64>,
}

impl Perturbation {
    /// Validates the zero-integral invariant (relative tolerance 1e-9
    /// against the absolute mass of the direction).
    pub fn new(psi: Vec<f64>, horizon: f64) -> Result<Self> {
        if psi.is_empty() {
            return Err(Error::Invalid {
                name: "psi",
                value: 0.0,
                constraint: "at least one interval",
            });
        }
        let h = horizon / psi.len() as f64;
        let integral = h * math::pairwise_sum(&psi);
        let mass: f64 = h * psi.iter().map(|x| math::abs(*x)).sum::<f64>();
        if math::abs(integral) > 1e-9 * mass.max(1.0) {
            return Err(Error::NotLiquidationPreserving { integral });
        }
        Ok(Self { psi })
    }

    /// Centers raw values to enforce the zero-integral invariant exactly
    /// (up to round-off) and wraps them.
    pub fn centered(mut raw: Vec<f64>, horizon: f64) -> Result<Self> {
        let mean = math::pairwise_mean(&raw);
        for x in raw.iter_mut() {
            *x -= mean;
        }
        Self::new(raw, horizon)
    }

    pub fn rates(&self) -> &[f64] {
        &self.psi
    }

    pub fn len(&self) -> usize {
        self.psi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psi.is_empty()
    }
}

/// Adds `eps * psi` to the rates and recomputes positions. The terminal
/// position is preserved exactly (it is pinned back to the base terminal,
/// which the zero-integral invariant guarantees up to round-off).
pub fn perturb(strat: &StrategyPath, psi: &Perturbation, eps: f64) -> Result<StrategyPath> {
    if psi.len() != strat.phi.len() {
        return Err(Error::GridMismatch {
            expected: strat.phi.len(),
            found: psi.len(),
        });
    }
    let phi: Vec<f64> = strat
        .phi
        .iter()
        .zip(psi.rates())
        .map(|(f, q)| f + eps * q)
        .collect();
    let mut out = StrategyPath::from_rates(strat.position[0], strat.grid.clone(), phi)?;
    let base_terminal = strat.terminal_position();
    debug_assert!(
        math::abs(out.terminal_position() - base_terminal)
            <= 1e-9 * (1.0 + math::abs(base_terminal)),
        "perturbation moved the terminal position"
    );
    *out.position.last_mut().unwrap() = base_terminal;
    Ok(out)
}

/// What the Monte Carlo estimator trades on each path.
#[derive(Debug, Clone, Copy)]
pub enum BaseStrategy<'a> {
    /// Integrate the optimal feedback law closed-loop along each path.
    Feedback,
    /// A fixed per-interval rate schedule applied to every path.
    FixedRates(&'a [f64]),
}

/// A base strategy plus an optional open-loop perturbation `eps * psi` of
/// the realized rates.
#[derive(Debug, Clone, Copy)]
pub struct StrategySource<'a> {
    pub base: BaseStrategy<'a>,
    pub perturbation: Option<(&'a Perturbation, f64)>,
}

impl<'a> StrategySource<'a> {
    pub fn feedback() -> Self {
        Self {
            base: BaseStrategy::Feedback,
            perturbation: None,
        }
    }

    pub fn fixed(rates: &'a [f64]) -> Self {
        Self {
            base: BaseStrategy::FixedRates(rates),
            perturbation: None,
        }
    }

    pub fn perturbed(base: BaseStrategy<'a>, psi: &'a Perturbation, eps: f64) -> Self {
        Self {
            base,
            perturbation: Some((psi, eps)),
        }
    }

    fn check(&self, n_steps: usize) -> Result<()> {
        if let BaseStrategy::FixedRates(rates) = self.base {
            if rates.len() != n_steps {
                return Err(Error::GridMismatch {
                    expected: n_steps,
                    found: rates.len(),
                });
            }
        }
        if let Some((psi, _)) = self.perturbation {
            if psi.len() != n_steps {
                return Err(Error::GridMismatch {
                    expected: n_steps,
                    found: psi.len(),
                });
            }
        }
        Ok(())
    }
}

/// One path's utility exponent `alpha (claim - wealth)` for one source,
/// stepping prices and the closed loop without materializing path structs.
fn path_exponent(
    p: &ProblemSpec,
    table: &FeedbackTable,
    prices: &[f64],
    h: f64,
    source: &StrategySource<'_>,
) -> f64 {
    let n = prices.len() - 1;
    let mut traded = 0.0;
    let mut impact = 0.0;
    let mut pos = p.phi0;
    for i in 0..n {
        let base_rate = match source.base {
            BaseStrategy::Feedback => {
                if i + 1 < n {
                    table.rate(i, prices[i], pos)
                } else {
                    -pos / h
                }
            }
            BaseStrategy::FixedRates(rates) => rates[i],
        };
        pos += base_rate * h;
        let rate = match source.perturbation {
            Some((psi, eps)) => base_rate + eps * psi.rates()[i],
            None => base_rate,
        };
        traded += rate * prices[i] * h;
        impact += rate * rate * h;
    }
    let v = -p.phi0 * p.s0 - traded - 0.5 * p.lambda_impact * impact;
    #[cfg(debug_assertions)]
    {
        // pathwise wealth bound: V <= -phi0 S0 + (1/(2 lambda)) int S^2 dt
        let mut s_sq = 0.0;
        for &s in prices.iter().take(n) {
            s_sq += s * s * h;
        }
        let bound = -p.phi0 * p.s0 + s_sq / (2.0 * p.lambda_impact);
        // non-finite wealth is reported as an estimator error by the caller
        debug_assert!(!v.is_finite() || v <= bound + 1e-9 * (1.0 + math::abs(bound)));
    }
    let s_t = prices[n];
    p.alpha * (p.kappa * s_t * s_t - v)
}

#[cfg(feature = "parallel")]
fn per_path_rows<F>(n_paths: u64, f: F) -> Vec<Vec<f64>>
where
    F: Fn(u64) -> Vec<f64> + Sync + Send,
{
    use rayon::prelude::*;
    (0..n_paths).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn per_path_rows<F>(n_paths: u64, f: F) -> Vec<Vec<f64>>
where
    F: Fn(u64) -> Vec<f64> + Sync + Send,
{
    (0..n_paths).map(f).collect()
}

/// Per-path exponents for several sources sharing the same paths (common
/// random numbers). Returns one column per source.
fn exponents_for_sources(
    p: &ProblemSpec,
    cfg: &McConfig,
    sources: &[StrategySource<'_>],
) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    for source in sources {
        source.check(cfg.n_steps)?;
    }
    let table = FeedbackTable::new(p, cfg.n_steps);
    let h = p.t_horizon / cfg.n_steps as f64;
    let sd = p.sigma * math::sqrt(h);

    let rows = per_path_rows(cfg.n_paths, |j| {
        let mut prices = Vec::with_capacity(cfg.n_steps + 1);
        let mut s = p.s0;
        prices.push(s);
        for i in 0..cfg.n_steps {
            s += p.mu * h + sd * rng::standard_normal(cfg.seed, j, i as u64);
            prices.push(s);
        }
        sources
            .iter()
            .map(|src| path_exponent(p, &table, &prices, h, src))
            .collect()
    });

    let mut cols = vec![Vec::with_capacity(cfg.n_paths as usize); sources.len()];
    for (j, row) in rows.iter().enumerate() {
        for (k, &y) in row.iter().enumerate() {
            if !y.is_finite() {
                return Err(Error::NonFiniteExponent {
                    path_index: j as u64,
                });
            }
            cols[k].push(y);
        }
    }
    Ok(cols)
}

/// Shifted log-mean-exp of a sample, with the pieces the delta method needs.
struct LogMeanExp {
    log_mean: f64,
    /// Relative variance var(w)/mean(w)^2 of the shifted weights; the
    /// delta-method variance of `log_mean` is this over n.
    rel_var: f64,
    ws: Vec<f64>,
    mean_w: f64,
}

fn log_mean_exp(ys: &[f64]) -> LogMeanExp {
    let m = ys.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let ws: Vec<f64> = ys.iter().map(|&y| math::exp(y - m)).collect();
    let mean_w = math::pairwise_mean(&ws);
    let n = ws.len() as f64;
    let var_w = if ws.len() > 1 {
        let dev: Vec<f64> = ws.iter().map(|&w| (w - mean_w) * (w - mean_w)).collect();
        (math::pairwise_sum(&dev) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    LogMeanExp {
        log_mean: m + math::ln(mean_w),
        rel_var: var_w / (mean_w * mean_w),
        ws,
        mean_w,
    }
}

fn sample_cov(a: &[f64], mean_a: f64, b: &[f64], mean_b: f64) -> f64 {
    let dev: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| (x - mean_a) * (y - mean_b))
        .collect();
    math::pairwise_sum(&dev) / (a.len() as f64 - 1.0)
}

/// Estimates the certainty equivalent
/// `(1/alpha) log E[exp(alpha (claim - wealth))]` under the given strategy
/// source, with the exponential handled by a max-shifted log-sum-exp so
/// claim coefficients near the bound cannot overflow the reduction.
pub fn mc_certainty_equivalent(
    p: &ProblemSpec,
    cfg: &McConfig,
    source: &StrategySource<'_>,
) -> Result<McEstimate> {
    let cols = exponents_for_sources(p, cfg, core::slice::from_ref(source))?;
    let lme = log_mean_exp(&cols[0]);
    let n = cols[0].len() as f64;
    Ok(McEstimate {
        value: lme.log_mean / p.alpha,
        std_err: math::sqrt(lme.rel_var / n) / p.alpha,
        n_paths: cfg.n_paths,
        n_steps: cfg.n_steps,
        seed: cfg.seed,
    })
}

/// A paired (common-random-numbers) comparison of two strategy sources.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CeComparison {
    pub ce_a: f64,
    pub ce_b: f64,
    /// ce_a - ce_b.
    pub diff: f64,
    /// Delta-method standard error of `diff`, including the covariance
    /// credit from sharing paths.
    pub diff_std_err: f64,
}

pub fn mc_compare(
    p: &ProblemSpec,
    cfg: &McConfig,
    a: &StrategySource<'_>,
    b: &StrategySource<'_>,
) -> Result<CeComparison> {
    let cols = exponents_for_sources(p, cfg, &[*a, *b])?;
    let la = log_mean_exp(&cols[0]);
    let lb = log_mean_exp(&cols[1]);
    let n = la.ws.len() as f64;
    let rel_cov = if la.ws.len() > 1 {
        sample_cov(&la.ws, la.mean_w, &lb.ws, lb.mean_w) / (la.mean_w * lb.mean_w)
    } else {
        0.0
    };
    // identical columns cancel exactly here: each term is the same
    // expression evaluated on bitwise-equal inputs.
    let var_diff = (la.rel_var + lb.rel_var - 2.0 * rel_cov) / n;
    Ok(CeComparison {
        ce_a: la.log_mean / p.alpha,
        ce_b: lb.log_mean / p.alpha,
        diff: (la.log_mean - lb.log_mean) / p.alpha,
        diff_std_err: math::sqrt(var_diff.max(0.0)) / p.alpha,
    })
}

/// Central-difference slope of the certainty equivalent along `psi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeEstimate {
    pub eps: f64,
    pub slope: f64,
    pub std_err: f64,
}

/// Central-difference slope of the CE in `eps` at the base strategy, one
/// estimate per rung of the ladder, all under common random numbers. At the
/// optimum the slope vanishes to first order; the standard error carries the
/// full covariance credit of the pairing.
pub fn gradient_check(
    p: &ProblemSpec,
    cfg: &McConfig,
    base: BaseStrategy<'_>,
    psi: &Perturbation,
    eps_ladder: &[f64],
) -> Result<Vec<SlopeEstimate>> {
    let mut out = Vec::with_capacity(eps_ladder.len());
    for &eps in eps_ladder {
        if !(eps > 0.0) {
            return Err(Error::Invalid {
                name: "eps",
                value: eps,
                constraint: "eps > 0",
            });
        }
        let plus = StrategySource::perturbed(base, psi, eps);
        let minus = StrategySource::perturbed(base, psi, -eps);
        let cmp = mc_compare(p, cfg, &plus, &minus)?;
        out.push(SlopeEstimate {
            eps,
            slope: cmp.diff / (2.0 * eps),
            std_err: cmp.diff_std_err / (2.0 * eps),
        });
    }
    Ok(out)
}

/// Convenience wrapper: price path plus its closed-loop feedback strategy.
pub fn feedback_strategy_on(
    p: &ProblemSpec,
    n_steps: usize,
    seed: u64,
    path_index: u64,
) -> Result<(PricePath, StrategyPath)> {
    let path = sample_path(p, n_steps, seed, path_index);
    let strat = crate::strategy::integrate_closed_loop(p, &path)?;
    Ok((path, strat))
}

/// Validates that a price path sits on a uniform grid spanning [0, T].
pub fn validate_path(p: &ProblemSpec, path: &PricePath) -> Result<()> {
    if path.prices.len() != path.grid.len() {
        return Err(Error::GridMismatch {
            expected: path.grid.len(),
            found: path.prices.len(),
        });
    }
    check_uniform_grid(&path.grid, p.t_horizon)?;
    Ok(())
}
