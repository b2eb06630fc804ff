//! Parameter sweeps: one row per value of a single swept parameter, all
//! other inputs held fixed.

use std::fmt::Write as _;

use achedge_core::dual::{self, QuadConfig};
use achedge_core::model::{derived_constants, positivity_margins, validate_problem, ProblemSpec};
use achedge_core::simulate::{mc_certainty_equivalent, McConfig, StrategySource};
use achedge_core::strategy::{initial_rate, target_position};
use achedge_core::variational::solve_closed_form;

use crate::config::RunParams;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Kappa,
    Lambda,
    Alpha,
    Horizon,
}

impl SweepParam {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "kappa" => Ok(Self::Kappa),
            "lambda" => Ok(Self::Lambda),
            "alpha" => Ok(Self::Alpha),
            "horizon" => Ok(Self::Horizon),
            other => Err(CliError::Config(format!(
                "unknown sweep parameter `{other}` (expected kappa, lambda, alpha, or horizon)"
            ))),
        }
    }

    pub fn apply(&self, base: &ProblemSpec, value: f64) -> ProblemSpec {
        let mut p = *base;
        match self {
            Self::Kappa => p.kappa = value,
            Self::Lambda => p.lambda_impact = value,
            Self::Alpha => p.alpha = value,
            Self::Horizon => p.t_horizon = value,
        }
        p
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Kappa => "kappa",
            Self::Lambda => "lambda",
            Self::Alpha => "alpha",
            Self::Horizon => "horizon",
        }
    }
}

pub struct SweepRequest {
    pub param: SweepParam,
    pub from: f64,
    pub to: f64,
    pub count: usize,
    pub with_ce: bool,
}

/// Runs the sweep and renders the CSV table. Every grid point must be a
/// valid problem; for kappa sweeps in particular, a range touching the
/// admissibility bound is rejected up front.
pub fn run_sweep(
    base: &ProblemSpec,
    req: &SweepRequest,
    params: &RunParams,
) -> Result<String, CliError> {
    if req.count < 2 {
        return Err(CliError::Config("sweep count must be at least 2".into()));
    }
    if req.from.is_nan() || req.to.is_nan() || req.to <= req.from {
        return Err(CliError::Config("sweep range must have to > from".into()));
    }
    if req.param == SweepParam::Kappa {
        let bound = derived_constants(base).kappa_bound;
        if req.to >= bound {
            return Err(CliError::Config(format!(
                "kappa sweep touches the admissibility bound {bound}; keep to < bound"
            )));
        }
    }

    let specs: Vec<(f64, ProblemSpec)> = (0..req.count)
        .map(|i| {
            let v = req.from + (req.to - req.from) * i as f64 / (req.count - 1) as f64;
            (v, req.param.apply(base, v))
        })
        .collect();
    for (v, p) in &specs {
        validate_problem(*p).map_err(|e| {
            CliError::Config(format!(
                "sweep point {}={v} is invalid: {e}",
                req.param.name()
            ))
        })?;
    }

    let mut out = String::new();
    let _ = write!(out, "{}", req.param.name());
    let _ = write!(
        out,
        ",initial_rate,target0,i_star,dual_total,margin_rate,margin_target"
    );
    if req.with_ce {
        let _ = write!(out, ",ce_value,ce_std_err");
    }
    out.push('\n');

    let quad = QuadConfig {
        nodes: params.quad_nodes,
        rel_tolerance: 1e-6,
    };
    for (v, p) in &specs {
        let rate = initial_rate(p);
        let target0 =
            target_position(p, 0.0, p.s0).map_err(|e| CliError::Runtime(e.to_string()))?;
        let i_star = solve_closed_form(&dual::i_instance(p))
            .map_err(|e| CliError::Runtime(e.to_string()))?
            .value;
        let report = dual::dual_value(p, &quad).map_err(|e| CliError::Runtime(e.to_string()))?;
        let (m_rate, m_target) = positivity_margins(p);
        let _ = write!(
            out,
            "{v},{rate},{target0},{i_star},{},{m_rate},{m_target}",
            report.total
        );
        if req.with_ce {
            let est = mc_certainty_equivalent(
                p,
                &McConfig::new(params.paths, params.steps, params.seed),
                &StrategySource::feedback(),
            )
            .map_err(|e| CliError::Runtime(e.to_string()))?;
            let _ = write!(out, ",{},{}", est.value, est.std_err);
        }
        out.push('\n');
    }
    Ok(out)
}
