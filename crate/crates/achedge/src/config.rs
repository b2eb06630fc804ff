//! Run configuration: a single JSON document holding the problem plus
//! optional run parameters, overridable by CLI flags.

use std::fs;
use std::path::Path;

use achedge_core::{validate_problem, ProblemSpec};
use serde::Deserialize;

use crate::CliError;

/// The config file schema. Unknown keys are rejected, both here and inside
/// `problem`, so typos fail loudly instead of silently running defaults.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    #[serde(default)]
    pub paths: Option<u64>,
    #[serde(default)]
    pub steps: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub quad_nodes: Option<usize>,
    #[serde(default)]
    pub threads: Option<usize>,
}

/// Effective run parameters after merging config defaults and CLI overrides.
#[derive(Debug, Clone, Copy)]
pub struct RunParams {
    pub paths: u64,
    pub steps: usize,
    pub seed: u64,
    pub quad_nodes: usize,
}

pub const DEFAULT_PATHS: u64 = 100_000;
pub const DEFAULT_STEPS: usize = 2_000;
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_QUAD_NODES: usize = 201;

impl RunConfig {
    /// Loads and parses a config file; any failure is a config error (exit
    /// status 2). The problem itself is validated per command: `verify`
    /// reports an inadmissible problem as a failed validation check instead
    /// of refusing to run.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("cannot parse {}: {e}", path.display())))?;
        Ok(cfg)
    }

    /// The problem after admissibility validation, as a config error.
    pub fn validated_problem(&self) -> Result<ProblemSpec, CliError> {
        validate_problem(self.problem)
            .map_err(|e| CliError::Config(format!("invalid problem: {e}")))
    }

    /// Merges config values with CLI overrides (overrides win) and the
    /// global defaults, then checks positivity.
    pub fn params(
        &self,
        paths: Option<u64>,
        steps: Option<usize>,
        seed: Option<u64>,
        quad_nodes: Option<usize>,
    ) -> Result<RunParams, CliError> {
        let params = RunParams {
            paths: paths.or(self.paths).unwrap_or(DEFAULT_PATHS),
            steps: steps.or(self.steps).unwrap_or(DEFAULT_STEPS),
            seed: seed.or(self.seed).unwrap_or(DEFAULT_SEED),
            quad_nodes: quad_nodes.or(self.quad_nodes).unwrap_or(DEFAULT_QUAD_NODES),
        };
        if params.paths == 0 {
            return Err(CliError::Config("paths must be positive".into()));
        }
        if params.steps < 16 {
            return Err(CliError::Config("steps must be at least 16".into()));
        }
        if params.quad_nodes < 3 || params.quad_nodes.is_multiple_of(2) {
            return Err(CliError::Config("quad-nodes must be odd and >= 3".into()));
        }
        Ok(params)
    }
}
