use std::path::{Path, PathBuf};
use std::process::ExitCode;

use achedge_core::dual::{self, QuadConfig};
use achedge_core::model::derived_constants;
use achedge_core::simulate::{
    claim_payoff, mc_certainty_equivalent, sample_path, wealth, McConfig, StrategySource,
};
use achedge_core::strategy::{initial_rate, integrate_closed_loop, target_position};
use achedge_core::variational::{evaluate_delta, solve_closed_form};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use achedge::battery::{residual_seed_sweep, run_battery, BatteryOptions};
use achedge::config::RunConfig;
use achedge::sweep::{run_sweep, SweepParam, SweepRequest};
use achedge::{csvout, CliError};

/// Optimal liquidation and quadratic-claim hedging under linear temporary
/// impact: closed-form solver, Monte Carlo estimator, dual-value
/// verification.
#[derive(Parser)]
#[command(name = "achedge", version, about)]
struct Cli {
    /// JSON run configuration (see README for the schema).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads; falls back to ACHEDGE_THREADS, then machine parallelism.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Copy)]
struct McArgs {
    /// Monte Carlo paths (default 100000, or the config value).
    #[arg(long)]
    paths: Option<u64>,
    /// Time steps per path (default 2000, or the config value).
    #[arg(long)]
    steps: Option<usize>,
    /// Base RNG seed (default 1, or the config value).
    #[arg(long)]
    seed: Option<u64>,
    /// Simpson nodes for the dual quadrature (default 201, odd).
    #[arg(long)]
    quad_nodes: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form report: initial rate, dual martingale level, target and
    /// optimal-trajectory profiles.
    Solve {
        /// Grid points for the printed profiles.
        #[arg(long, default_value_t = 101)]
        grid_points: usize,
        /// Directory for the CSV profiles (written only when given).
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Monte Carlo certainty equivalent under the feedback strategy.
    Simulate {
        #[command(flatten)]
        mc: McArgs,
        /// Write the JSON estimate here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also dump per-path (claim, wealth, exponent) rows as CSV.
        #[arg(long)]
        per_path: Option<PathBuf>,
        /// Also dump the closed-loop strategy along path 0 as CSV.
        #[arg(long)]
        strategy_csv: Option<PathBuf>,
    },
    /// Dual value report and the J* profile.
    Dual {
        #[command(flatten)]
        mc: McArgs,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the (s, j_star) profile CSV here.
        #[arg(long)]
        profile: Option<PathBuf>,
    },
    /// Run the full verification battery (exit status 1 on any failure).
    Verify {
        #[command(flatten)]
        mc: McArgs,
        /// Random perturbation directions for the gradient check.
        #[arg(long, default_value_t = 5)]
        gradient_dirs: usize,
        /// Also run the martingale-residual ratio across this many seeds.
        #[arg(long)]
        seed_sweep: Option<usize>,
        /// Write the JSONL results here as well as stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One-parameter sweep table (CSV).
    Sweep {
        /// Parameter to sweep: kappa, lambda, alpha, or horizon.
        #[arg(long)]
        param: String,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        /// Number of grid points (>= 2).
        #[arg(long)]
        count: usize,
        /// Also estimate the Monte Carlo certainty equivalent per row.
        #[arg(long, default_value_t = false)]
        with_ce: bool,
        #[command(flatten)]
        mc: McArgs,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Serialize)]
struct SolveReport<'a> {
    initial_rate: f64,
    m0_hat: f64,
    derived: &'a achedge_core::DerivedConstants,
    solution: &'a achedge_core::variational::VariationalSolution,
    /// (t, target position at the initial price) pairs.
    target_profile: Vec<(f64, f64)>,
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(path) => {
            std::fs::write(path, text)?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn load_config(cli_config: &Option<PathBuf>) -> Result<RunConfig, CliError> {
    let path = cli_config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config <file> is required".into()))?;
    RunConfig::load(path)
}

fn init_threads(cli: Option<usize>, cfg: Option<usize>) {
    let n = cli.or_else(|| {
        std::env::var("ACHEDGE_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = n.or(cfg) {
        if n >= 1 {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
    }
}

fn cmd_solve(cfg: &RunConfig, grid_points: usize, out_dir: Option<&Path>) -> Result<(), CliError> {
    if grid_points < 2 {
        return Err(CliError::Config("grid-points must be at least 2".into()));
    }
    let p = cfg.validated_problem()?;
    let inst = dual::i_instance(&p);
    let solution = solve_closed_form(&inst)?;
    let derived = derived_constants(&p);
    let mut target_profile = Vec::with_capacity(grid_points);
    let mut profile_rows = Vec::with_capacity(grid_points);
    for i in 0..grid_points {
        // stay strictly below maturity, where the target is 0 by the limit
        let t = p.t_horizon * i as f64 / grid_points as f64;
        let target = target_position(&p, t, p.s0)?;
        target_profile.push((t, target));
        profile_rows.push((t, target, evaluate_delta(&solution, &inst, t)?));
    }
    let report = SolveReport {
        initial_rate: initial_rate(&p),
        m0_hat: dual::m0_hat(&p),
        derived: &derived,
        solution: &solution,
        target_profile,
    };
    let mut text =
        serde_json::to_string_pretty(&report).map_err(|e| CliError::Runtime(e.to_string()))?;
    text.push('\n');
    emit(&text, None)?;
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        emit(
            &csvout::solve_profile_csv(&profile_rows),
            Some(&dir.join("solve_profile.csv")),
        )?;
        let mut grid = Vec::with_capacity(grid_points + 1);
        let mut values = Vec::with_capacity(grid_points + 1);
        for i in 0..=grid_points {
            let t = (p.t_horizon * i as f64 / grid_points as f64).min(p.t_horizon);
            grid.push(t);
            values.push(evaluate_delta(&solution, &inst, t)?);
        }
        let traj = achedge_core::variational::DiscreteTrajectory {
            grid,
            values,
            objective_value: solution.value,
        };
        emit(
            &csvout::trajectory_csv(&traj),
            Some(&dir.join("optimal_trajectory.csv")),
        )?;
    }
    Ok(())
}

fn cmd_simulate(
    cfg: &RunConfig,
    mc: &McArgs,
    out: Option<&Path>,
    per_path: Option<&Path>,
    strategy_csv: Option<&Path>,
) -> Result<(), CliError> {
    let params = cfg.params(mc.paths, mc.steps, mc.seed, mc.quad_nodes)?;
    let p = cfg.validated_problem()?;
    let est = mc_certainty_equivalent(
        &p,
        &McConfig::new(params.paths, params.steps, params.seed),
        &StrategySource::feedback(),
    )?;
    let mut text =
        serde_json::to_string_pretty(&est).map_err(|e| CliError::Runtime(e.to_string()))?;
    text.push('\n');
    emit(&text, out)?;
    if let Some(dump) = per_path {
        let mut rows = Vec::with_capacity(params.paths as usize);
        for j in 0..params.paths {
            let path = sample_path(&p, params.steps, params.seed, j);
            let strat = integrate_closed_loop(&p, &path)?;
            let v = wealth(&p, &path, &strat)?;
            let x = claim_payoff(&p, &path);
            rows.push((j, x, v, p.alpha * (x - v)));
        }
        emit(&csvout::per_path_csv(&rows), Some(dump))?;
    }
    if let Some(path) = strategy_csv {
        let price = sample_path(&p, params.steps, params.seed, 0);
        let strat = integrate_closed_loop(&p, &price)?;
        emit(&csvout::strategy_csv(&price, &strat), Some(path))?;
    }
    Ok(())
}

fn cmd_dual(
    cfg: &RunConfig,
    mc: &McArgs,
    out: Option<&Path>,
    profile: Option<&Path>,
) -> Result<(), CliError> {
    let params = cfg.params(mc.paths, mc.steps, mc.seed, mc.quad_nodes)?;
    let p = cfg.validated_problem()?;
    let quad = QuadConfig {
        nodes: params.quad_nodes,
        rel_tolerance: 1e-6,
    };
    let report = dual::dual_value(&p, &quad)?;
    let mut text =
        serde_json::to_string_pretty(&report).map_err(|e| CliError::Runtime(e.to_string()))?;
    text.push('\n');
    emit(&text, out)?;
    if let Some(path) = profile {
        let n = report.quad_nodes - 1;
        let mut points = Vec::with_capacity(n + 1);
        for k in 0..=n {
            // clamp: the last node can round one ulp above the horizon
            let s = (p.t_horizon * k as f64 / n as f64).min(p.t_horizon);
            points.push((s, dual::j_star(&p, s)?));
        }
        emit(&csvout::j_profile_csv(&points), Some(path))?;
    }
    Ok(())
}

fn cmd_verify(
    cfg: &RunConfig,
    mc: &McArgs,
    gradient_dirs: usize,
    seed_sweep: Option<usize>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let params = cfg.params(mc.paths, mc.steps, mc.seed, mc.quad_nodes)?;
    let opts = BatteryOptions {
        paths: params.paths,
        steps: params.steps,
        seed: params.seed,
        quad_nodes: params.quad_nodes,
        gradient_directions: gradient_dirs,
        ..BatteryOptions::default()
    };
    let results = run_battery(&cfg.problem, &opts);
    let mut text = String::new();
    for r in &results {
        text.push_str(&serde_json::to_string(r).map_err(|e| CliError::Runtime(e.to_string()))?);
        text.push('\n');
    }
    if let Some(seeds) = seed_sweep {
        let sweep = residual_seed_sweep(&cfg.problem, params.seed, seeds, 1000)?;
        text.push_str(
            &serde_json::to_string(&sweep).map_err(|e| CliError::Runtime(e.to_string()))?,
        );
        text.push('\n');
    }
    print!("{text}");
    if let Some(path) = out {
        std::fs::write(path, &text)?;
        eprintln!("wrote {}", path.display());
    }
    let failed: Vec<&str> = results
        .iter()
        .filter(|r| !r.pass)
        .map(|r| r.check)
        .collect();
    if failed.is_empty() {
        eprintln!("verify: all {} checks passed", results.len());
        Ok(())
    } else {
        Err(CliError::Runtime(format!(
            "verify: {}/{} checks failed: {}",
            failed.len(),
            results.len(),
            failed.join(", ")
        )))
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    cfg: &RunConfig,
    param: &str,
    from: f64,
    to: f64,
    count: usize,
    with_ce: bool,
    mc: &McArgs,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let params = cfg.params(mc.paths, mc.steps, mc.seed, mc.quad_nodes)?;
    let req = SweepRequest {
        param: SweepParam::parse(param)?,
        from,
        to,
        count,
        with_ce,
    };
    let problem = cfg.validated_problem()?;
    let table = run_sweep(&problem, &req, &params)?;
    emit(&table, out)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = load_config(&cli.config)?;
    init_threads(cli.threads, cfg.threads);
    match &cli.command {
        Command::Solve {
            grid_points,
            out_dir,
        } => cmd_solve(&cfg, *grid_points, out_dir.as_deref()),
        Command::Simulate {
            mc,
            out,
            per_path,
            strategy_csv,
        } => cmd_simulate(
            &cfg,
            mc,
            out.as_deref(),
            per_path.as_deref(),
            strategy_csv.as_deref(),
        ),
        Command::Dual { mc, out, profile } => {
            cmd_dual(&cfg, mc, out.as_deref(), profile.as_deref())
        }
        Command::Verify {
            mc,
            gradient_dirs,
            seed_sweep,
            out,
        } => cmd_verify(&cfg, mc, *gradient_dirs, *seed_sweep, out.as_deref()),
        Command::Sweep {
            param,
            from,
            to,
            count,
            with_ce,
            mc,
            out,
        } => cmd_sweep(
            &cfg,
            param,
            *from,
            *to,
            *count,
            *with_ce,
            mc,
            out.as_deref(),
        ),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
