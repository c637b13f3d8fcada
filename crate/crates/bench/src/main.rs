use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use w2est::estimators::{
    entropic_cost, plugin_w2sq, richardson, sinkhorn_divergence, DivergenceOptions, EstimateReport, PluginMode,
};
use w2est::measures::{DiscreteMeasure, Geometry};
use w2est::sinkhorn::SolverConfig;
use w2est_bench::config::{output_for, parse_estimators, parse_list};
use w2est_bench::runners::{
    run_gaussian_validation, run_grid_study, run_lambda_sweep, run_sample_complexity, run_timing_frontier,
};
use w2est_bench::table::{Cell, Table};
use w2est_bench::{BenchError, Estimator, Experiment, ExperimentConfig, Law, Result};

#[derive(Parser)]
#[command(name = "w2est", version, about = "Entropic estimators of the squared Wasserstein distance")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate W₂² between two point files.
    Estimate(EstimateArgs),
    /// Run a benchmark experiment.
    #[command(subcommand)]
    Bench(BenchCommand),
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Error against the sample size (several λ: optimal-λ curve).
    SampleComplexity(BenchArgs),
    /// Error against λ at a fixed sample size.
    LambdaSweep(BenchArgs),
    /// Discretized densities on the circle.
    Grid(BenchArgs),
    /// Closed-form Gaussian checks.
    Gaussian(BenchArgs),
    /// Best solver time per target potential error.
    Timing(BenchArgs),
}

#[derive(Args, Clone)]
struct SolverArgs {
    #[arg(long, default_value_t = 1e-5)]
    marginal_tol: f64,
    #[arg(long, default_value_t = 10000)]
    max_iters: usize,
    #[arg(long, default_value_t = 5)]
    anderson_depth: usize,
    /// λ of the small-λ plug-in proxy.
    #[arg(long, default_value_t = 0.01)]
    plugin_proxy_lambda: f64,
    /// Exact plug-in (optimal assignment) instead of the proxy.
    #[arg(long)]
    plugin_exact: bool,
}

#[derive(Args)]
struct EstimateArgs {
    /// Points of the first measure: one per line, optional weight as last column.
    first: PathBuf,
    /// Points of the second measure.
    second: PathBuf,
    /// Read the files with a trailing weight column.
    #[arg(long)]
    weighted: bool,
    /// Points live on the unit flat torus.
    #[arg(long)]
    torus: bool,
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,
    #[arg(long, default_value = "T,S,R")]
    estimators: String,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    dim: Option<usize>,
    /// Single sample size (shorthand for a one-element --n-list).
    #[arg(long, conflicts_with = "n_list")]
    n: Option<usize>,
    #[arg(long)]
    n_list: Option<String>,
    #[arg(long)]
    h_list: Option<String>,
    /// Single λ (shorthand for a one-element --lambda-list).
    #[arg(long, conflicts_with = "lambda_list")]
    lambda: Option<f64>,
    #[arg(long)]
    lambda_list: Option<String>,
    #[arg(long)]
    estimators: Option<String>,
    #[arg(long, default_value_t = 30)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2.0)]
    beta: f64,
    #[arg(long, default_value_t = 0.3333333333)]
    aspect: f64,
    #[command(flatten)]
    solver: SolverArgs,
    /// Sampling family: elliptic or gaussian.
    #[arg(long, default_value = "elliptic")]
    law: String,
    /// Both samples come from the same law.
    #[arg(long)]
    same_distribution: bool,
    /// Both measures are the same sample.
    #[arg(long)]
    identical_samples: bool,
    /// Held-out points for potential errors.
    #[arg(long, default_value_t = 2000)]
    eval_points: usize,
    /// Target potential errors of the timing frontier.
    #[arg(long)]
    targets: Option<String>,
    /// Report errors on W₂ rather than W₂².
    #[arg(long)]
    sqrt: bool,
    /// Output stem; one file per estimator, e.g. out.csv → out_S.csv.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn solver_config(args: &SolverArgs, lambda: f64) -> SolverConfig {
    SolverConfig::new(lambda)
        .with_tolerance(args.marginal_tol)
        .with_max_iters(args.max_iters)
        .with_anderson(args.anderson_depth)
}

fn bench_config(experiment: Experiment, a: BenchArgs) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::new(experiment);
    match experiment {
        Experiment::GridStudy => {
            cfg.d = 1;
            cfg.lambda_list = vec![0.01, 0.02, 0.05, 0.1, 0.2];
            cfg.estimators = Estimator::ALL.to_vec();
            cfg.plugin_exact = true;
        }
        Experiment::LambdaSweep => {
            cfg.n_list = vec![10000];
            cfg.lambda_list = vec![0.01, 0.0316, 0.1, 0.316, 1.0];
        }
        Experiment::GaussianValidation => {
            cfg.d = 2;
            cfg.n_list = vec![4000];
            cfg.lambda_list = vec![0.5];
            cfg.estimators = vec![Estimator::S];
        }
        Experiment::TimingFrontier => {
            // 9 log-spaced n in [10, 10⁴] and 8 log-spaced λ in [0.1, 1]
            cfg.n_list = vec![10, 24, 56, 133, 316, 750, 1778, 4217, 10000];
            cfg.lambda_list = (0..8).map(|k| 0.1 * 10f64.powf(k as f64 / 7.0)).collect();
        }
        _ => {}
    }
    if let Some(d) = a.dim {
        cfg.d = d;
    }
    if let Some(n) = a.n {
        cfg.n_list = vec![n];
    }
    if let Some(s) = &a.n_list {
        cfg.n_list = parse_list(s)?;
    }
    if let Some(s) = &a.h_list {
        cfg.h_list = parse_list(s)?;
    }
    if let Some(l) = a.lambda {
        cfg.lambda_list = vec![l];
    }
    if let Some(s) = &a.lambda_list {
        cfg.lambda_list = parse_list(s)?;
    }
    if let Some(s) = &a.estimators {
        cfg.estimators = parse_estimators(s)?;
    }
    if let Some(s) = &a.targets {
        cfg.targets = parse_list(s)?;
    }
    if experiment == Experiment::SampleComplexity && cfg.lambda_list.len() > 1 {
        cfg.experiment = Experiment::OptimalLambdaCurve;
    }
    cfg.trials = a.trials;
    cfg.seed = a.seed;
    cfg.beta = a.beta;
    cfg.aspect = a.aspect;
    cfg.solver = solver_config(&a.solver, cfg.lambda_list.first().copied().unwrap_or(1.0));
    cfg.plugin_proxy_lambda = a.solver.plugin_proxy_lambda;
    cfg.plugin_exact = cfg.plugin_exact || a.solver.plugin_exact;
    cfg.law = a.law.parse::<Law>()?;
    cfg.same_distribution = a.same_distribution;
    cfg.identical_samples = a.identical_samples;
    cfg.eval_points = a.eval_points;
    cfg.sqrt_readout = a.sqrt;
    cfg.output_path = a.output;
    cfg.validate()?;
    Ok(cfg)
}

/// Whitespace-separated points, one per line; `#` starts a comment.
fn read_points(path: &Path, weighted: bool, geometry: Geometry) -> Result<DiscreteMeasure> {
    let text = std::fs::read_to_string(path).map_err(|source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let parse_err = |line: usize, message: String| BenchError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut points = Vec::new();
    let mut weights = Vec::new();
    let mut dim = None;
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut values = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| parse_err(k + 1, format!("not a number: `{t}`"))))
            .collect::<Result<Vec<f64>>>()?;
        if weighted {
            weights.push(values.pop().ok_or_else(|| parse_err(k + 1, "missing weight".into()))?);
        }
        match dim {
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(parse_err(k + 1, format!("expected {d} coordinates, found {}", values.len())))
            }
            _ => {}
        }
        points.extend(values);
    }
    let dim = dim.ok_or_else(|| parse_err(0, "no points".into()))?;
    if dim == 0 {
        return Err(parse_err(0, "points have no coordinates".into()));
    }
    let weights = weighted.then_some(weights);
    DiscreteMeasure::from_flat(points, dim, weights, geometry).map_err(|e| parse_err(0, e.to_string()))
}

fn estimate(a: EstimateArgs) -> Result<ExitCode> {
    let geometry = if a.torus { Geometry::Torus } else { Geometry::Euclidean };
    let mu = read_points(&a.first, a.weighted, geometry)?;
    let nu = read_points(&a.second, a.weighted, geometry)?;
    let estimators = parse_estimators(&a.estimators)?;
    if estimators.is_empty() {
        return Err(BenchError::Config("no estimator selected".into()));
    }
    let cfg = solver_config(&a.solver, a.lambda);
    cfg.validate().map_err(|e| BenchError::Config(e.to_string()))?;
    let opts = DivergenceOptions::default();

    let mut table = Table {
        header: ["estimator", "value", "blur", "iterations", "converged", "seconds"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        ..Table::default()
    };
    table.comment("estimator codes: 0=T 1=S 2=R 3=plugin");
    for (code, &e) in Estimator::ALL.iter().enumerate() {
        if !estimators.contains(&e) {
            continue;
        }
        let report: EstimateReport = match e {
            Estimator::T => entropic_cost(&mu, &nu, &cfg)?,
            Estimator::S => sinkhorn_divergence(&mu, &nu, &cfg, opts)?,
            Estimator::R => richardson(&mu, &nu, &cfg, opts)?,
            Estimator::Plugin => {
                let mode = if a.solver.plugin_exact {
                    PluginMode::ExactAssignment
                } else {
                    PluginMode::SmallLambda
                };
                plugin_w2sq(&mu, &nu, &cfg.with_lambda(a.solver.plugin_proxy_lambda), mode)?
            }
        };
        println!(
            "{:<7} {:.12e}  lambda={} iterations={} converged={} seconds={:.3}",
            e.name(),
            report.value,
            report.lambda,
            report.iterations_total,
            report.converged,
            report.wall_time.as_secs_f64()
        );
        table.rows.push(vec![
            Cell::Int(code as u64),
            Cell::Float(report.value),
            Cell::Float(report.lambda),
            Cell::Int(report.iterations_total as u64),
            Cell::Int(report.converged as u64),
            Cell::Float(report.wall_time.as_secs_f64()),
        ]);
    }
    if let Some(path) = &a.output {
        table.write(path)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn emit(cfg: &ExperimentConfig, tables: &[(Estimator, Table)]) {
    for (e, t) in tables {
        match &cfg.output_path {
            Some(base) => println!("wrote {}", output_for(base, *e).display()),
            None => print!("## {e}\n{}", t.render()),
        }
    }
}

fn bench(command: BenchCommand) -> Result<ExitCode> {
    let (experiment, args) = match command {
        BenchCommand::SampleComplexity(a) => (Experiment::SampleComplexity, a),
        BenchCommand::LambdaSweep(a) => (Experiment::LambdaSweep, a),
        BenchCommand::Grid(a) => (Experiment::GridStudy, a),
        BenchCommand::Gaussian(a) => (Experiment::GaussianValidation, a),
        BenchCommand::Timing(a) => (Experiment::TimingFrontier, a),
    };
    let cfg = bench_config(experiment, args)?;
    match cfg.experiment {
        Experiment::SampleComplexity | Experiment::OptimalLambdaCurve => {
            emit(&cfg, &run_sample_complexity(&cfg)?.tables);
        }
        Experiment::LambdaSweep => {
            let r = run_lambda_sweep(&cfg)?;
            emit(&cfg, &r.tables);
            for s in &r.lambda_star {
                println!("lambda_star {} cost={} potentials={}", s.estimator, s.by_cost, s.by_potentials);
            }
        }
        Experiment::GridStudy => emit(&cfg, &run_grid_study(&cfg)?.tables),
        Experiment::GaussianValidation => {
            let r = run_gaussian_validation(&cfg)?;
            emit(&cfg, &r.tables);
            println!("fisher_max_residual {:e}", r.fisher_max_residual);
            println!("c2 closed={:e} fit={:e} relative_error={:e}", r.c2_closed, r.c2_fit, r.c2_relative_error);
            for c in &r.comparisons {
                println!(
                    "{} n={} lambda={} closed_form={:.6e} mean={:.6e} se={:.3e} z={:.2}",
                    c.estimator,
                    c.n,
                    c.lambda,
                    c.closed_form,
                    c.mean,
                    c.std_error,
                    c.z_score()
                );
            }
        }
        Experiment::TimingFrontier => {
            let r = run_timing_frontier(&cfg)?;
            emit(&cfg, &r.tables);
            if r.unreachable() > 0 {
                eprintln!("{} target(s) not reached within the grid", r.unreachable());
                return Ok(ExitCode::from(3));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Estimate(a) => estimate(a),
        Command::Bench(b) => bench(b),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
