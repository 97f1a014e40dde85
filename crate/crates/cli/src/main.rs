mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};

use commands::CliError;
use config::{Config, ConfigError};

/// Point integral method solver for the Poisson equation with Dirichlet
/// data on point clouds.
#[derive(Parser, Debug)]
#[command(name = "pim", version)]
struct Cli {
    /// Flat `key = value` configuration file. Flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override any config key, e.g. `--set solver.tol=1e-12`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Seed for randomized point placement.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a built-in manifold and write the point cloud CSV.
    Generate {
        #[command(flatten)]
        manifold: ManifoldArgs,
        /// Output CSV path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Assemble and solve one problem; write the solution and a run report.
    Solve {
        /// Point cloud CSV. Without it a cloud is generated from the manifold keys.
        #[arg(long)]
        cloud: Option<PathBuf>,
        /// Built-in manufactured case: interval, disk, rectangle, cap.
        #[arg(long)]
        case: Option<String>,
        /// Source samples, one column headed `f`.
        #[arg(long)]
        source: Option<PathBuf>,
        /// Boundary data at the boundary points, one column headed `b`.
        #[arg(long)]
        boundary: Option<PathBuf>,
        #[command(flatten)]
        manifold: ManifoldArgs,
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        solver: SolverArgs,
        /// Solution CSV path.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run report path (default: next to the solution).
        #[arg(long)]
        report: Option<PathBuf>,
        /// Points (CSV headed x1,...,xd) at which to evaluate the interpolant.
        #[arg(long = "eval")]
        eval_points: Option<PathBuf>,
        /// Output for --eval.
        #[arg(long = "eval-out")]
        eval_out: Option<PathBuf>,
    },
    /// Refinement study of a built-in case; writes one CSV row per level.
    Sweep {
        #[arg(long)]
        case: Option<String>,
        /// Comma-separated resolutions, coarse to fine.
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<usize>>,
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        jitter: Option<f64>,
        /// Reference cloud resolution relative to each level.
        #[arg(long = "reference-factor")]
        reference_factor: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the discretization against independent oracles.
    OracleCheck,
}

#[derive(Args, Debug, Default)]
struct ManifoldArgs {
    /// interval, rectangle, disk or cap.
    #[arg(long)]
    shape: Option<String>,
    /// Interval start.
    #[arg(long)]
    a: Option<f64>,
    /// Interval end.
    #[arg(long)]
    b: Option<f64>,
    /// Rectangle widths `w0,w1`.
    #[arg(long)]
    widths: Option<String>,
    /// Cap height: points with z >= z0.
    #[arg(long)]
    z0: Option<f64>,
    /// Target number of points.
    #[arg(long)]
    n: Option<usize>,
    /// Random placement amplitude in [0, 1).
    #[arg(long)]
    jitter: Option<f64>,
}

#[derive(Args, Debug, Default)]
struct ParamArgs {
    /// Kernel bandwidth.
    #[arg(long)]
    t: Option<f64>,
    /// Robin penalty parameter.
    #[arg(long)]
    beta: Option<f64>,
    /// t = c_t h^gamma_t.
    #[arg(long = "c-t")]
    c_t: Option<f64>,
    #[arg(long = "gamma-t")]
    gamma_t: Option<f64>,
    /// beta = c_beta sqrt(t).
    #[arg(long = "c-beta")]
    c_beta: Option<f64>,
    /// cubic or truncated_gaussian.
    #[arg(long)]
    profile: Option<String>,
}

#[derive(Args, Debug, Default)]
struct SolverArgs {
    /// auto, dense-lu or iterative.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    tol: Option<f64>,
}

fn put<T: ToString>(cfg: &mut Config, key: &str, value: &Option<T>) -> Result<(), ConfigError> {
    match value {
        Some(v) => cfg.set(key, v.to_string()),
        None => Ok(()),
    }
}

impl ManifoldArgs {
    fn apply(&self, cfg: &mut Config) -> Result<(), ConfigError> {
        put(cfg, "manifold.shape", &self.shape)?;
        put(cfg, "manifold.a", &self.a)?;
        put(cfg, "manifold.b", &self.b)?;
        put(cfg, "manifold.widths", &self.widths)?;
        put(cfg, "manifold.z0", &self.z0)?;
        put(cfg, "manifold.n", &self.n)?;
        put(cfg, "manifold.jitter", &self.jitter)
    }
}

impl ParamArgs {
    fn apply(&self, cfg: &mut Config) -> Result<(), ConfigError> {
        put(cfg, "kernel.t", &self.t)?;
        put(cfg, "penalty.beta", &self.beta)?;
        put(cfg, "coupling.c_t", &self.c_t)?;
        put(cfg, "coupling.gamma_t", &self.gamma_t)?;
        put(cfg, "coupling.c_beta", &self.c_beta)?;
        put(cfg, "kernel.profile", &self.profile)
    }
}

impl SolverArgs {
    fn apply(&self, cfg: &mut Config) -> Result<(), ConfigError> {
        put(cfg, "solver.method", &self.method)?;
        put(cfg, "solver.tol", &self.tol)
    }
}

fn path_str(p: &Option<PathBuf>) -> Option<String> {
    p.as_ref().map(|p| p.display().to_string())
}

/// Layers defaults < config file < `--set` < flags.
fn build_config(cli: &Cli) -> Result<Config, ConfigError> {
    let mut cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    for pair in &cli.set {
        cfg.set_pair(pair)?;
    }
    put(&mut cfg, "seed", &cli.seed)?;
    match &cli.command {
        Command::Generate { manifold, out } => {
            manifold.apply(&mut cfg)?;
            put(&mut cfg, "out", &path_str(out))?;
        }
        Command::Solve {
            cloud,
            case,
            source,
            boundary,
            manifold,
            params,
            solver,
            out,
            report,
            eval_points,
            eval_out,
        } => {
            put(&mut cfg, "cloud", &path_str(cloud))?;
            put(&mut cfg, "case", case)?;
            put(&mut cfg, "source", &path_str(source))?;
            put(&mut cfg, "boundary", &path_str(boundary))?;
            manifold.apply(&mut cfg)?;
            params.apply(&mut cfg)?;
            solver.apply(&mut cfg)?;
            put(&mut cfg, "out", &path_str(out))?;
            put(&mut cfg, "report", &path_str(report))?;
            put(&mut cfg, "eval.points", &path_str(eval_points))?;
            put(&mut cfg, "eval.out", &path_str(eval_out))?;
        }
        Command::Sweep {
            case,
            levels,
            params,
            solver,
            jitter,
            reference_factor,
            out,
        } => {
            put(&mut cfg, "case", case)?;
            let levels = levels
                .as_ref()
                .map(|l| l.iter().map(usize::to_string).collect::<Vec<_>>().join(","));
            put(&mut cfg, "levels", &levels)?;
            params.apply(&mut cfg)?;
            solver.apply(&mut cfg)?;
            put(&mut cfg, "manifold.jitter", jitter)?;
            put(&mut cfg, "reference_factor", reference_factor)?;
            put(&mut cfg, "out", &path_str(out))?;
        }
        Command::OracleCheck => {}
    }
    Ok(cfg)
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("PIM_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage {
            command: None,
            msg: format!("PIM_THREADS must be a positive integer, got '{value}'"),
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Failed(e.to_string()))
}

fn run(cli: &Cli) -> Result<(), CliError> {
    configure_threads()?;
    let cfg = build_config(cli)?;
    match &cli.command {
        Command::Generate { .. } => commands::generate(&cfg),
        Command::Solve { .. } => commands::solve(&cfg),
        Command::Sweep { .. } => commands::sweep(&cfg),
        Command::OracleCheck => commands::oracle_check(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            match &err {
                CliError::Usage { command: Some(name), msg } => {
                    let mut root = Cli::command();
                    root.build();
                    let usage = root
                        .find_subcommand_mut(name)
                        .map(|c| c.render_usage().to_string())
                        .unwrap_or_default();
                    eprintln!("error: {msg}\n\n{usage}\n\nFor more information, try 'pim {name} --help'.");
                }
                other => eprintln!("error: {other}"),
            }
            ExitCode::from(err.exit_code())
        }
    }
}
