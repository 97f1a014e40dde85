use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use pim_core::analysis::{
    convergence_sweep, error_norms, Coupling, ParameterRule, SweepConfig, SweepError,
};
use pim_core::assembly::{assemble_with, AssemblyOptions, Guardrails};
use pim_core::diagnostics::{render_table, run_oracle_checks};
use pim_core::prelude::{
    Interpolant, Kernel, ManifoldSpec, ManufacturedCase, PimError, PointCloud, Profile, Shape,
    SolveMethod, SolveOptions,
};
use thiserror::Error;

use crate::config::{Config, ConfigError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{msg}")]
    Usage {
        command: Option<&'static str>,
        msg: String,
    },
    #[error(transparent)]
    Core(#[from] PimError),
    #[error(transparent)]
    Sweep(#[from] SweepError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    /// 2 for bad input (usage, config, files, parameters), 1 for failures
    /// while computing or writing results.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Usage { .. } => 2,
            CliError::Core(e) => match e {
                PimError::SingularMatrix { .. }
                | PimError::NoConvergence { .. }
                | PimError::OutOfSupport { .. }
                | PimError::Io(_) => 1,
                _ => 2,
            },
            CliError::Sweep(_) | CliError::Io { .. } | CliError::Failed(_) => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

fn required_path(cfg: &Config, key: &'static str, command: &'static str) -> Result<PathBuf, CliError> {
    cfg.get_str(key).map(PathBuf::from).ok_or_else(|| CliError::Usage {
        command: Some(command),
        msg: format!("missing required --{key}"),
    })
}

fn manifold_spec(cfg: &Config, shape_name: &str) -> Result<ManifoldSpec, CliError> {
    let shape = match shape_name {
        "interval" => Shape::Interval {
            a: cfg.get_or("manifold.a", "real", 0.0)?,
            b: cfg.get_or("manifold.b", "real", 1.0)?,
        },
        "rectangle" => {
            let widths = cfg
                .get_list::<f64>("manifold.widths", "two comma-separated reals")?
                .unwrap_or_else(|| vec![1.0, 1.0]);
            let [w0, w1] = widths[..] else {
                return Err(ConfigError::BadValue {
                    key: "manifold.widths".into(),
                    value: cfg.get_str("manifold.widths").unwrap_or("").into(),
                    expected: "two comma-separated reals",
                }
                .into());
            };
            Shape::Rectangle { widths: [w0, w1] }
        }
        "disk" => Shape::UnitDisk,
        "cap" | "spherical-cap" | "hemisphere" => Shape::SphericalCap {
            z0: cfg.get_or("manifold.z0", "real", 0.0)?,
        },
        other => {
            return Err(ConfigError::BadValue {
                key: "manifold.shape".into(),
                value: other.into(),
                expected: "interval, rectangle, disk or cap",
            }
            .into())
        }
    };
    let n: usize = cfg.require("manifold.n", "positive integer")?;
    Ok(ManifoldSpec::new(shape, n).with_jitter(
        cfg.get_or("manifold.jitter", "real in [0, 1)", 0.0)?,
        cfg.get_or("seed", "unsigned integer", 0)?,
    ))
}

fn profile(cfg: &Config) -> Result<Profile, CliError> {
    Ok(Profile::from_name(cfg.get_str("kernel.profile").unwrap_or("cubic"))?)
}

fn solve_options(cfg: &Config) -> Result<SolveOptions, CliError> {
    let d = SolveOptions::default();
    Ok(SolveOptions {
        method: SolveMethod::from_name(cfg.get_str("solver.method").unwrap_or("auto"))?,
        tol: cfg.get_or("solver.tol", "positive real", d.tol)?,
        max_iter_factor: cfg.get_or("solver.max_iter_factor", "positive integer", d.max_iter_factor)?,
        restart: cfg.get_or("solver.restart", "positive integer", d.restart)?,
    })
}

fn assembly_options(cfg: &Config) -> Result<AssemblyOptions, CliError> {
    let d = AssemblyOptions::default();
    let g = Guardrails::default();
    Ok(AssemblyOptions {
        dense_threshold: cfg.get_or("solver.dense_threshold", "integer", d.dense_threshold)?,
        guardrails: Guardrails {
            max_sqrt_t_over_beta: cfg.get_or("guardrails.max_sqrt_t_over_beta", "real", g.max_sqrt_t_over_beta)?,
            max_h_over_t32: cfg.get_or("guardrails.max_h_over_t32", "real", g.max_h_over_t32)?,
        },
        use_index: true,
    })
}

fn coupling(cfg: &Config) -> Result<Coupling, CliError> {
    let d = Coupling::default();
    let c = Coupling {
        c_t: cfg.get_or("coupling.c_t", "positive real", d.c_t)?,
        gamma_t: cfg.get_or("coupling.gamma_t", "real in (0, 2/3)", d.gamma_t)?,
        c_beta: cfg.get_or("coupling.c_beta", "positive real", d.c_beta)?,
    };
    c.validate()?;
    Ok(c)
}

/// Explicit `(t, β)` or the coupling rule; never both.
fn parameter_rule(cfg: &Config) -> Result<ParameterRule, CliError> {
    let t: Option<f64> = cfg.get("kernel.t", "positive real")?;
    let beta: Option<f64> = cfg.get("penalty.beta", "positive real")?;
    let coupled = ["coupling.c_t", "coupling.gamma_t", "coupling.c_beta"]
        .iter()
        .any(|k| cfg.contains(k));
    match (t, beta) {
        (Some(t), Some(beta)) if !coupled => {
            let rule = ParameterRule::Fixed { t, beta };
            rule.validate()?;
            Ok(rule)
        }
        (Some(_), Some(_)) => Err(ConfigError::Conflict(
            "give either explicit t and beta or coupling constants, not both".into(),
        )
        .into()),
        (None, None) => Ok(ParameterRule::Coupled(coupling(cfg)?)),
        _ => Err(ConfigError::Conflict("t and beta must be given together".into()).into()),
    }
}

fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn generate(cfg: &Config) -> Result<(), CliError> {
    let out = required_path(cfg, "out", "generate")?;
    let shape = cfg.get_str("manifold.shape").ok_or(ConfigError::Missing("manifold.shape"))?;
    let spec = manifold_spec(cfg, shape)?;
    let cloud = generate_cloud(&spec)?;
    pim_core::pointcloud::save(&cloud, &out).map_err(|e| match e {
        PimError::Io(source) => CliError::Io {
            path: out.display().to_string(),
            source,
        },
        other => other.into(),
    })?;
    println!(
        "wrote {} points ({} on the boundary) to {}; fill distance {:.6e}",
        cloud.len(),
        cloud.boundary_len(),
        out.display(),
        cloud.h()?
    );
    Ok(())
}

fn generate_cloud(spec: &ManifoldSpec) -> Result<PointCloud, CliError> {
    Ok(pim_core::pointcloud::generate(spec)?)
}

/// Reads a single-column CSV with the given header.
fn read_column(path: &Path, header: &str) -> Result<Vec<f64>, CliError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(file);
    let parse_err = |line: u64, msg: String| CliError::Core(PimError::Parse { line: line as usize, msg });
    let found = rdr
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if found != header {
        return Err(parse_err(1, format!("{}: expected header '{header}', found '{found}'", path.display())));
    }
    let mut values = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| parse_err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let v = record[0]
            .parse::<f64>()
            .map_err(|_| parse_err(line, format!("{}: cannot parse '{}'", path.display(), &record[0])))?;
        values.push(v);
    }
    Ok(values)
}

pub fn solve(cfg: &Config) -> Result<(), CliError> {
    let out = required_path(cfg, "out", "solve")?;
    let case = cfg.get_str("case").map(ManufacturedCase::from_name).transpose()?;

    let cloud = match cfg.get_str("cloud") {
        Some(path) => {
            let cloud = pim_core::pointcloud::load(path)?;
            match &case {
                Some(c) if c.shape().ambient_dim() == cloud.dim() => cloud.with_shape(c.shape()),
                _ => cloud,
            }
        }
        None => {
            let spec = match (cfg.get_str("manifold.shape"), &case) {
                (Some(shape), _) => manifold_spec(cfg, shape)?,
                (None, Some(c)) => {
                    let base = c.spec(cfg.require("manifold.n", "positive integer")?);
                    base.with_jitter(
                        cfg.get_or("manifold.jitter", "real in [0, 1)", 0.0)?,
                        cfg.get_or("seed", "unsigned integer", 0)?,
                    )
                }
                (None, None) => {
                    return Err(CliError::Usage {
                        command: Some("solve"),
                        msg: "give --cloud, --shape or --case".into(),
                    })
                }
            };
            generate_cloud(&spec)?
        }
    };

    let f = match (cfg.get_str("source"), &case) {
        (Some(path), _) => read_column(Path::new(path), "f")?,
        (None, Some(c)) => c.sample(&cloud).0,
        (None, None) => return Err(ConfigError::Missing("source").into()),
    };
    let b = match (cfg.get_str("boundary"), &case) {
        (Some(path), _) => read_column(Path::new(path), "b")?,
        (None, Some(c)) => c.sample(&cloud).1,
        (None, None) => return Err(ConfigError::Missing("boundary").into()),
    };

    let h = cloud.h()?;
    let (t, beta) = parameter_rule(cfg)?.params(h);
    let kernel = Kernel::new(t, cloud.intrinsic_dim(), profile(cfg)?)?;
    let system = assemble_with(&cloud, &kernel, beta, &f, &b, &assembly_options(cfg)?)?;
    for w in &system.meta().warnings {
        eprintln!("warning: {w}");
    }
    let report = pim_core::solve::solve(&system, &solve_options(cfg)?)?;
    let interp = Interpolant::new(&cloud, &kernel, beta, report.solution.clone(), f, b)?;

    let mut w = create(&out)?;
    let d = cloud.dim();
    let header: Vec<String> = (1..=d).map(|a| format!("x{a}")).collect();
    writeln!(w, "{},u", header.join(",")).map_err(io_err(&out))?;
    for (p, u) in cloud.points().zip(&report.solution) {
        let cols: Vec<String> = p.iter().chain(std::iter::once(u)).map(|&v| fmt_real(v)).collect();
        writeln!(w, "{}", cols.join(",")).map_err(io_err(&out))?;
    }
    w.flush().map_err(io_err(&out))?;

    let mut lines = vec![
        ("n".to_string(), cloud.len().to_string()),
        ("boundary_points".into(), cloud.boundary_len().to_string()),
        ("h".into(), fmt_real(h)),
        ("t".into(), fmt_real(t)),
        ("beta".into(), fmt_real(beta)),
        ("kernel.profile".into(), kernel.profile().name().into()),
        ("sqrt_t_over_beta".into(), fmt_real(t.sqrt() / beta)),
        ("h_over_t32".into(), fmt_real(h / t.powf(1.5))),
        ("storage".into(), format!("{:?}", system.meta().storage).to_lowercase()),
        ("solver.method".into(), report.method.name().into()),
        ("iterations".into(), report.iterations.to_string()),
        ("residual".into(), fmt_real(report.residual_norm)),
        ("guardrail_flags".into(), system.meta().warnings.len().to_string()),
    ];
    for (k, warning) in system.meta().warnings.iter().enumerate() {
        lines.push((format!("guardrail_{k}"), warning.to_string()));
    }
    if let Some(c) = &case {
        let max_err = cloud
            .points()
            .zip(&report.solution)
            .map(|(p, u)| (u - c.exact_u(p)).abs())
            .fold(0.0, f64::max);
        lines.push(("case".into(), c.name().into()));
        lines.push(("max_nodal_error".into(), fmt_real(max_err)));
        let factor: usize = cfg.get_or("reference_factor", "positive integer", 4)?;
        let reference = generate_cloud(&c.spec(cloud.len() * factor.max(1)))?;
        match error_norms(&interp, c, &reference) {
            Ok(norms) => {
                lines.push(("l2_error".into(), fmt_real(norms.l2)));
                lines.push(("h1_error".into(), fmt_real(norms.h1)));
                lines.push(("boundary_l2_error".into(), fmt_real(norms.boundary_l2)));
            }
            Err(e) => eprintln!("warning: error norms unavailable: {e}"),
        }
    }
    let report_path = match cfg.get_str("report") {
        Some(p) => PathBuf::from(p),
        None => out.with_extension("report.txt"),
    };
    let mut rw = create(&report_path)?;
    for (k, v) in &lines {
        writeln!(rw, "{k} = {v}").map_err(io_err(&report_path))?;
    }
    rw.flush().map_err(io_err(&report_path))?;

    if let Some(points) = cfg.get_str("eval.points") {
        let eval_out = required_path(cfg, "eval.out", "solve")?;
        let input = File::open(points).map_err(io_err(Path::new(points)))?;
        let mut ew = create(&eval_out)?;
        interp.eval_csv(input, &mut ew)?;
        ew.flush().map_err(io_err(&eval_out))?;
    }

    println!(
        "solved n = {} with t = {t:.4e}, beta = {beta:.4e}: {} iterations, residual {:.3e}; wrote {}",
        cloud.len(),
        report.iterations,
        report.residual_norm,
        out.display()
    );
    Ok(())
}

pub fn sweep(cfg: &Config) -> Result<(), CliError> {
    let out = required_path(cfg, "out", "sweep")?;
    let case = ManufacturedCase::from_name(cfg.get_str("case").ok_or(ConfigError::Missing("case"))?)?;
    let defaults = SweepConfig::default();
    let config = SweepConfig {
        levels: cfg
            .get_list("levels", "comma-separated integers")?
            .unwrap_or(defaults.levels),
        rule: parameter_rule(cfg)?,
        profile: profile(cfg)?,
        solver: solve_options(cfg)?,
        assembly: assembly_options(cfg)?,
        reference_factor: cfg.get_or("reference_factor", "positive integer", defaults.reference_factor)?,
        jitter: cfg.get_or("manifold.jitter", "real in [0, 1)", 0.0)?,
        seed: cfg.get_or("seed", "unsigned integer", 0)?,
    };
    let (result, failure) = match convergence_sweep(&case, &config) {
        Ok(r) => (r, None),
        Err(e) => (e.partial.clone(), Some(e)),
    };
    let mut w = create(&out)?;
    result.write_csv(&mut w)?;
    w.flush().map_err(io_err(&out))?;
    for row in &result.rows {
        for warning in &row.warnings {
            eprintln!("warning: level {}: {warning}", row.level);
        }
    }
    if let Some(e) = failure {
        return Err(e.into());
    }
    println!("wrote {} levels to {}", result.rows.len(), out.display());
    Ok(())
}

pub fn oracle_check(cfg: &Config) -> Result<(), CliError> {
    let seed = cfg.get_or("seed", "unsigned integer", 0)?;
    let checks = run_oracle_checks(seed)?;
    print!("{}", render_table(&checks));
    let failed = checks.iter().filter(|c| !c.passed()).count();
    if failed > 0 {
        return Err(CliError::Failed(format!("{failed} oracle checks failed")));
    }
    Ok(())
}
