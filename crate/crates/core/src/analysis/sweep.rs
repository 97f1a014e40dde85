use std::io::Write;
use std::time::Instant;

use super::cases::ManufacturedCase;
use super::norms::{error_norms, lemma_norm_check, ErrorNorms, LemmaCheck};
use crate::assembly::{assemble_with, AssemblyOptions, GuardrailWarning, Guardrails};
use crate::error::{PimError, Result};
use crate::interpolate::Interpolant;
use crate::kernel::{Kernel, Profile};
use crate::pointcloud::io::fmt_real;
use crate::pointcloud::{generate, PointCloud};
use crate::solve::{solve, SolveOptions};

pub const SWEEP_CSV_HEADER: &str =
    "level,n,h,t,beta,l2_error,h1_error,boundary_l2_error,residual,wall_time_s";

/// `t = c_t h^γ`, `β = c_β √t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coupling {
    pub c_t: f64,
    pub gamma_t: f64,
    pub c_beta: f64,
}

impl Default for Coupling {
    fn default() -> Self {
        Self {
            c_t: 0.02,
            gamma_t: 4.0 / 7.0,
            c_beta: 1.0,
        }
    }
}

impl Coupling {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_t > 0.0 && self.c_t.is_finite()) || !(self.c_beta > 0.0 && self.c_beta.is_finite()) {
            return Err(PimError::InvalidParameter(format!(
                "coupling constants must be positive, got c_t = {}, c_beta = {}",
                self.c_t, self.c_beta
            )));
        }
        if !(self.gamma_t > 0.0 && self.gamma_t < 2.0 / 3.0) {
            return Err(PimError::InvalidParameter(format!(
                "coupling exponent gamma_t = {} must lie in (0, 2/3): otherwise h/t^(3/2) does not vanish as h -> 0",
                self.gamma_t
            )));
        }
        Ok(())
    }

    /// `(t, β)` for fill distance `h`.
    pub fn params(&self, h: f64) -> (f64, f64) {
        let t = self.c_t * h.powf(self.gamma_t);
        (t, self.c_beta * t.sqrt())
    }
}

/// How `(t, β)` are chosen at each level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParameterRule {
    Coupled(Coupling),
    /// Same `t`, `β` at every level; isolates the `h` dependence.
    Fixed { t: f64, beta: f64 },
}

impl ParameterRule {
    pub fn validate(&self) -> Result<()> {
        match self {
            ParameterRule::Coupled(c) => c.validate(),
            ParameterRule::Fixed { t, beta } => {
                if !(*t > 0.0 && t.is_finite() && *beta > 0.0 && beta.is_finite()) {
                    return Err(PimError::InvalidParameter(format!(
                        "fixed parameters must be positive, got t = {t}, beta = {beta}"
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn params(&self, h: f64) -> (f64, f64) {
        match *self {
            ParameterRule::Coupled(c) => c.params(h),
            ParameterRule::Fixed { t, beta } => (t, beta),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    /// Cloud resolutions, coarse to fine.
    pub levels: Vec<usize>,
    pub rule: ParameterRule,
    pub profile: Profile,
    pub solver: SolveOptions,
    pub assembly: AssemblyOptions,
    /// Reference cloud resolution as a multiple of the solve resolution.
    pub reference_factor: usize,
    pub jitter: f64,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            levels: vec![101, 201, 401, 801],
            rule: ParameterRule::Coupled(Coupling::default()),
            profile: Profile::Cubic,
            solver: SolveOptions::default(),
            assembly: AssemblyOptions::default(),
            reference_factor: 4,
            jitter: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub level: usize,
    pub n: usize,
    pub h: f64,
    pub t: f64,
    pub beta: f64,
    pub norms: ErrorNorms,
    pub residual: f64,
    pub wall_time_s: f64,
    pub lemma: LemmaCheck,
    pub warnings: Vec<GuardrailWarning>,
}

impl SweepRow {
    pub fn flagged(&self) -> bool {
        !self.warnings.is_empty()
    }
}

#[derive(Debug, Clone, Default)]
pub struct SweepResult {
    pub case: String,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "{SWEEP_CSV_HEADER}")?;
        for r in &self.rows {
            let reals = [
                r.h,
                r.t,
                r.beta,
                r.norms.l2,
                r.norms.h1,
                r.norms.boundary_l2,
                r.residual,
                r.wall_time_s,
            ];
            let reals: Vec<String> = reals.iter().map(|&v| fmt_real(v)).collect();
            writeln!(w, "{},{},{}", r.level, r.n, reals.join(","))?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }

    /// Observed H¹ rates `log(e_k/e_{k+1}) / log(h_k/h_{k+1})`; empty for a
    /// single level.
    pub fn h1_rates(&self) -> Vec<f64> {
        self.rows
            .windows(2)
            .map(|w| (w[0].norms.h1 / w[1].norms.h1).ln() / (w[0].h / w[1].h).ln())
            .collect()
    }
}

/// Failure at some level; rows for the completed levels are kept.
#[derive(Debug)]
pub struct SweepError {
    pub partial: SweepResult,
    pub level: usize,
    pub source: PimError,
}

impl std::fmt::Display for SweepError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "sweep stopped at level {} after {} completed levels: {}",
            self.level,
            self.partial.rows.len(),
            self.source
        )
    }
}

impl std::error::Error for SweepError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

/// Result of solving one case on one cloud.
pub struct LevelOutcome {
    pub solution: Vec<f64>,
    pub norms: ErrorNorms,
    pub residual: f64,
    pub lemma: LemmaCheck,
    pub warnings: Vec<GuardrailWarning>,
}

/// Assemble, solve, interpolate and measure one configuration.
pub fn solve_case(
    case: &ManufacturedCase,
    cloud: &PointCloud,
    reference: &PointCloud,
    t: f64,
    beta: f64,
    profile: &Profile,
    solver: &SolveOptions,
    assembly: &AssemblyOptions,
) -> Result<LevelOutcome> {
    let kernel = Kernel::new(t, cloud.intrinsic_dim(), profile.clone())?;
    let (f, b) = case.sample(cloud);
    let system = assemble_with(cloud, &kernel, beta, &f, &b, assembly)?;
    let warnings = system.meta().warnings.clone();
    let report = solve(&system, solver)?;
    let interp = Interpolant::new(cloud, &kernel, beta, report.solution, f, b)?;
    let norms = error_norms(&interp, case, reference)?;
    let lemma = lemma_norm_check(&interp, reference)?;
    Ok(LevelOutcome {
        solution: interp.solution().to_vec(),
        norms,
        residual: report.residual_norm,
        lemma,
        warnings,
    })
}

fn reference_cloud(case: &ManufacturedCase, n: usize, factor: usize) -> Result<PointCloud> {
    generate(&case.spec(n * factor.max(1)))
}

pub fn convergence_sweep(
    case: &ManufacturedCase,
    config: &SweepConfig,
) -> std::result::Result<SweepResult, SweepError> {
    let mut result = SweepResult {
        case: case.name().to_string(),
        rows: Vec::new(),
    };
    let fail = |result: SweepResult, level: usize, source: PimError| SweepError {
        partial: result,
        level,
        source,
    };
    if let Err(e) = config.rule.validate() {
        return Err(fail(result, 0, e));
    }
    if config.levels.is_empty() {
        return Err(fail(
            result,
            0,
            PimError::InvalidParameter("a sweep needs at least one level".into()),
        ));
    }
    for (level, &res) in config.levels.iter().enumerate() {
        let start = Instant::now();
        let outcome = (|| {
            let spec = case.spec(res).with_jitter(config.jitter, config.seed);
            let cloud = generate(&spec)?;
            let h = cloud.h()?;
            let (t, beta) = config.rule.params(h);
            let reference = reference_cloud(case, res, config.reference_factor)?;
            let out = solve_case(
                case,
                &cloud,
                &reference,
                t,
                beta,
                &config.profile,
                &config.solver,
                &config.assembly,
            )?;
            Ok::<_, PimError>((cloud.len(), h, t, beta, out))
        })();
        match outcome {
            Ok((n, h, t, beta, out)) => result.rows.push(SweepRow {
                level,
                n,
                h,
                t,
                beta,
                norms: out.norms,
                residual: out.residual,
                wall_time_s: start.elapsed().as_secs_f64(),
                lemma: out.lemma,
                warnings: out.warnings,
            }),
            Err(e) => return Err(fail(result, level, e)),
        }
    }
    Ok(result)
}

#[derive(Debug, Clone)]
pub struct RobinRow {
    pub beta: f64,
    pub norms: ErrorNorms,
    pub residual: f64,
    pub warnings: Vec<GuardrailWarning>,
}

impl RobinRow {
    pub fn flagged(&self) -> bool {
        !self.warnings.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct RobinGapTable {
    pub t: f64,
    pub n: usize,
    pub h: f64,
    pub rows: Vec<RobinRow>,
}

impl RobinGapTable {
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "beta,l2_error,h1_error,boundary_l2_error,residual,flagged")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                fmt_real(r.beta),
                fmt_real(r.norms.l2),
                fmt_real(r.norms.h1),
                fmt_real(r.norms.boundary_l2),
                fmt_real(r.residual),
                u8::from(r.flagged())
            )?;
        }
        Ok(())
    }
}

/// Fixed `t` and cloud, decreasing `β`: tracks how far the penalized
/// solution sits from the Dirichlet data. Guardrail violations are
/// recorded on the row, not treated as errors.
pub fn robin_gap_study(
    case: &ManufacturedCase,
    t: f64,
    resolution: usize,
    betas: &[f64],
    config: &SweepConfig,
) -> Result<RobinGapTable> {
    if betas.is_empty() {
        return Err(PimError::InvalidParameter("beta sequence is empty".into()));
    }
    if betas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(PimError::InvalidParameter(format!(
            "beta sequence must be strictly decreasing, got {betas:?}"
        )));
    }
    let cloud = generate(&case.spec(resolution).with_jitter(config.jitter, config.seed))?;
    let h = cloud.h()?;
    let reference = reference_cloud(case, resolution, config.reference_factor)?;
    let mut rows = Vec::with_capacity(betas.len());
    for &beta in betas {
        let out = solve_case(
            case,
            &cloud,
            &reference,
            t,
            beta,
            &config.profile,
            &config.solver,
            &config.assembly,
        )?;
        rows.push(RobinRow {
            beta,
            norms: out.norms,
            residual: out.residual,
            warnings: out.warnings,
        });
    }
    Ok(RobinGapTable {
        t,
        n: cloud.len(),
        h,
        rows,
    })
}

/// Guardrail check without assembling anything.
pub fn guardrail_flags(guardrails: &Guardrails, t: f64, beta: f64, h: f64) -> Vec<GuardrailWarning> {
    guardrails.check(t, beta, Some(h))
}
