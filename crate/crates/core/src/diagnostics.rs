//! Self-checks comparing the production code paths with independent
//! oracles. Used by the `oracle-check` command.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::builtin_cases;
use crate::assembly::{assemble, assemble_with, AssemblyOptions};
use crate::error::Result;
use crate::interpolate::Interpolant;
use crate::kernel::{Kernel, KernelProfile, Profile};
use crate::operators::{oracle_lt, DiscreteOperators};
use crate::pointcloud::{generate, ManifoldSpec, PointCloud};
use crate::solve::{solve, SolveOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct OracleCheck {
    pub name: &'static str,
    /// Observed discrepancy.
    pub value: f64,
    pub tolerance: f64,
}

impl OracleCheck {
    pub fn passed(&self) -> bool {
        self.value <= self.tolerance
    }
}

/// Small clouds of every built-in shape with a matching bandwidth.
fn test_clouds(seed: u64) -> Result<Vec<(PointCloud, Kernel, f64)>> {
    let mut out = Vec::new();
    for case in builtin_cases() {
        let (n, t) = match case.shape().intrinsic_dim() {
            1 => (101, 0.002),
            _ => (400, 0.01),
        };
        let cloud = generate(&case.spec(n).with_jitter(0.2, seed))?;
        let kernel = Kernel::new(t, cloud.intrinsic_dim(), Profile::Cubic)?;
        out.push((cloud, kernel, 0.1));
    }
    Ok(out)
}

fn kernel_tail_derivative() -> f64 {
    let mut worst = 0.0f64;
    for profile in [Profile::Cubic, Profile::truncated_gaussian()] {
        let e = 1e-5;
        for i in 1..100 {
            let s = i as f64 / 100.0;
            let fd = (profile.tail(s + e) - profile.tail(s - e)) / (2.0 * e);
            worst = worst.max((fd + profile.value(s)).abs());
        }
    }
    worst
}

fn kernel_gradient(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = Kernel::new(0.01, 2, Profile::Cubic).expect("valid kernel");
    let e = 1e-6;
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let x = [rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1)];
        let y = [0.0, 0.0];
        let g = k.grad_rt(&x, &y);
        let gb = k.grad_rbar_t(&x, &y);
        for a in 0..2 {
            let (mut xp, mut xm) = (x, x);
            xp[a] += e;
            xm[a] -= e;
            let fd = (k.rt(&xp, &y) - k.rt(&xm, &y)) / (2.0 * e);
            let fdb = (k.rbar_t(&xp, &y) - k.rbar_t(&xm, &y)) / (2.0 * e);
            worst = worst
                .max((g[a] - fd).abs() / (1.0 + fd.abs()))
                .max((gb[a] - fdb).abs() / (1.0 + fdb.abs()));
        }
    }
    worst
}

fn indexed_vs_brute(clouds: &[(PointCloud, Kernel, f64)]) -> Result<f64> {
    let mut worst = 0.0f64;
    for (cloud, kernel, beta) in clouds {
        let f = vec![1.0; cloud.len()];
        let b = vec![0.5; cloud.boundary_len()];
        let indexed = assemble(cloud, kernel, *beta, &f, &b)?;
        let opts = AssemblyOptions {
            use_index: false,
            ..Default::default()
        };
        let brute = assemble_with(cloud, kernel, *beta, &f, &b, &opts)?;
        let diff = indexed
            .to_dense()
            .iter()
            .zip(brute.to_dense())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        worst = worst.max(diff);
    }
    Ok(worst)
}

fn row_sums(clouds: &[(PointCloud, Kernel, f64)]) -> Result<f64> {
    let mut worst = 0.0f64;
    for (cloud, kernel, beta) in clouds {
        let s = assemble(cloud, kernel, *beta, &vec![0.0; cloud.len()], &vec![0.0; cloud.boundary_len()])?;
        let ones = vec![1.0; cloud.len()];
        let diff = s
            .apply(&ones)
            .iter()
            .zip(s.penalty_row_sums())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        worst = worst.max(diff);
    }
    Ok(worst)
}

/// `(constant reproduction error, interpolation identity error)`.
fn solve_identities(clouds: &[(PointCloud, Kernel, f64)], seed: u64) -> Result<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut constant, mut identity) = (0.0f64, 0.0f64);
    for (cloud, kernel, beta) in clouds {
        let c = 1.7;
        let s = assemble(cloud, kernel, *beta, &vec![0.0; cloud.len()], &vec![c; cloud.boundary_len()])?;
        let u = solve(&s, &SolveOptions::default())?.solution;
        constant = constant.max(u.iter().map(|v| (v - c).abs()).fold(0.0, f64::max));

        let f: Vec<f64> = (0..cloud.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..cloud.boundary_len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let s = assemble(cloud, kernel, *beta, &f, &b)?;
        let u = solve(&s, &SolveOptions::default())?.solution;
        let interp = Interpolant::new(cloud, kernel, *beta, u.clone(), f, b)?;
        for (i, ui) in u.iter().enumerate() {
            let v = interp.eval(cloud.point(i))?;
            identity = identity.max((v - ui).abs() / (1.0 + ui.abs()));
        }
    }
    Ok((constant, identity))
}

/// Most negative normalized weighted form and largest relative gap to the
/// symmetric energy, over random fields.
fn weighted_psd(clouds: &[(PointCloud, Kernel, f64)], seed: u64) -> Result<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut negativity, mut gap) = (0.0f64, 0.0f64);
    for (cloud, kernel, _) in clouds {
        let ops = DiscreteOperators::new(cloud, kernel);
        for _ in 0..20 {
            let u: Vec<f64> = (0..cloud.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm2: f64 = u.iter().map(|v| v * v).sum();
            let form = ops.weighted_form(&u)?;
            let energy = ops.dirichlet_energy(&u)?;
            negativity = negativity.max(-form / norm2);
            gap = gap.max((form - energy).abs() / energy.abs().max(f64::MIN_POSITIVE));
        }
    }
    Ok((negativity, gap))
}

/// Relative gap between the discrete operator on a moderate cloud and the
/// quadrature oracle on a much finer one, at an interior point.
fn operator_consistency() -> Result<f64> {
    let k = Kernel::new(0.002, 1, Profile::Cubic)?;
    let u = |x: &[f64]| (3.0 * x[0]).sin();
    let coarse = generate(&ManifoldSpec::interval(0.0, 1.0, 801))?;
    let fine = generate(&ManifoldSpec::interval(0.0, 1.0, 16001))?;
    let ops = DiscreteOperators::new(&coarse, &k);
    let field: Vec<f64> = coarse.points().map(u).collect();
    let i = 400;
    let disc = ops.lth(&field, i);
    let orac = oracle_lt(u, coarse.point(i), &fine, &k);
    Ok((disc - orac).abs() / orac.abs())
}

fn source_consistency() -> f64 {
    builtin_cases()
        .iter()
        .map(|c| c.source_consistency(100, 3))
        .fold(0.0, f64::max)
}

pub fn run_oracle_checks(seed: u64) -> Result<Vec<OracleCheck>> {
    let clouds = test_clouds(seed)?;
    let (constant, identity) = solve_identities(&clouds, seed)?;
    let (negativity, gap) = weighted_psd(&clouds, seed)?;
    Ok(vec![
        OracleCheck {
            name: "kernel tail derivative equals -R",
            value: kernel_tail_derivative(),
            tolerance: 1e-6,
        },
        OracleCheck {
            name: "kernel gradients vs finite differences",
            value: kernel_gradient(seed),
            tolerance: 1e-5,
        },
        OracleCheck {
            name: "indexed vs all-pairs assembly",
            value: indexed_vs_brute(&clouds)?,
            tolerance: 0.0,
        },
        OracleCheck {
            name: "matrix row sums equal boundary columns",
            value: row_sums(&clouds)?,
            tolerance: 0.0,
        },
        OracleCheck {
            name: "constant boundary data reproduced",
            value: constant,
            tolerance: 1e-9,
        },
        OracleCheck {
            name: "interpolant reproduces discrete solution",
            value: identity,
            tolerance: 1e-9,
        },
        OracleCheck {
            name: "weighted form nonnegative",
            value: negativity,
            tolerance: 1e-12,
        },
        OracleCheck {
            name: "weighted form equals symmetric energy",
            value: gap,
            tolerance: 1e-10,
        },
        OracleCheck {
            name: "discrete operator vs fine quadrature",
            value: operator_consistency()?,
            tolerance: 1e-3,
        },
        OracleCheck {
            name: "manufactured sources vs finite differences",
            value: source_consistency(),
            tolerance: 1e-5,
        },
    ])
}

/// Fixed-width text table with one row per check.
pub fn render_table(checks: &[OracleCheck]) -> String {
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(5).max(5);
    let mut out = format!("{:<width$}  {:>12}  {:>9}  result\n", "check", "value", "tolerance");
    for c in checks {
        out.push_str(&format!(
            "{:<width$}  {:>12.3e}  {:>9.1e}  {}\n",
            c.name,
            c.value,
            c.tolerance,
            if c.passed() { "PASS" } else { "FAIL" }
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass() {
        let checks = run_oracle_checks(7).unwrap();
        let table = render_table(&checks);
        for c in &checks {
            assert!(c.passed(), "{table}");
        }
        assert_eq!(table.lines().count(), checks.len() + 1);
    }
}
