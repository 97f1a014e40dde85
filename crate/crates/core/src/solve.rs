//! Linear solvers for the assembled system: dense LU with partial pivoting
//! for small problems, restarted GMRES with Jacobi (diagonal) right
//! preconditioning otherwise. The matrix is nonsymmetric because the
//! penalty block only has boundary columns.

use crate::assembly::{LinearSystem, Storage};
use crate::error::{PimError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    /// Dense LU when the system is stored dense, GMRES otherwise.
    Auto,
    DenseLu,
    Iterative,
}

impl SolveMethod {
    pub fn from_name(name: &str) -> Result<Self> {
        match name.trim() {
            "auto" => Ok(SolveMethod::Auto),
            "dense-lu" | "lu" => Ok(SolveMethod::DenseLu),
            "iterative" | "gmres" => Ok(SolveMethod::Iterative),
            other => Err(PimError::InvalidParameter(format!(
                "unknown solver method '{other}' (expected auto, dense-lu or iterative)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SolveMethod::Auto => "auto",
            SolveMethod::DenseLu => "dense-lu",
            SolveMethod::Iterative => "iterative",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub method: SolveMethod,
    /// Target relative residual.
    pub tol: f64,
    /// Iteration cap is `max_iter_factor * n`.
    pub max_iter_factor: usize,
    /// GMRES restart length.
    pub restart: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            method: SolveMethod::Auto,
            tol: 1e-10,
            max_iter_factor: 10,
            restart: 60,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub solution: Vec<f64>,
    /// Method actually used (never `Auto`).
    pub method: SolveMethod,
    pub iterations: usize,
    /// `‖A u - rhs‖₂ / max(‖rhs‖₂, tiny)`, recomputed after the solve.
    pub residual_norm: f64,
    /// Residual the solver itself believed it reached.
    pub claimed_residual: f64,
}

pub fn solve(system: &LinearSystem, options: &SolveOptions) -> Result<SolveReport> {
    if !(options.tol > 0.0) {
        return Err(PimError::InvalidParameter(format!(
            "solver tolerance must be positive, got {}",
            options.tol
        )));
    }
    let method = match options.method {
        SolveMethod::Auto => match system.meta().storage {
            Storage::Dense => SolveMethod::DenseLu,
            Storage::Sparse => SolveMethod::Iterative,
        },
        m => m,
    };
    let (solution, iterations, claimed) = match method {
        SolveMethod::DenseLu => dense_solve(system, options.tol)?,
        _ => gmres(system, options)?,
    };
    let residual_norm = system.relative_residual(&solution);
    if residual_norm > options.tol {
        return Err(PimError::NoConvergence {
            iterations,
            residual: residual_norm,
            tol: options.tol,
        });
    }
    Ok(SolveReport {
        solution,
        method,
        iterations,
        residual_norm,
        claimed_residual: claimed,
    })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// In-place LU factorization with partial pivoting of a row-major matrix.
pub struct DenseLu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl DenseLu {
    pub fn factor(mut a: Vec<f64>, n: usize) -> Result<Self> {
        assert_eq!(a.len(), n * n);
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let threshold = 1e-14 * scale;
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pivot) = (k..n)
                .map(|i| (i, a[i * n + k].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(pivot > threshold) {
                return Err(PimError::SingularMatrix {
                    column: k,
                    pivot,
                    threshold,
                });
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let akk = a[k * n + k];
            let (top, bottom) = a.split_at_mut((k + 1) * n);
            let pivot_row = &top[k * n..(k + 1) * n];
            for row in bottom.chunks_exact_mut(n) {
                let factor = row[k] / akk;
                row[k] = factor;
                if factor != 0.0 {
                    for j in k + 1..n {
                        row[j] -= factor * pivot_row[j];
                    }
                }
            }
        }
        Ok(Self { n, lu: a, perm })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s: f64 = (0..i).map(|j| self.lu[i * n + j] * x[j]).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| self.lu[i * n + j] * x[j]).sum();
            x[i] = (x[i] - s) / self.lu[i * n + i];
        }
        x
    }
}

fn dense_solve(system: &LinearSystem, tol: f64) -> Result<(Vec<f64>, usize, f64)> {
    let n = system.len();
    let lu = DenseLu::factor(system.to_dense(), n)?;
    let rhs = system.rhs();
    let mut x = lu.solve(rhs);
    let mut res = system.relative_residual(&x);
    // Up to two steps of iterative refinement if rounding left us short.
    let mut steps = 0;
    while res > tol && steps < 2 {
        let ax = system.apply(&x);
        let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let dx = lu.solve(&r);
        x.iter_mut().zip(&dx).for_each(|(xi, d)| *xi += d);
        res = system.relative_residual(&x);
        steps += 1;
    }
    Ok((x, steps, res))
}

fn gmres(system: &LinearSystem, options: &SolveOptions) -> Result<(Vec<f64>, usize, f64)> {
    let n = system.len();
    let b = system.rhs();
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, 0, 0.0));
    }
    let inv_diag: Vec<f64> = system
        .diagonal()
        .iter()
        .map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let precondition = |v: &[f64]| -> Vec<f64> { v.iter().zip(&inv_diag).map(|(a, d)| a * d).collect() };

    let m = options.restart.max(1).min(n.max(1));
    let max_iter = options.max_iter_factor.max(1) * n;
    let mut iterations = 0;
    let mut rel = f64::INFINITY;

    while iterations < max_iter {
        let ax = system.apply(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = norm(&r);
        rel = beta / bnorm;
        if rel <= options.tol {
            return Ok((x, iterations, rel));
        }

        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        basis.push(r.iter().map(|v| v / beta).collect());
        let mut hess = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k = 0;

        while k < m && iterations < max_iter {
            let z = precondition(&basis[k]);
            let mut w = system.apply(&z);
            iterations += 1;
            for (i, v) in basis.iter().enumerate() {
                let hik = dot(&w, v);
                hess[i][k] = hik;
                w.iter_mut().zip(v).for_each(|(wi, vi)| *wi -= hik * vi);
            }
            let wnorm = norm(&w);
            hess[k + 1][k] = wnorm;

            for i in 0..k {
                let (a, c) = (hess[i][k], hess[i + 1][k]);
                hess[i][k] = cs[i] * a + sn[i] * c;
                hess[i + 1][k] = -sn[i] * a + cs[i] * c;
            }
            let (a, c) = (hess[k][k], hess[k + 1][k]);
            let rho = a.hypot(c);
            if rho == 0.0 {
                break;
            }
            cs[k] = a / rho;
            sn[k] = c / rho;
            hess[k][k] = rho;
            hess[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k += 1;

            rel = g[k].abs() / bnorm;
            if rel <= 0.5 * options.tol || wnorm == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / wnorm).collect());
        }

        // Back substitution for the k x k triangular system.
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let s: f64 = (i + 1..k).map(|j| hess[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / hess[i][i];
        }
        let mut update = vec![0.0; n];
        for (v, yi) in basis.iter().zip(&y) {
            update.iter_mut().zip(v).for_each(|(u, vi)| *u += yi * vi);
        }
        let update = precondition(&update);
        x.iter_mut().zip(&update).for_each(|(xi, d)| *xi += d);
        if k == 0 {
            break;
        }
    }

    let final_rel = system.relative_residual(&x);
    if final_rel <= options.tol {
        return Ok((x, iterations, final_rel));
    }
    Err(PimError::NoConvergence {
        iterations,
        residual: final_rel.min(rel),
        tol: options.tol,
    })
}
