//! Discrete integral operators evaluated at sample points, and quadrature
//! oracles for their continuous counterparts.
//!
//! ```text
//! L_{t,h} u(p_i) = 1/t Σ_j R_t(p_i, p_j) (u_i - u_j) V_j
//! K_{t,h} u(p_i) = L_{t,h} u(p_i) + 2/β Σ_l Rbar_t(p_i, s_l) u(s_l) A_l
//! ```

use rayon::prelude::*;

use crate::error::{PimError, Result};
use crate::kernel::Kernel;
use crate::neighbors::NeighborIndex;
use crate::pointcloud::PointCloud;

pub(crate) fn check_len(what: &'static str, got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return Err(PimError::LengthMismatch { what, expected, got });
    }
    Ok(())
}

pub(crate) fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(PimError::InvalidParameter(format!(
            "penalty beta must be positive, got {beta}"
        )));
    }
    Ok(())
}

/// Cloud + kernel + neighbor index: everything needed to apply the
/// discrete operators at sample points.
pub struct DiscreteOperators<'a> {
    cloud: &'a PointCloud,
    kernel: &'a Kernel,
    index: NeighborIndex,
}

impl<'a> DiscreteOperators<'a> {
    pub fn new(cloud: &'a PointCloud, kernel: &'a Kernel) -> Self {
        let index = NeighborIndex::build(cloud.coords(), cloud.dim(), kernel.support_radius());
        Self { cloud, kernel, index }
    }

    pub fn index(&self) -> &NeighborIndex {
        &self.index
    }

    /// `L_{t,h} u (p_i)`.
    pub fn lth(&self, u: &[f64], i: usize) -> f64 {
        debug_assert_eq!(u.len(), self.cloud.len());
        let v = self.cloud.volume_weights();
        let ui = u[i];
        let mut acc = 0.0;
        self.index.for_each_within(self.cloud.point(i), |j, d2| {
            acc += self.kernel.rt_d2(d2) * (ui - u[j]) * v[j];
        });
        acc / self.kernel.t()
    }

    /// Boundary penalty `2/β Σ_l Rbar_t(p_i, s_l) u(s_l) A_l`.
    pub fn boundary_term(&self, beta: f64, u: &[f64], i: usize) -> f64 {
        let a = self.cloud.area_weights();
        let mut acc = 0.0;
        self.index.for_each_within(self.cloud.point(i), |j, d2| {
            if let Some(l) = self.cloud.boundary_slot(j) {
                acc += self.kernel.rbar_t_d2(d2) * u[j] * a[l];
            }
        });
        2.0 / beta * acc
    }

    /// `K_{t,h} u (p_i)`.
    pub fn kth(&self, beta: f64, u: &[f64], i: usize) -> f64 {
        self.lth(u, i) + self.boundary_term(beta, u, i)
    }

    /// `L_{t,h} u` at every sample point.
    pub fn apply_lth(&self, u: &[f64]) -> Result<Vec<f64>> {
        check_len("field", u.len(), self.cloud.len())?;
        Ok((0..self.cloud.len()).into_par_iter().map(|i| self.lth(u, i)).collect())
    }

    pub fn apply_kth(&self, beta: f64, u: &[f64]) -> Result<Vec<f64>> {
        check_beta(beta)?;
        check_len("field", u.len(), self.cloud.len())?;
        Ok((0..self.cloud.len())
            .into_par_iter()
            .map(|i| self.kth(beta, u, i))
            .collect())
    }

    /// `Σ_i V_i u_i (L_{t,h} u)(p_i)`.
    pub fn weighted_form(&self, u: &[f64]) -> Result<f64> {
        let lu = self.apply_lth(u)?;
        let v = self.cloud.volume_weights();
        Ok((0..u.len()).map(|i| v[i] * u[i] * lu[i]).sum())
    }

    /// `1/(2t) Σ_{i,j} R_t(p_i, p_j) (u_i - u_j)^2 V_i V_j`, the symmetric
    /// form of [`weighted_form`](Self::weighted_form).
    pub fn dirichlet_energy(&self, u: &[f64]) -> Result<f64> {
        check_len("field", u.len(), self.cloud.len())?;
        let v = self.cloud.volume_weights();
        let rows: Vec<f64> = (0..u.len())
            .into_par_iter()
            .map(|i| {
                let mut acc = 0.0;
                self.index.for_each_within(self.cloud.point(i), |j, d2| {
                    let du = u[i] - u[j];
                    acc += self.kernel.rt_d2(d2) * du * du * v[j];
                });
                acc * v[i]
            })
            .collect();
        Ok(rows.iter().sum::<f64>() / (2.0 * self.kernel.t()))
    }
}

/// `L_t u(x)` for a smooth `u`, by brute-force quadrature over a (fine)
/// cloud. No neighbor index is involved.
pub fn oracle_lt<F: Fn(&[f64]) -> f64>(u: F, x: &[f64], fine: &PointCloud, kernel: &Kernel) -> f64 {
    let ux = u(x);
    let acc: f64 = fine
        .points()
        .zip(fine.volume_weights())
        .map(|(y, v)| kernel.rt(x, y) * (ux - u(y)) * v)
        .sum();
    acc / kernel.t()
}

/// The smoothing map `v(x) = ∫ R_t(x, y) u(y) dμ_y / ∫ R_t(x, y) dμ_y`,
/// discretized on `cloud`. A convex combination of the values of `u`.
///
/// Returns `None` when `x` is outside the kernel support of every sample.
pub fn oracle_smoothing<F: Fn(&[f64]) -> f64>(
    u: F,
    x: &[f64],
    cloud: &PointCloud,
    kernel: &Kernel,
) -> Option<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for (y, v) in cloud.points().zip(cloud.volume_weights()) {
        let w = kernel.rt(x, y) * v;
        num += w * u(y);
        den += w;
    }
    (den > 0.0).then(|| num / den)
}

/// `w̄_t(x) = Σ_j Rbar_t(x, p_j) V_j`.
pub fn rbar_mass(x: &[f64], cloud: &PointCloud, kernel: &Kernel) -> f64 {
    cloud
        .points()
        .zip(cloud.volume_weights())
        .map(|(y, v)| kernel.rbar_t(x, y) * v)
        .sum()
}
