//! Sampled manifolds `(P, S, V, A)`: points, the boundary subset, and
//! quadrature weights for the manifold and its boundary.

mod generate;
pub(crate) mod io;

pub use generate::generate;
pub use io::{load, read_cloud, save, write_cloud};

use crate::error::{PimError, Result};
use crate::neighbors::NeighborIndex;

/// Analytic description of the built-in manifolds.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    /// `[a, b] ⊂ R`.
    Interval { a: f64, b: f64 },
    /// `[0, w0] × [0, w1] ⊂ R²`.
    Rectangle { widths: [f64; 2] },
    /// `{ |x| ≤ 1 } ⊂ R²`.
    UnitDisk,
    /// `{ x ∈ S² : x₃ ≥ z0 } ⊂ R³`.
    SphericalCap { z0: f64 },
}

impl Shape {
    pub fn ambient_dim(&self) -> usize {
        match self {
            Shape::Interval { .. } => 1,
            Shape::Rectangle { .. } | Shape::UnitDisk => 2,
            Shape::SphericalCap { .. } => 3,
        }
    }

    pub fn intrinsic_dim(&self) -> usize {
        match self {
            Shape::Interval { .. } => 1,
            _ => 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Shape::Interval { a, b } if !(a < b && a.is_finite() && b.is_finite()) => Err(
                PimError::InvalidSpec(format!("interval requires a < b, got [{a}, {b}]")),
            ),
            Shape::Rectangle { widths } if !widths.iter().all(|w| w.is_finite() && *w > 0.0) => {
                Err(PimError::InvalidSpec(format!(
                    "rectangle widths must be positive, got {widths:?}"
                )))
            }
            Shape::SphericalCap { z0 } if !(z0 > -1.0 && z0 < 1.0) => Err(PimError::InvalidSpec(
                format!("spherical cap requires -1 < z0 < 1, got {z0}"),
            )),
            _ => Ok(()),
        }
    }

    /// Measure of the manifold.
    pub fn volume(&self) -> f64 {
        use std::f64::consts::PI;
        match *self {
            Shape::Interval { a, b } => b - a,
            Shape::Rectangle { widths } => widths[0] * widths[1],
            Shape::UnitDisk => PI,
            Shape::SphericalCap { z0 } => 2.0 * PI * (1.0 - z0),
        }
    }

    /// Measure of the boundary (counting measure for the interval).
    pub fn boundary_measure(&self) -> f64 {
        use std::f64::consts::PI;
        match *self {
            Shape::Interval { .. } => 2.0,
            Shape::Rectangle { widths } => 2.0 * (widths[0] + widths[1]),
            Shape::UnitDisk => 2.0 * PI,
            Shape::SphericalCap { z0 } => 2.0 * PI * (1.0 - z0 * z0).sqrt(),
        }
    }

    /// Signed residual of the boundary equation at `x` (zero on ∂M).
    pub fn boundary_residual(&self, x: &[f64]) -> f64 {
        match *self {
            Shape::Interval { a, b } => (x[0] - a).abs().min((x[0] - b).abs()),
            Shape::Rectangle { widths } => x[0]
                .abs()
                .min(x[1].abs())
                .min((x[0] - widths[0]).abs())
                .min((x[1] - widths[1]).abs()),
            Shape::UnitDisk => (x[0] * x[0] + x[1] * x[1]).sqrt() - 1.0,
            Shape::SphericalCap { z0 } => x[2] - z0,
        }
    }

    /// Projects an ambient vector onto the tangent space at `x`. Flat
    /// shapes (`k = d`) leave the vector untouched.
    pub fn project_tangent(&self, x: &[f64], v: &mut [f64]) {
        if let Shape::SphericalCap { .. } = self {
            let norm2: f64 = x.iter().map(|c| c * c).sum();
            if norm2 > 0.0 {
                let dot: f64 = x.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
                let s = dot / norm2;
                for (vi, xi) in v.iter_mut().zip(x) {
                    *vi -= s * xi;
                }
            }
        }
    }
}

/// Shape plus sampling controls.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldSpec {
    pub shape: Shape,
    /// Target number of points. Exact for the interval; the 2-D generators
    /// pick the nearest admissible grid.
    pub resolution: usize,
    /// Random placement amplitude as a fraction of the local spacing; 0
    /// gives the deterministic structured grid.
    pub jitter: f64,
    pub seed: u64,
}

impl ManifoldSpec {
    pub fn new(shape: Shape, resolution: usize) -> Self {
        Self {
            shape,
            resolution,
            jitter: 0.0,
            seed: 0,
        }
    }

    pub fn interval(a: f64, b: f64, n: usize) -> Self {
        Self::new(Shape::Interval { a, b }, n)
    }

    pub fn rectangle(w0: f64, w1: f64, n: usize) -> Self {
        Self::new(Shape::Rectangle { widths: [w0, w1] }, n)
    }

    pub fn unit_disk(n: usize) -> Self {
        Self::new(Shape::UnitDisk, n)
    }

    pub fn spherical_cap(z0: f64, n: usize) -> Self {
        Self::new(Shape::SphericalCap { z0 }, n)
    }

    pub fn with_jitter(mut self, jitter: f64, seed: u64) -> Self {
        self.jitter = jitter;
        self.seed = seed;
        self
    }

    pub fn with_resolution(&self, resolution: usize) -> Self {
        Self {
            resolution,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.shape.validate()?;
        if !(0.0..1.0).contains(&self.jitter) {
            return Err(PimError::InvalidSpec(format!(
                "jitter must lie in [0, 1), got {}",
                self.jitter
            )));
        }
        Ok(())
    }
}

/// An h-integrable sample of a manifold and its boundary.
///
/// Immutable after construction; every constructor validates the weight and
/// index invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    intrinsic_dim: usize,
    coords: Vec<f64>,
    boundary_indices: Vec<usize>,
    volume_weights: Vec<f64>,
    area_weights: Vec<f64>,
    /// `boundary_slot[i] = Some(l)` iff `boundary_indices[l] == i`.
    boundary_slot: Vec<Option<usize>>,
    shape: Option<Shape>,
    fill_distance: Option<f64>,
}

impl PointCloud {
    pub fn new(
        dim: usize,
        intrinsic_dim: usize,
        coords: Vec<f64>,
        boundary_indices: Vec<usize>,
        volume_weights: Vec<f64>,
        area_weights: Vec<f64>,
    ) -> Result<Self> {
        if dim == 0 || coords.len() % dim != 0 {
            return Err(PimError::InvalidCloud(format!(
                "coordinate array of length {} is not a multiple of dimension {dim}",
                coords.len()
            )));
        }
        if intrinsic_dim == 0 || intrinsic_dim > dim {
            return Err(PimError::InvalidCloud(format!(
                "intrinsic dimension {intrinsic_dim} must lie in [1, {dim}]"
            )));
        }
        let n = coords.len() / dim;
        if volume_weights.len() != n {
            return Err(PimError::LengthMismatch {
                what: "volume weights",
                expected: n,
                got: volume_weights.len(),
            });
        }
        if area_weights.len() != boundary_indices.len() {
            return Err(PimError::LengthMismatch {
                what: "area weights",
                expected: boundary_indices.len(),
                got: area_weights.len(),
            });
        }
        if let Some(v) = volume_weights.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(PimError::InvalidCloud(format!("non-positive volume weight {v}")));
        }
        if let Some(a) = area_weights.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
            return Err(PimError::InvalidCloud(format!("non-positive area weight {a}")));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(PimError::InvalidCloud("non-finite coordinate".into()));
        }
        let mut boundary_slot = vec![None; n];
        for (l, &i) in boundary_indices.iter().enumerate() {
            if i >= n {
                return Err(PimError::InvalidCloud(format!(
                    "boundary index {i} out of range for {n} points"
                )));
            }
            if boundary_slot[i].replace(l).is_some() {
                return Err(PimError::InvalidCloud(format!("duplicate boundary index {i}")));
            }
        }
        Ok(Self {
            dim,
            intrinsic_dim,
            coords,
            boundary_indices,
            volume_weights,
            area_weights,
            boundary_slot,
            shape: None,
            fill_distance: None,
        })
    }

    /// Attaches the analytic shape this cloud samples.
    pub fn with_shape(mut self, shape: Shape) -> Self {
        self.shape = Some(shape);
        self
    }

    pub fn len(&self) -> usize {
        self.volume_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.volume_weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn intrinsic_dim(&self) -> usize {
        self.intrinsic_dim
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn boundary_indices(&self) -> &[usize] {
        &self.boundary_indices
    }

    pub fn boundary_len(&self) -> usize {
        self.boundary_indices.len()
    }

    /// Position of point `i` in the boundary list, if it is a boundary sample.
    #[inline]
    pub fn boundary_slot(&self, i: usize) -> Option<usize> {
        self.boundary_slot[i]
    }

    pub fn volume_weights(&self) -> &[f64] {
        &self.volume_weights
    }

    pub fn area_weights(&self) -> &[f64] {
        &self.area_weights
    }

    pub fn shape(&self) -> Option<&Shape> {
        self.shape.as_ref()
    }

    /// Fill distance recorded at generation time, if any.
    pub fn recorded_fill_distance(&self) -> Option<f64> {
        self.fill_distance
    }

    /// Recorded fill distance, or a fresh computation.
    pub fn h(&self) -> Result<f64> {
        match self.fill_distance {
            Some(h) => Ok(h),
            None => fill_distance(self),
        }
    }

    pub(crate) fn set_fill_distance(&mut self, h: f64) {
        self.fill_distance = Some(h);
    }

    pub fn total_volume(&self) -> f64 {
        self.volume_weights.iter().sum()
    }

    pub fn total_area(&self) -> f64 {
        self.area_weights.iter().sum()
    }

    /// `Σ g(p_i) V_i`.
    pub fn integrate<F: Fn(&[f64]) -> f64>(&self, g: F) -> f64 {
        self.points()
            .zip(&self.volume_weights)
            .map(|(p, v)| g(p) * v)
            .sum()
    }

    /// `Σ g(s_l) A_l`.
    pub fn integrate_boundary<F: Fn(&[f64]) -> f64>(&self, g: F) -> f64 {
        self.boundary_indices
            .iter()
            .zip(&self.area_weights)
            .map(|(&i, a)| g(self.point(i)) * a)
            .sum()
    }
}

/// Maximum over points of the distance to the nearest other point.
///
/// This is the geometric surrogate used for the sampling parameter `h`.
pub fn fill_distance(cloud: &PointCloud) -> Result<f64> {
    let n = cloud.len();
    if n < 2 {
        return Err(PimError::TooFewPoints(n));
    }
    let d = cloud.dim();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for p in cloud.points() {
        for a in 0..d {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let diam = crate::dist2(&lo, &hi).sqrt();
    if diam == 0.0 {
        return Ok(0.0);
    }
    // Start from the spacing of a uniform sample of the bounding box and grow
    // the radius for points whose nearest neighbor is still outside it.
    let k = cloud.intrinsic_dim() as f64;
    let mut radius = (diam.powf(k) / n as f64).powf(1.0 / k).min(diam) * 1.5;
    let mut pending: Vec<usize> = (0..n).collect();
    let mut best = 0.0f64;
    while !pending.is_empty() {
        let index = NeighborIndex::build(cloud.coords(), d, radius);
        let mut unresolved = Vec::new();
        for &i in &pending {
            let mut nearest = f64::INFINITY;
            index.for_each_within(cloud.point(i), |j, d2| {
                if j != i && d2 < nearest {
                    nearest = d2;
                }
            });
            if nearest.is_finite() {
                best = best.max(nearest.sqrt());
            } else {
                unresolved.push(i);
            }
        }
        pending = unresolved;
        if radius > 2.0 * diam {
            // Remaining points coincide with nothing within the diameter,
            // which cannot happen for n >= 2; bail out defensively.
            break;
        }
        radius *= 2.0;
    }
    Ok(best)
}
