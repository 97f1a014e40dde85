use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{PimError, Result};
use crate::pointcloud::{ManifoldSpec, PointCloud, Shape};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CaseKind {
    /// `u = sin(πx)` on `[0, 1]`, `f = π² sin(πx)`, `b = 0`.
    SineInterval,
    /// `u = 1 - |x|²` on the unit disk, `f = 4`, `b = 0`.
    DiskParaboloid,
    /// `u = x² + y²` on `[0, w0] × [0, w1]`, `f = -4`, `b = u`.
    RectangleQuadratic { widths: [f64; 2] },
    /// `u = z` on the cap `z ≥ z0` of the unit sphere, `f = 2z`, `b = z0`.
    CapHarmonic { z0: f64 },
}

/// A Poisson problem `-Δ_M u = f`, `u = b` on the boundary, with known
/// solution.
#[derive(Debug, Clone, PartialEq)]
pub struct ManufacturedCase {
    pub kind: CaseKind,
}

pub fn builtin_cases() -> Vec<ManufacturedCase> {
    vec![
        ManufacturedCase::sine_interval(),
        ManufacturedCase::disk(),
        ManufacturedCase::rectangle(),
        ManufacturedCase::cap(0.0),
    ]
}

impl ManufacturedCase {
    pub fn sine_interval() -> Self {
        Self { kind: CaseKind::SineInterval }
    }

    pub fn disk() -> Self {
        Self { kind: CaseKind::DiskParaboloid }
    }

    pub fn rectangle() -> Self {
        Self {
            kind: CaseKind::RectangleQuadratic { widths: [1.0, 1.0] },
        }
    }

    pub fn cap(z0: f64) -> Self {
        Self {
            kind: CaseKind::CapHarmonic { z0 },
        }
    }

    /// Accepts `interval`, `disk`, `rectangle`, `cap`/`hemisphere`.
    pub fn from_name(name: &str) -> Result<Self> {
        match name.trim() {
            "interval" | "sine-interval" => Ok(Self::sine_interval()),
            "disk" => Ok(Self::disk()),
            "rectangle" => Ok(Self::rectangle()),
            "cap" | "hemisphere" => Ok(Self::cap(0.0)),
            other => Err(PimError::InvalidParameter(format!(
                "unknown case '{other}' (expected interval, disk, rectangle or cap)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            CaseKind::SineInterval => "interval",
            CaseKind::DiskParaboloid => "disk",
            CaseKind::RectangleQuadratic { .. } => "rectangle",
            CaseKind::CapHarmonic { .. } => "cap",
        }
    }

    pub fn shape(&self) -> Shape {
        match self.kind {
            CaseKind::SineInterval => Shape::Interval { a: 0.0, b: 1.0 },
            CaseKind::DiskParaboloid => Shape::UnitDisk,
            CaseKind::RectangleQuadratic { widths } => Shape::Rectangle { widths },
            CaseKind::CapHarmonic { z0 } => Shape::SphericalCap { z0 },
        }
    }

    pub fn spec(&self, resolution: usize) -> ManifoldSpec {
        ManifoldSpec::new(self.shape(), resolution)
    }

    pub fn exact_u(&self, x: &[f64]) -> f64 {
        match self.kind {
            CaseKind::SineInterval => (PI * x[0]).sin(),
            CaseKind::DiskParaboloid => 1.0 - x[0] * x[0] - x[1] * x[1],
            CaseKind::RectangleQuadratic { .. } => x[0] * x[0] + x[1] * x[1],
            CaseKind::CapHarmonic { .. } => x[2],
        }
    }

    /// Tangential gradient of the exact solution.
    pub fn grad_u(&self, x: &[f64]) -> Vec<f64> {
        match self.kind {
            CaseKind::SineInterval => vec![PI * (PI * x[0]).cos()],
            CaseKind::DiskParaboloid => vec![-2.0 * x[0], -2.0 * x[1]],
            CaseKind::RectangleQuadratic { .. } => vec![2.0 * x[0], 2.0 * x[1]],
            CaseKind::CapHarmonic { .. } => {
                // e3 projected on the tangent plane at x.
                let r2: f64 = x.iter().map(|c| c * c).sum();
                let s = x[2] / r2;
                vec![-s * x[0], -s * x[1], 1.0 - s * x[2]]
            }
        }
    }

    /// `-Δ_M u`.
    pub fn source(&self, x: &[f64]) -> f64 {
        match self.kind {
            CaseKind::SineInterval => PI * PI * (PI * x[0]).sin(),
            CaseKind::DiskParaboloid => 4.0,
            CaseKind::RectangleQuadratic { .. } => -4.0,
            CaseKind::CapHarmonic { .. } => 2.0 * x[2],
        }
    }

    /// Dirichlet data at a boundary point.
    pub fn boundary(&self, x: &[f64]) -> f64 {
        match self.kind {
            CaseKind::SineInterval | CaseKind::DiskParaboloid => 0.0,
            CaseKind::RectangleQuadratic { .. } => self.exact_u(x),
            CaseKind::CapHarmonic { z0 } => z0,
        }
    }

    /// `(f at every point, b at every boundary point)`.
    pub fn sample(&self, cloud: &PointCloud) -> (Vec<f64>, Vec<f64>) {
        let f = cloud.points().map(|p| self.source(p)).collect();
        let b = cloud
            .boundary_indices()
            .iter()
            .map(|&i| self.boundary(cloud.point(i)))
            .collect();
        (f, b)
    }

    pub fn exact_on(&self, cloud: &PointCloud) -> Vec<f64> {
        cloud.points().map(|p| self.exact_u(p)).collect()
    }

    /// Largest relative mismatch between the hard-coded source and a
    /// second-order finite-difference Laplace–Beltrami of `exact_u`, over
    /// `count` random interior points. Flat cases use Cartesian
    /// differences, the cap uses spherical coordinates.
    pub fn source_consistency(&self, count: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = 1e-4;
        let mut worst = 0.0f64;
        for _ in 0..count {
            let (fd, f) = match self.kind {
                CaseKind::SineInterval => {
                    let x = rng.gen_range(0.05..0.95);
                    let u = |x: f64| self.exact_u(&[x]);
                    let lap = (u(x + e) - 2.0 * u(x) + u(x - e)) / (e * e);
                    (-lap, self.source(&[x]))
                }
                CaseKind::DiskParaboloid | CaseKind::RectangleQuadratic { .. } => {
                    let p = match self.kind {
                        CaseKind::DiskParaboloid => {
                            let r = 0.9 * rng.gen::<f64>().sqrt();
                            let th = rng.gen_range(0.0..2.0 * PI);
                            [r * th.cos(), r * th.sin()]
                        }
                        CaseKind::RectangleQuadratic { widths } => [
                            rng.gen_range(0.05..0.95) * widths[0],
                            rng.gen_range(0.05..0.95) * widths[1],
                        ],
                        _ => unreachable!(),
                    };
                    let u = |dx: f64, dy: f64| self.exact_u(&[p[0] + dx, p[1] + dy]);
                    let lap = (u(e, 0.0) + u(-e, 0.0) + u(0.0, e) + u(0.0, -e) - 4.0 * u(0.0, 0.0))
                        / (e * e);
                    (-lap, self.source(&p))
                }
                CaseKind::CapHarmonic { z0 } => {
                    let phi_max = z0.acos();
                    let phi = rng.gen_range(0.05 * phi_max..0.95 * phi_max);
                    let th = rng.gen_range(0.0..2.0 * PI);
                    let u = |phi: f64, th: f64| {
                        self.exact_u(&[phi.sin() * th.cos(), phi.sin() * th.sin(), phi.cos()])
                    };
                    // Δ = (1/sinφ) ∂φ(sinφ ∂φ) + (1/sin²φ) ∂θθ
                    let s = phi.sin();
                    let flux = |p: f64| p.sin() * (u(p + e / 2.0, th) - u(p - e / 2.0, th)) / e;
                    let d_phi = (flux(phi + e / 2.0) - flux(phi - e / 2.0)) / (e * s);
                    let d_th = (u(phi, th + e) - 2.0 * u(phi, th) + u(phi, th - e)) / (e * e * s * s);
                    let x = [s * th.cos(), s * th.sin(), phi.cos()];
                    (-(d_phi + d_th), self.source(&x))
                }
            };
            worst = worst.max((fd - f).abs() / f.abs().max(1.0));
        }
        worst
    }
}
