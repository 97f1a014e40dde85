use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{fill_distance, ManifoldSpec, PointCloud, Shape};
use crate::error::{PimError, Result};

/// Samples a built-in manifold with analytic quadrature weights.
///
/// * interval / rectangle: (tensor) composite trapezoid rule, boundary
///   weights from the trapezoid rule along the boundary (counting measure
///   for the interval);
/// * unit disk: concentric rings with exact annular cell areas;
/// * spherical cap: rings of constant colatitude with exact band areas.
///
/// Weight sums reproduce the manifold and boundary measures to rounding.
/// The fill distance of the result is recorded on the cloud.
pub fn generate(spec: &ManifoldSpec) -> Result<PointCloud> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut cloud = match spec.shape {
        Shape::Interval { a, b } => interval(a, b, spec.resolution, spec.jitter, &mut rng)?,
        Shape::Rectangle { widths } => rectangle(widths, spec.resolution, spec.jitter, &mut rng)?,
        Shape::UnitDisk => disk(spec.resolution, spec.jitter, &mut rng)?,
        Shape::SphericalCap { z0 } => cap(z0, spec.resolution, spec.jitter, &mut rng)?,
    }
    .with_shape(spec.shape.clone());
    let h = fill_distance(&cloud)?;
    cloud.set_fill_distance(h);
    Ok(cloud)
}

/// Nodes of `[a, b]` with `n` points; interior nodes optionally perturbed.
fn line_nodes(a: f64, b: f64, n: usize, jitter: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let h = (b - a) / (n - 1) as f64;
    let mut xs: Vec<f64> = (0..n).map(|i| a + h * i as f64).collect();
    xs[0] = a;
    xs[n - 1] = b;
    if jitter > 0.0 {
        for x in xs.iter_mut().take(n - 1).skip(1) {
            *x += 0.5 * jitter * h * rng.gen_range(-1.0..1.0);
        }
    }
    xs
}

fn trapezoid_weights(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    (0..n)
        .map(|i| {
            let left = if i > 0 { xs[i] - xs[i - 1] } else { 0.0 };
            let right = if i + 1 < n { xs[i + 1] - xs[i] } else { 0.0 };
            0.5 * (left + right)
        })
        .collect()
}

fn interval(a: f64, b: f64, n: usize, jitter: f64, rng: &mut ChaCha8Rng) -> Result<PointCloud> {
    if n < 3 {
        return Err(PimError::ResolutionTooSmall(n));
    }
    let xs = line_nodes(a, b, n, jitter, rng);
    let v = trapezoid_weights(&xs);
    PointCloud::new(1, 1, xs, vec![0, n - 1], v, vec![1.0, 1.0])
}

fn rectangle(widths: [f64; 2], n: usize, jitter: f64, rng: &mut ChaCha8Rng) -> Result<PointCloud> {
    if n < 9 {
        return Err(PimError::ResolutionTooSmall(n));
    }
    let spacing = (widths[0] * widths[1] / n as f64).sqrt();
    let nx = ((widths[0] / spacing).round() as usize + 1).max(3);
    let ny = ((widths[1] / spacing).round() as usize + 1).max(3);
    let xs = line_nodes(0.0, widths[0], nx, jitter, rng);
    let ys = line_nodes(0.0, widths[1], ny, jitter, rng);
    let wx = trapezoid_weights(&xs);
    let wy = trapezoid_weights(&ys);

    let mut coords = Vec::with_capacity(2 * nx * ny);
    let mut volume = Vec::with_capacity(nx * ny);
    let mut boundary = Vec::new();
    let mut area = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            coords.extend_from_slice(&[xs[i], ys[j]]);
            volume.push(wx[i] * wy[j]);
            let on_x_edge = j == 0 || j == ny - 1;
            let on_y_edge = i == 0 || i == nx - 1;
            if on_x_edge || on_y_edge {
                let mut a = 0.0;
                if on_x_edge {
                    a += wx[i];
                }
                if on_y_edge {
                    a += wy[j];
                }
                boundary.push(volume.len() - 1);
                area.push(a);
            }
        }
    }
    PointCloud::new(2, 2, coords, boundary, volume, area)
}

fn disk(n: usize, jitter: f64, rng: &mut ChaCha8Rng) -> Result<PointCloud> {
    if n < 4 {
        return Err(PimError::ResolutionTooSmall(n));
    }
    // n ≈ 1 + π R (R + 1) points for R rings.
    let rings = ((-1.0 + (1.0 + 4.0 * (n as f64 - 1.0) / PI).sqrt()) / 2.0)
        .round()
        .max(1.0) as usize;
    let dr = 1.0 / rings as f64;

    let mut coords = vec![0.0, 0.0];
    let mut volume = vec![PI * (0.5 * dr).powi(2)];
    let mut boundary = Vec::new();
    let mut area = Vec::new();
    for j in 1..=rings {
        let r = if j == rings { 1.0 } else { j as f64 * dr };
        let inner = r - 0.5 * dr;
        let outer = (r + 0.5 * dr).min(1.0);
        let m = ((2.0 * PI * r / dr).round() as usize).max(3);
        let cell = PI * (outer * outer - inner * inner) / m as f64;
        let phase = if jitter > 0.0 {
            jitter * rng.gen_range(0.0..1.0) * 2.0 * PI / m as f64
        } else {
            0.0
        };
        for q in 0..m {
            let theta = phase + 2.0 * PI * q as f64 / m as f64;
            coords.extend_from_slice(&[r * theta.cos(), r * theta.sin()]);
            volume.push(cell);
            if j == rings {
                boundary.push(volume.len() - 1);
                area.push(2.0 * PI / m as f64);
            }
        }
    }
    PointCloud::new(2, 2, coords, boundary, volume, area)
}

fn cap(z0: f64, n: usize, jitter: f64, rng: &mut ChaCha8Rng) -> Result<PointCloud> {
    if n < 4 {
        return Err(PimError::ResolutionTooSmall(n));
    }
    let phi_max = z0.acos();
    let spacing = (2.0 * PI * (1.0 - z0) / n as f64).sqrt();
    let rings = ((phi_max / spacing).round() as usize).max(1);
    let dphi = phi_max / rings as f64;

    let mut coords = vec![0.0, 0.0, 1.0];
    let mut volume = vec![2.0 * PI * (1.0 - (0.5 * dphi).cos())];
    let mut boundary = Vec::new();
    let mut area = Vec::new();
    for j in 1..=rings {
        let last = j == rings;
        let phi = if last { phi_max } else { j as f64 * dphi };
        let (rho, z) = if last {
            ((1.0 - z0 * z0).sqrt(), z0)
        } else {
            (phi.sin(), phi.cos())
        };
        let lo = phi - 0.5 * dphi;
        let hi = (phi + 0.5 * dphi).min(phi_max);
        let zhi = lo.cos();
        let zlo = if last { z0 } else { hi.cos() };
        let m = ((2.0 * PI * rho / dphi).round() as usize).max(3);
        let cell = 2.0 * PI * (zhi - zlo) / m as f64;
        let phase = if jitter > 0.0 {
            jitter * rng.gen_range(0.0..1.0) * 2.0 * PI / m as f64
        } else {
            0.0
        };
        for q in 0..m {
            let theta = phase + 2.0 * PI * q as f64 / m as f64;
            coords.extend_from_slice(&[rho * theta.cos(), rho * theta.sin(), z]);
            volume.push(cell);
            if last {
                boundary.push(volume.len() - 1);
                area.push(2.0 * PI * rho / m as f64);
            }
        }
    }
    PointCloud::new(3, 2, coords, boundary, volume, area)
}
