//! Closed-form interpolation of a discrete solution to arbitrary points of
//! the manifold:
//!
//! ```text
//! I(x) = [ Σ_j R_t(x,p_j) u_j V_j
//!          - 2t/β Σ_l Rbar_t(x,s_l) (u_l - b_l) A_l
//!          + t Σ_j Rbar_t(x,p_j) f_j V_j ] / Σ_j R_t(x,p_j) V_j
//! ```
//!
//! At a sample point this reproduces the discrete solution exactly.

use std::io::{Read, Write};

use crate::error::{PimError, Result};
use crate::kernel::Kernel;
use crate::neighbors::NeighborIndex;
use crate::operators::{check_beta, check_len};
use crate::pointcloud::io::{csv_error, fmt_real};
use crate::pointcloud::PointCloud;

pub struct Interpolant<'a> {
    cloud: &'a PointCloud,
    kernel: &'a Kernel,
    beta: f64,
    u: Vec<f64>,
    f: Vec<f64>,
    b: Vec<f64>,
    index: NeighborIndex,
}

/// Numerator and denominator of the interpolant together with their
/// ambient gradients.
struct Parts {
    num: f64,
    den: f64,
    grad_num: Vec<f64>,
    grad_den: Vec<f64>,
}

impl<'a> Interpolant<'a> {
    pub fn new(
        cloud: &'a PointCloud,
        kernel: &'a Kernel,
        beta: f64,
        u: Vec<f64>,
        f: Vec<f64>,
        b: Vec<f64>,
    ) -> Result<Self> {
        check_beta(beta)?;
        check_len("solution", u.len(), cloud.len())?;
        check_len("source", f.len(), cloud.len())?;
        check_len("boundary data", b.len(), cloud.boundary_len())?;
        let index = NeighborIndex::build(cloud.coords(), cloud.dim(), kernel.support_radius());
        Ok(Self {
            cloud,
            kernel,
            beta,
            u,
            f,
            b,
            index,
        })
    }

    pub fn solution(&self) -> &[f64] {
        &self.u
    }

    pub fn source(&self) -> &[f64] {
        &self.f
    }

    pub fn cloud(&self) -> &PointCloud {
        self.cloud
    }

    pub fn kernel(&self) -> &Kernel {
        self.kernel
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    fn parts(&self, x: &[f64], with_grad: bool) -> Result<Parts> {
        let d = self.cloud.dim();
        if x.len() != d {
            return Err(PimError::LengthMismatch {
                what: "evaluation point",
                expected: d,
                got: x.len(),
            });
        }
        let t = self.kernel.t();
        let v = self.cloud.volume_weights();
        let a = self.cloud.area_weights();
        let penalty = 2.0 * t / self.beta;
        let mut p = Parts {
            num: 0.0,
            den: 0.0,
            grad_num: vec![0.0; if with_grad { d } else { 0 }],
            grad_den: vec![0.0; if with_grad { d } else { 0 }],
        };
        self.index.for_each_within(x, |j, d2| {
            let r = self.kernel.rt_d2(d2);
            let rbar = self.kernel.rbar_t_d2(d2);
            // Coefficients multiplying R_t and Rbar_t in the numerator.
            let mut c_bar = t * self.f[j] * v[j];
            let c_r = self.u[j] * v[j];
            if let Some(l) = self.cloud.boundary_slot(j) {
                c_bar -= penalty * (self.u[j] - self.b[l]) * a[l];
            }
            p.num += r * c_r + rbar * c_bar;
            p.den += r * v[j];
            if with_grad {
                let (gr, gbar) = self.kernel.grad_coefficients(d2);
                let y = self.cloud.point(j);
                let gn = gr * c_r + gbar * c_bar;
                let gd = gr * v[j];
                for k in 0..d {
                    let dx = x[k] - y[k];
                    p.grad_num[k] += gn * dx;
                    p.grad_den[k] += gd * dx;
                }
            }
        });
        if !(p.den > 0.0) {
            return Err(PimError::OutOfSupport { point: x.to_vec() });
        }
        Ok(p)
    }

    /// Value of the interpolant at `x`. Fails when no sample lies within the
    /// kernel support of `x`.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let p = self.parts(x, false)?;
        Ok(p.num / p.den)
    }

    /// Tangential gradient at `x`. For curved built-in shapes the ambient
    /// gradient is projected onto the tangent plane.
    pub fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        let p = self.parts(x, true)?;
        let value = p.num / p.den;
        let mut g: Vec<f64> = p
            .grad_num
            .iter()
            .zip(&p.grad_den)
            .map(|(gn, gd)| (gn - value * gd) / p.den)
            .collect();
        if let Some(shape) = self.cloud.shape() {
            shape.project_tangent(x, &mut g);
        }
        Ok(g)
    }

    pub fn eval_with_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let v = self.eval(x)?;
        Ok((v, self.grad(x)?))
    }

    /// Reads points from CSV (header `x1,...,xd`) and writes
    /// `x1,...,xd,value,g1,...,gd`.
    pub fn eval_csv<R: Read, W: Write>(&self, input: R, out: &mut W) -> Result<()> {
        let d = self.cloud.dim();
        let coord_names: Vec<String> = (1..=d).map(|a| format!("x{a}")).collect();
        let grad_names: Vec<String> = (1..=d).map(|a| format!("g{a}")).collect();
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(input);
        let header = rdr.headers().map_err(csv_error)?;
        if header.iter().ne(coord_names.iter().map(String::as_str)) {
            return Err(PimError::Parse {
                line: 1,
                msg: format!("expected header {}", coord_names.join(",")),
            });
        }
        writeln!(out, "{},value,{}", coord_names.join(","), grad_names.join(","))?;
        for record in rdr.records() {
            let record = record.map_err(csv_error)?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            if record.len() != d {
                return Err(PimError::Parse {
                    line,
                    msg: format!("expected {d} coordinates, found {}", record.len()),
                });
            }
            let x = record
                .iter()
                .map(|s| {
                    s.parse::<f64>().map_err(|_| PimError::Parse {
                        line,
                        msg: format!("cannot parse coordinate '{s}'"),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            let (value, g) = self.eval_with_grad(&x)?;
            let cols: Vec<String> = x
                .iter()
                .chain(std::iter::once(&value))
                .chain(g.iter())
                .map(|&v| fmt_real(v))
                .collect();
            writeln!(out, "{}", cols.join(","))?;
        }
        Ok(())
    }
}
