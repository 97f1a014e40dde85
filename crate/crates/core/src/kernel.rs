//! Compactly supported kernel pair `R_t`, `Rbar_t` and their gradients.
//!
//! Both kernels are radial in the squared distance: with
//! `s = |x - y|^2 / (4t)`,
//!
//! ```text
//! R_t(x, y)    = C_t R(s)
//! Rbar_t(x, y) = C_t Rbar(s),   Rbar(r) = ∫_r^∞ R(s) ds
//! C_t          = (4πt)^(-k/2)
//! ```
//!
//! so the support radius of either kernel is exactly `2√t`.

use std::fmt;
use std::sync::Arc;

use crate::error::{PimError, Result};

/// A kernel profile `R` on `[0, ∞)` together with its tail integral.
///
/// Implementations must satisfy: `R` is C², nonnegative, zero for `r > 1`,
/// bounded below by [`lower_bound`](KernelProfile::lower_bound) on `[0, 1/2]`,
/// and `tail(r) = ∫_r^1 R`.
pub trait KernelProfile: Send + Sync {
    fn value(&self, r: f64) -> f64;
    fn tail(&self, r: f64) -> f64;
    fn derivative(&self, r: f64) -> f64;
    /// Positive lower bound of `R` on `[0, 1/2]`.
    fn lower_bound(&self) -> f64;
}

/// Built-in profiles, plus an escape hatch for user-supplied ones.
#[derive(Clone)]
pub enum Profile {
    /// `R(r) = (1 - r)^3`, `Rbar(r) = (1 - r)^4 / 4` on `[0, 1]`.
    Cubic,
    /// `exp(-a r)` minus its second-order Taylor polynomial at `r = 1`,
    /// which makes the profile C² at the cutoff.
    TruncatedGaussian { decay: f64 },
    Custom(Arc<dyn KernelProfile>),
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Cubic => write!(f, "Cubic"),
            Profile::TruncatedGaussian { decay } => {
                write!(f, "TruncatedGaussian {{ decay: {decay} }}")
            }
            Profile::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl Profile {
    pub const DEFAULT_GAUSSIAN_DECAY: f64 = 4.0;

    pub fn truncated_gaussian() -> Self {
        Profile::TruncatedGaussian {
            decay: Self::DEFAULT_GAUSSIAN_DECAY,
        }
    }

    /// Parses the `kernel.profile` config value.
    pub fn from_name(name: &str) -> Result<Self> {
        match name.trim() {
            "cubic" => Ok(Profile::Cubic),
            "truncated_gaussian" => Ok(Profile::truncated_gaussian()),
            other => Err(PimError::InvalidParameter(format!(
                "unknown kernel profile '{other}' (expected cubic or truncated_gaussian)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Profile::Cubic => "cubic",
            Profile::TruncatedGaussian { .. } => "truncated_gaussian",
            Profile::Custom(_) => "custom",
        }
    }
}

impl KernelProfile for Profile {
    #[inline]
    fn value(&self, r: f64) -> f64 {
        match self {
            Profile::Cubic => {
                if (0.0..=1.0).contains(&r) {
                    let q = 1.0 - r;
                    q * q * q
                } else {
                    0.0
                }
            }
            Profile::TruncatedGaussian { decay } => {
                if (0.0..=1.0).contains(&r) {
                    let a = *decay;
                    let u = r - 1.0;
                    let ea = (-a).exp();
                    (-a * r).exp() - ea * (1.0 - a * u + 0.5 * a * a * u * u)
                } else {
                    0.0
                }
            }
            Profile::Custom(p) => p.value(r),
        }
    }

    #[inline]
    fn tail(&self, r: f64) -> f64 {
        match self {
            Profile::Cubic => {
                if (0.0..=1.0).contains(&r) {
                    let q = 1.0 - r;
                    0.25 * q * q * q * q
                } else {
                    0.0
                }
            }
            Profile::TruncatedGaussian { decay } => {
                if (0.0..=1.0).contains(&r) {
                    let a = *decay;
                    let q = 1.0 - r;
                    let ea = (-a).exp();
                    ((-a * r).exp() - ea) / a
                        - ea * (q + 0.5 * a * q * q + a * a * q * q * q / 6.0)
                } else {
                    0.0
                }
            }
            Profile::Custom(p) => p.tail(r),
        }
    }

    #[inline]
    fn derivative(&self, r: f64) -> f64 {
        match self {
            Profile::Cubic => {
                if (0.0..=1.0).contains(&r) {
                    let q = 1.0 - r;
                    -3.0 * q * q
                } else {
                    0.0
                }
            }
            Profile::TruncatedGaussian { decay } => {
                if (0.0..=1.0).contains(&r) {
                    let a = *decay;
                    let u = r - 1.0;
                    let ea = (-a).exp();
                    -a * (-a * r).exp() - ea * (-a + a * a * u)
                } else {
                    0.0
                }
            }
            Profile::Custom(p) => p.derivative(r),
        }
    }

    fn lower_bound(&self) -> f64 {
        match self {
            // R is decreasing on [0, 1], so its minimum over [0, 1/2] is R(1/2).
            Profile::Cubic | Profile::TruncatedGaussian { .. } => self.value(0.5),
            Profile::Custom(p) => p.lower_bound(),
        }
    }
}

/// Bandwidth `t`, intrinsic dimension `k` and the normalizer `C_t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    t: f64,
    k: usize,
    c_t: f64,
}

impl KernelParams {
    pub fn new(t: f64, k: usize) -> Result<Self> {
        if !(t.is_finite() && t > 0.0) {
            return Err(PimError::InvalidParameter(format!(
                "bandwidth t must be positive, got {t}"
            )));
        }
        if k == 0 {
            return Err(PimError::InvalidParameter(
                "intrinsic dimension must be at least 1".into(),
            ));
        }
        Ok(Self {
            t,
            k,
            c_t: Self::normalizer(t, k),
        })
    }

    /// `(4πt)^(-k/2)`.
    pub fn normalizer(t: f64, k: usize) -> f64 {
        (4.0 * std::f64::consts::PI * t).powf(-(k as f64) / 2.0)
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn intrinsic_dim(&self) -> usize {
        self.k
    }

    pub fn c_t(&self) -> f64 {
        self.c_t
    }

    /// Support radius `2√t`.
    pub fn support_radius(&self) -> f64 {
        2.0 * self.t.sqrt()
    }
}

/// A profile bound to a bandwidth; the object every assembly and
/// evaluation routine works with.
#[derive(Debug, Clone)]
pub struct Kernel {
    params: KernelParams,
    profile: Profile,
}

impl Kernel {
    pub fn new(t: f64, k: usize, profile: Profile) -> Result<Self> {
        Ok(Self {
            params: KernelParams::new(t, k)?,
            profile,
        })
    }

    pub fn from_params(params: KernelParams, profile: Profile) -> Self {
        Self { params, profile }
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    pub fn t(&self) -> f64 {
        self.params.t
    }

    pub fn support_radius(&self) -> f64 {
        self.params.support_radius()
    }

    /// Scaled squared distance `|x - y|^2 / 4t`.
    #[inline]
    pub fn scaled(&self, d2: f64) -> f64 {
        d2 / (4.0 * self.params.t)
    }

    /// `R_t` as a function of the squared distance.
    #[inline]
    pub fn rt_d2(&self, d2: f64) -> f64 {
        self.params.c_t * self.profile.value(self.scaled(d2))
    }

    /// `Rbar_t` as a function of the squared distance.
    #[inline]
    pub fn rbar_t_d2(&self, d2: f64) -> f64 {
        self.params.c_t * self.profile.tail(self.scaled(d2))
    }

    #[inline]
    pub fn rt(&self, x: &[f64], y: &[f64]) -> f64 {
        self.rt_d2(crate::dist2(x, y))
    }

    #[inline]
    pub fn rbar_t(&self, x: &[f64], y: &[f64]) -> f64 {
        self.rbar_t_d2(crate::dist2(x, y))
    }

    /// `∇_x R_t(x, y) = C_t R'(s) (x - y) / 2t`.
    pub fn grad_rt(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let s = self.scaled(crate::dist2(x, y));
        let coef = self.params.c_t * self.profile.derivative(s) / (2.0 * self.params.t);
        x.iter().zip(y).map(|(a, b)| coef * (a - b)).collect()
    }

    /// `∇_x Rbar_t(x, y) = -C_t R(s) (x - y) / 2t`, since `Rbar' = -R`.
    pub fn grad_rbar_t(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let s = self.scaled(crate::dist2(x, y));
        let coef = -self.params.c_t * self.profile.value(s) / (2.0 * self.params.t);
        x.iter().zip(y).map(|(a, b)| coef * (a - b)).collect()
    }

    /// Scalar gradient coefficients `(c_R, c_Rbar)` such that the gradients
    /// above equal `c * (x - y)`. Saves allocations in inner loops.
    #[inline]
    pub(crate) fn grad_coefficients(&self, d2: f64) -> (f64, f64) {
        let s = self.scaled(d2);
        let scale = self.params.c_t / (2.0 * self.params.t);
        (
            scale * self.profile.derivative(s),
            -scale * self.profile.value(s),
        )
    }
}
