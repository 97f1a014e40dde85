//! Point integral method (PIM) for the Poisson equation with Dirichlet
//! boundary data on point-cloud-sampled manifolds.
//!
//! The Dirichlet condition is imposed through a Robin penalty with parameter
//! `beta`; the resulting nonlocal system is assembled over a compactly
//! supported kernel of bandwidth `t` and solved directly or with restarted
//! GMRES. The solution is lifted back to a smooth function with the closed
//! form interpolant, which is what the error norms in [`analysis`] measure.
//!
//! Typical pipeline:
//!
//! ```no_run
//! use pim_core::prelude::*;
//!
//! let case = ManufacturedCase::sine_interval();
//! let cloud = generate(&case.spec(201)).unwrap();
//! let kernel = Kernel::new(0.004, cloud.intrinsic_dim(), Profile::Cubic).unwrap();
//! let (f, b) = case.sample(&cloud);
//! let system = assemble(&cloud, &kernel, 0.25, &f, &b).unwrap();
//! let report = solve(&system, &SolveOptions::default()).unwrap();
//! let interp = Interpolant::new(&cloud, &kernel, 0.25, report.solution, f, b).unwrap();
//! println!("{}", interp.eval(&[0.5]).unwrap());
//! ```

pub mod analysis;
pub mod assembly;
pub mod diagnostics;
pub mod error;
pub mod interpolate;
pub mod kernel;
pub mod neighbors;
pub mod operators;
pub mod pointcloud;
pub mod solve;

pub use error::{PimError, Result};

pub mod prelude {
    pub use crate::analysis::{
        convergence_sweep, robin_gap_study, Coupling, ErrorNorms, ManufacturedCase,
    };
    pub use crate::assembly::{assemble, Guardrails, LinearSystem};
    pub use crate::error::{PimError, Result};
    pub use crate::interpolate::Interpolant;
    pub use crate::kernel::{Kernel, KernelParams, KernelProfile, Profile};
    pub use crate::neighbors::NeighborIndex;
    pub use crate::pointcloud::{fill_distance, generate, ManifoldSpec, PointCloud, Shape};
    pub use crate::solve::{solve, SolveMethod, SolveOptions, SolveReport};
}

/// Squared Euclidean distance between two points of equal dimension.
#[inline]
pub(crate) fn dist2(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}
