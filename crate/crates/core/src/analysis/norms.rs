use rayon::prelude::*;

use super::cases::ManufacturedCase;
use crate::error::Result;
use crate::interpolate::Interpolant;
use crate::pointcloud::PointCloud;

/// Errors of an interpolated solution against an exact one, measured with
/// the quadrature of a (finer) reference cloud.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorNorms {
    pub l2: f64,
    pub h1: f64,
    /// L² error over the boundary quadrature.
    pub boundary_l2: f64,
    /// L² norm of the exact solution, for relative errors.
    pub exact_l2: f64,
}

impl ErrorNorms {
    pub fn relative_l2(&self) -> f64 {
        if self.exact_l2 > 0.0 {
            self.l2 / self.exact_l2
        } else {
            self.l2
        }
    }
}

/// `(value, gradient)` of the interpolant at every reference point, in
/// point order.
fn evaluate_all(interp: &Interpolant, reference: &PointCloud) -> Result<Vec<(f64, Vec<f64>)>> {
    (0..reference.len())
        .into_par_iter()
        .map(|q| interp.eval_with_grad(reference.point(q)))
        .collect()
}

/// Error norms of `interp` against an arbitrary exact field.
pub fn field_errors<U, G>(interp: &Interpolant, exact: U, grad: G, reference: &PointCloud) -> Result<ErrorNorms>
where
    U: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    let values = evaluate_all(interp, reference)?;
    let w = reference.volume_weights();
    let (mut l2, mut semi, mut exact_l2) = (0.0, 0.0, 0.0);
    for (q, (v, g)) in values.iter().enumerate() {
        let x = reference.point(q);
        let ue = exact(x);
        let ge = grad(x);
        l2 += (ue - v) * (ue - v) * w[q];
        semi += ge.iter().zip(g).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() * w[q];
        exact_l2 += ue * ue * w[q];
    }
    let a = reference.area_weights();
    let mut boundary = 0.0;
    for (l, &q) in reference.boundary_indices().iter().enumerate() {
        let x = reference.point(q);
        let e = exact(x) - values[q].0;
        boundary += e * e * a[l];
    }
    Ok(ErrorNorms {
        l2: l2.sqrt(),
        h1: (l2 + semi).sqrt(),
        boundary_l2: boundary.sqrt(),
        exact_l2: exact_l2.sqrt(),
    })
}

pub fn error_norms(interp: &Interpolant, case: &ManufacturedCase, reference: &PointCloud) -> Result<ErrorNorms> {
    field_errors(interp, |x| case.exact_u(x), |x| case.grad_u(x), reference)
}

pub fn l2_error(interp: &Interpolant, case: &ManufacturedCase, reference: &PointCloud) -> Result<f64> {
    Ok(error_norms(interp, case, reference)?.l2)
}

pub fn h1_error(interp: &Interpolant, case: &ManufacturedCase, reference: &PointCloud) -> Result<f64> {
    Ok(error_norms(interp, case, reference)?.h1)
}

/// Both sides of the discrete norm-equivalence inequality
///
/// `‖u‖_V + t^{1/4} ‖u‖_A ≤ C (‖I u‖_{H¹} + √h t^{3/4} ‖f‖_∞)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaCheck {
    pub lhs: f64,
    pub interp_h1: f64,
    pub source_term: f64,
    /// `lhs / (interp_h1 + source_term)`, or 0 when both sides vanish.
    pub ratio: f64,
}

pub fn lemma_norm_check(interp: &Interpolant, reference: &PointCloud) -> Result<LemmaCheck> {
    let cloud = interp.cloud();
    let u = interp.solution();
    let t = interp.kernel().t();
    let h = cloud.h()?;
    let v = cloud.volume_weights();
    let a = cloud.area_weights();
    let interior: f64 = u.iter().zip(v).map(|(ui, vi)| ui * ui * vi).sum();
    let boundary: f64 = cloud
        .boundary_indices()
        .iter()
        .zip(a)
        .map(|(&i, al)| u[i] * u[i] * al)
        .sum();
    let lhs = interior.sqrt() + t.powf(0.25) * boundary.sqrt();

    let values = evaluate_all(interp, reference)?;
    let w = reference.volume_weights();
    let h1: f64 = values
        .iter()
        .zip(w)
        .map(|((val, g), wq)| (val * val + g.iter().map(|x| x * x).sum::<f64>()) * wq)
        .sum::<f64>()
        .sqrt();
    let f_inf = interp.source().iter().fold(0.0f64, |m, f| m.max(f.abs()));
    let source_term = h.sqrt() * t.powf(0.75) * f_inf;
    let denom = h1 + source_term;
    let ratio = if denom > 0.0 { lhs / denom } else { 0.0 };
    Ok(LemmaCheck {
        lhs,
        interp_h1: h1,
        source_term,
        ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::assemble;
    use crate::kernel::{Kernel, Profile};
    use crate::pointcloud::{generate, ManifoldSpec};
    use crate::solve::{solve, SolveOptions};

    #[test]
    fn constant_offset_on_unit_interval() {
        let c = generate(&ManifoldSpec::interval(0.0, 1.0, 101)).unwrap();
        let reference = generate(&ManifoldSpec::interval(0.0, 1.0, 401)).unwrap();
        let k = Kernel::new(0.004, 1, Profile::Cubic).unwrap();
        let delta = 0.125;
        let it = Interpolant::new(&c, &k, 0.1, vec![2.0; 101], vec![0.0; 101], vec![2.0, 2.0]).unwrap();
        let same = field_errors(&it, |_| 2.0, |_| vec![0.0], &reference).unwrap();
        assert!(same.l2 < 1e-12 && same.h1 < 1e-10 && same.boundary_l2 < 1e-12);
        let off = field_errors(&it, |_| 2.0 + delta, |_| vec![0.0], &reference).unwrap();
        assert!((off.l2 - delta).abs() < 1e-12);
        // Counting measure on the two endpoints.
        assert!((off.boundary_l2 - delta * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn zero_field_gives_zero_lemma_sides() {
        let c = generate(&ManifoldSpec::interval(0.0, 1.0, 51)).unwrap();
        let reference = generate(&ManifoldSpec::interval(0.0, 1.0, 201)).unwrap();
        let k = Kernel::new(0.004, 1, Profile::Cubic).unwrap();
        let it = Interpolant::new(&c, &k, 0.1, vec![0.0; 51], vec![0.0; 51], vec![0.0, 0.0]).unwrap();
        let check = lemma_norm_check(&it, &reference).unwrap();
        assert_eq!((check.lhs, check.interp_h1, check.source_term, check.ratio), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn lemma_lhs_is_homogeneous() {
        let case = ManufacturedCase::sine_interval();
        let c = generate(&case.spec(101)).unwrap();
        let reference = generate(&case.spec(401)).unwrap();
        let k = Kernel::new(0.002, 1, Profile::Cubic).unwrap();
        let (f, b) = case.sample(&c);
        let s = assemble(&c, &k, 0.05, &f, &b).unwrap();
        let u = solve(&s, &SolveOptions::default()).unwrap().solution;
        let it1 = Interpolant::new(&c, &k, 0.05, u.clone(), f.clone(), b.clone()).unwrap();
        let u2: Vec<f64> = u.iter().map(|x| 2.0 * x).collect();
        let it2 = Interpolant::new(&c, &k, 0.05, u2, f, b).unwrap();
        let l1 = lemma_norm_check(&it1, &reference).unwrap();
        let l2 = lemma_norm_check(&it2, &reference).unwrap();
        assert!((l2.lhs - 2.0 * l1.lhs).abs() <= 1e-14 * l1.lhs);
    }

    /// Composite Simpson on [0, 1] of the squared error, independent of the
    /// reference-cloud quadrature.
    fn simpson_l2(it: &Interpolant, case: &ManufacturedCase, panels: usize) -> (f64, f64) {
        let h = 1.0 / panels as f64;
        let (mut l2, mut semi) = (0.0, 0.0);
        for i in 0..=panels {
            let x = i as f64 * h;
            let w = if i == 0 || i == panels {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            } * h
                / 3.0;
            let e = case.exact_u(&[x]) - it.eval(&[x]).unwrap();
            let g = case.grad_u(&[x])[0] - it.grad(&[x]).unwrap()[0];
            l2 += w * e * e;
            semi += w * g * g;
        }
        (l2.sqrt(), (l2 + semi).sqrt())
    }

    #[test]
    fn reference_quadrature_matches_simpson() {
        let case = ManufacturedCase::sine_interval();
        let c = generate(&case.spec(201)).unwrap();
        let reference = generate(&case.spec(801)).unwrap();
        let (t, beta) = (0.004, 0.25);
        let k = Kernel::new(t, 1, Profile::Cubic).unwrap();
        let (f, b) = case.sample(&c);
        let s = assemble(&c, &k, beta, &f, &b).unwrap();
        let u = solve(&s, &SolveOptions::default()).unwrap().solution;
        let it = Interpolant::new(&c, &k, beta, u, f, b).unwrap();
        let norms = error_norms(&it, &case, &reference).unwrap();
        let (l2, h1) = simpson_l2(&it, &case, 20000);
        assert!((norms.l2 - l2).abs() <= 0.01 * l2, "{} vs {l2}", norms.l2);
        assert!((norms.h1 - h1).abs() <= 0.01 * h1, "{} vs {h1}", norms.h1);
    }
}
