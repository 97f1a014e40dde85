//! Assembly of the discrete Robin-penalty system.
//!
//! Row `i` of the assembled system reads
//!
//! ```text
//! 1/t Σ_j R_t(p_i,p_j)(u_i - u_j) V_j + 2/β Σ_l Rbar_t(p_i,s_l) u(s_l) A_l
//!     = 2/β Σ_l Rbar_t(p_i,s_l) b_l A_l + Σ_j Rbar_t(p_i,p_j) f_j V_j
//! ```
//!
//! with `f = -Δ_M u`. The operator is kept in split form: a weighted graph
//! Laplacian block (off-diagonal weights only) and a boundary penalty block.
//! Applying the split form to a constant vector gives the penalty row sums
//! exactly, with no cancellation error.

use std::io::Write;

use rayon::prelude::*;

use crate::error::Result;
use crate::kernel::Kernel;
use crate::neighbors::NeighborIndex;
use crate::operators::{check_beta, check_len};
use crate::pointcloud::{io::fmt_real, PointCloud};

/// Default size above which the working matrix is kept sparse.
pub const DEFAULT_DENSE_THRESHOLD: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Storage {
    Dense,
    Sparse,
}

/// Runtime warning thresholds for the parameter regime in which the
/// method is known to be stable (`√t/β` and `h/t^{3/2}` small). The
/// theoretical constants are not computable, so these defaults are
/// empirical.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Guardrails {
    pub max_sqrt_t_over_beta: f64,
    pub max_h_over_t32: f64,
}

impl Default for Guardrails {
    fn default() -> Self {
        Self {
            max_sqrt_t_over_beta: 2.0,
            max_h_over_t32: 1000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GuardrailWarning {
    PenaltyTooSmall { sqrt_t_over_beta: f64, limit: f64 },
    UnderResolved { h_over_t32: f64, limit: f64 },
}

impl std::fmt::Display for GuardrailWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GuardrailWarning::PenaltyTooSmall { sqrt_t_over_beta, limit } => write!(
                f,
                "sqrt(t)/beta = {sqrt_t_over_beta:.4} exceeds {limit}; beta is small relative to the kernel width"
            ),
            GuardrailWarning::UnderResolved { h_over_t32, limit } => write!(
                f,
                "h/t^1.5 = {h_over_t32:.4} exceeds {limit}; the cloud is too coarse for this bandwidth"
            ),
        }
    }
}

impl Guardrails {
    pub fn check(&self, t: f64, beta: f64, h: Option<f64>) -> Vec<GuardrailWarning> {
        let mut out = Vec::new();
        let ratio = t.sqrt() / beta;
        if ratio > self.max_sqrt_t_over_beta {
            out.push(GuardrailWarning::PenaltyTooSmall {
                sqrt_t_over_beta: ratio,
                limit: self.max_sqrt_t_over_beta,
            });
        }
        if let Some(h) = h {
            let r = h / t.powf(1.5);
            if r > self.max_h_over_t32 {
                out.push(GuardrailWarning::UnderResolved {
                    h_over_t32: r,
                    limit: self.max_h_over_t32,
                });
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct AssemblyOptions {
    pub dense_threshold: usize,
    pub guardrails: Guardrails,
    /// Use the neighbor index (default). Disabling it scans all pairs,
    /// which is only useful for cross-checking.
    pub use_index: bool,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        Self {
            dense_threshold: DEFAULT_DENSE_THRESHOLD,
            guardrails: Guardrails::default(),
            use_index: true,
        }
    }
}

/// Compressed rows: `cols[offsets[i]..offsets[i+1]]` are the columns of row `i`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RowSparse {
    pub offsets: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl RowSparse {
    fn from_rows(rows: impl IntoIterator<Item = Vec<(usize, f64)>>) -> Self {
        let mut out = RowSparse {
            offsets: vec![0],
            ..Default::default()
        };
        for row in rows {
            for (c, v) in row {
                out.cols.push(c);
                out.vals.push(v);
            }
            out.offsets.push(out.cols.len());
        }
        out
    }

    #[inline]
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[i]..self.offsets[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn rows(&self) -> usize {
        self.offsets.len() - 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemMeta {
    pub t: f64,
    pub beta: f64,
    pub h: Option<f64>,
    /// Stored nonzeros of the materialized matrix over `n²`.
    pub fill_ratio: f64,
    pub storage: Storage,
    pub warnings: Vec<GuardrailWarning>,
}

#[derive(Debug, Clone)]
pub struct LinearSystem {
    n: usize,
    /// Off-diagonal weights `w_ij = R_t(p_i,p_j) V_j / t`, `j ≠ i`.
    laplacian: RowSparse,
    /// Penalty entries `2/β Rbar_t(p_i,s_l) A_l`, keyed by the global index of `s_l`.
    penalty: RowSparse,
    diagonal: Vec<f64>,
    rhs: Vec<f64>,
    meta: SystemMeta,
}

/// Assembles with default options. `f` holds `-Δ_M u` at every sample,
/// `b` the Dirichlet data at every boundary sample.
pub fn assemble(
    cloud: &PointCloud,
    kernel: &Kernel,
    beta: f64,
    f: &[f64],
    b: &[f64],
) -> Result<LinearSystem> {
    assemble_with(cloud, kernel, beta, f, b, &AssemblyOptions::default())
}

struct RowParts {
    laplacian: Vec<(usize, f64)>,
    penalty: Vec<(usize, f64)>,
    diagonal: f64,
    rhs: f64,
}

pub fn assemble_with(
    cloud: &PointCloud,
    kernel: &Kernel,
    beta: f64,
    f: &[f64],
    b: &[f64],
    options: &AssemblyOptions,
) -> Result<LinearSystem> {
    check_beta(beta)?;
    let n = cloud.len();
    check_len("source f", f.len(), n)?;
    check_len("boundary data b", b.len(), cloud.boundary_len())?;

    let t = kernel.t();
    let v = cloud.volume_weights();
    let a = cloud.area_weights();
    let index = options
        .use_index
        .then(|| NeighborIndex::build(cloud.coords(), cloud.dim(), kernel.support_radius()));

    let neighbors = |i: usize| -> Vec<(usize, f64)> {
        match &index {
            Some(idx) => idx.query_index(i),
            None => (0..n)
                .map(|j| (j, crate::dist2(cloud.point(i), cloud.point(j))))
                .collect(),
        }
    };

    let rows: Vec<RowParts> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut laplacian = Vec::new();
            let mut penalty = Vec::new();
            let mut diag = 0.0;
            let mut source = 0.0;
            let mut boundary_rhs = 0.0;
            let mut self_penalty = 0.0;
            for (j, d2) in neighbors(i) {
                let rbar = kernel.rbar_t_d2(d2);
                source += rbar * f[j] * v[j];
                if j != i {
                    let w = kernel.rt_d2(d2) * v[j] / t;
                    if w != 0.0 {
                        laplacian.push((j, w));
                        diag += w;
                    }
                }
                if let Some(l) = cloud.boundary_slot(j) {
                    let c = 2.0 / beta * rbar * a[l];
                    if c != 0.0 {
                        penalty.push((j, c));
                        boundary_rhs += c * b[l];
                        if j == i {
                            self_penalty = c;
                        }
                    }
                }
            }
            RowParts {
                laplacian,
                penalty,
                diagonal: diag + self_penalty,
                rhs: boundary_rhs + source,
            }
        })
        .collect();

    let diagonal: Vec<f64> = rows.iter().map(|r| r.diagonal).collect();
    let rhs: Vec<f64> = rows.iter().map(|r| r.rhs).collect();
    let mut lap_rows = Vec::with_capacity(n);
    let mut pen_rows = Vec::with_capacity(n);
    for r in rows {
        lap_rows.push(r.laplacian);
        pen_rows.push(r.penalty);
    }
    let laplacian = RowSparse::from_rows(lap_rows);
    let penalty = RowSparse::from_rows(pen_rows);

    let h = cloud.recorded_fill_distance();
    let storage = if n > options.dense_threshold {
        Storage::Sparse
    } else {
        Storage::Dense
    };
    let mut system = LinearSystem {
        n,
        laplacian,
        penalty,
        diagonal,
        rhs,
        meta: SystemMeta {
            t,
            beta,
            h,
            fill_ratio: 0.0,
            storage,
            warnings: options.guardrails.check(t, beta, h),
        },
    };
    system.meta.fill_ratio = system.to_csr().nnz() as f64 / (n as f64 * n as f64);
    Ok(system)
}

impl LinearSystem {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn meta(&self) -> &SystemMeta {
        &self.meta
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn laplacian(&self) -> &RowSparse {
        &self.laplacian
    }

    pub fn penalty(&self) -> &RowSparse {
        &self.penalty
    }

    /// Matrix-vector product in split form.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        (0..self.n).into_par_iter().map(|i| self.apply_row(u, i)).collect()
    }

    #[inline]
    fn apply_row(&self, u: &[f64], i: usize) -> f64 {
        let ui = u[i];
        let lap: f64 = self.laplacian.row(i).map(|(j, w)| w * (ui - u[j])).sum();
        let pen: f64 = self.penalty.row(i).map(|(j, c)| c * u[j]).sum();
        lap + pen
    }

    /// Row sums of the penalty block, i.e. `matrix · 1`.
    pub fn penalty_row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.penalty.row(i).map(|(_, c)| c).sum()).collect()
    }

    /// `‖A u - rhs‖₂ / max(‖rhs‖₂, tiny)`.
    pub fn relative_residual(&self, u: &[f64]) -> f64 {
        let au = self.apply(u);
        let r: f64 = au.iter().zip(&self.rhs).map(|(a, b)| (a - b) * (a - b)).sum();
        let b: f64 = self.rhs.iter().map(|v| v * v).sum();
        r.sqrt() / b.sqrt().max(f64::MIN_POSITIVE)
    }

    /// Row-major dense copy of the matrix.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.n;
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            let row = &mut m[i * n..(i + 1) * n];
            for (j, w) in self.laplacian.row(i) {
                row[j] = -w;
            }
            row[i] = self.diagonal[i];
            for (j, c) in self.penalty.row(i) {
                if j != i {
                    row[j] += c;
                }
            }
        }
        m
    }

    /// Merged rows with ascending columns, diagonal included.
    pub fn to_csr(&self) -> RowSparse {
        let rows = (0..self.n).map(|i| {
            let mut row: Vec<(usize, f64)> = self.laplacian.row(i).map(|(j, w)| (j, -w)).collect();
            row.push((i, self.diagonal[i]));
            row.sort_unstable_by_key(|&(j, _)| j);
            for (j, c) in self.penalty.row(i) {
                if j != i {
                    match row.binary_search_by_key(&j, |&(k, _)| k) {
                        Ok(pos) => row[pos].1 += c,
                        Err(pos) => row.insert(pos, (j, c)),
                    }
                }
            }
            row
        });
        RowSparse::from_rows(rows)
    }

    /// Writes the matrix in MatrixMarket coordinate format.
    pub fn write_matrix_market<W: Write>(&self, w: &mut W) -> Result<()> {
        let csr = self.to_csr();
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "% t = {}, beta = {}", self.meta.t, self.meta.beta)?;
        writeln!(w, "{} {} {}", self.n, self.n, csr.nnz())?;
        for i in 0..self.n {
            for (j, v) in csr.row(i) {
                writeln!(w, "{} {} {}", i + 1, j + 1, fmt_real(v))?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::Profile;
    use crate::pointcloud::{generate, ManifoldSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn interval(n: usize) -> PointCloud {
        generate(&ManifoldSpec::interval(0.0, 1.0, n)).unwrap()
    }

    /// Dense O(n²) assembly straight from the row formula, no index.
    fn brute_dense(cloud: &PointCloud, k: &Kernel, beta: f64) -> Vec<f64> {
        let n = cloud.len();
        let t = k.t();
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            let mut diag = 0.0;
            for j in 0..n {
                if j != i {
                    let w = k.rt(cloud.point(i), cloud.point(j)) * cloud.volume_weights()[j] / t;
                    if w != 0.0 {
                        m[i * n + j] = -w;
                        diag += w;
                    }
                }
            }
            m[i * n + i] = diag;
            for (l, &s) in cloud.boundary_indices().iter().enumerate() {
                let c = 2.0 / beta * k.rbar_t(cloud.point(i), cloud.point(s)) * cloud.area_weights()[l];
                m[i * n + s] += c;
            }
        }
        m
    }

    #[test]
    fn zero_data_gives_zero_rhs() {
        let c = interval(31);
        let k = Kernel::new(0.01, 1, Profile::Cubic).unwrap();
        let s = assemble(&c, &k, 0.2, &vec![0.0; 31], &[0.0, 0.0]).unwrap();
        assert!(s.rhs().iter().all(|&r| r == 0.0));
    }

    #[test]
    fn constant_vector_has_zero_residual() {
        let c = generate(&ManifoldSpec::unit_disk(300)).unwrap();
        let k = Kernel::new(0.02, 2, Profile::Cubic).unwrap();
        let cval = 1.75;
        let b = vec![cval; c.boundary_len()];
        let s = assemble(&c, &k, 0.3, &vec![0.0; c.len()], &b).unwrap();
        let u = vec![cval; c.len()];
        let au = s.apply(&u);
        for (x, r) in au.iter().zip(s.rhs()) {
            assert!((x - r).abs() <= 1e-15 * r.abs().max(1.0));
        }
        let ones = s.apply(&vec![1.0; c.len()]);
        assert_eq!(ones, s.penalty_row_sums());
    }

    #[test]
    fn indexed_matches_brute_force_interval() {
        let c = interval(51);
        let k = Kernel::new(0.01, 1, Profile::Cubic).unwrap();
        let s = assemble(&c, &k, 0.25, &vec![0.0; 51], &[0.0, 0.0]).unwrap();
        assert_eq!(s.to_dense(), brute_dense(&c, &k, 0.25));
        assert_eq!(s.meta().storage, Storage::Dense);
    }

    #[test]
    fn indexed_matches_unindexed() {
        let c = generate(&ManifoldSpec::spherical_cap(0.2, 400).with_jitter(0.3, 4)).unwrap();
        let k = Kernel::new(0.01, 2, Profile::truncated_gaussian()).unwrap();
        let f: Vec<f64> = c.points().map(|p| p[2]).collect();
        let b = vec![0.2; c.boundary_len()];
        let a = assemble(&c, &k, 0.2, &f, &b).unwrap();
        let opts = AssemblyOptions {
            use_index: false,
            ..Default::default()
        };
        let z = assemble_with(&c, &k, 0.2, &f, &b, &opts).unwrap();
        assert_eq!(a.to_dense(), z.to_dense());
        assert_eq!(a.rhs(), z.rhs());
    }

    #[test]
    fn laplacian_block_is_graph_laplacian_for_uniform_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 60;
        let coords: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let c = PointCloud::new(2, 2, coords, vec![0, 1], vec![1.0 / n as f64; n], vec![0.1, 0.1]).unwrap();
        let k = Kernel::new(0.02, 2, Profile::Cubic).unwrap();
        let s = assemble(&c, &k, 1.0, &vec![0.0; n], &[0.0, 0.0]).unwrap();
        // (D - W) / (n t), W_ij = R_t(p_i, p_j)
        for i in 0..n {
            let mut deg = 0.0;
            for j in 0..n {
                if i != j {
                    deg += k.rt(c.point(i), c.point(j));
                }
            }
            let lap: Vec<(usize, f64)> = s.laplacian().row(i).collect();
            let ldeg: f64 = lap.iter().map(|(_, w)| w).sum();
            assert!((ldeg - deg / (n as f64 * k.t())).abs() <= 1e-12 * ldeg.max(1.0));
            for (j, w) in lap {
                let want = k.rt(c.point(i), c.point(j)) / (n as f64 * k.t());
                assert!((w - want).abs() <= 1e-13 * want);
            }
        }
    }

    #[test]
    fn quadratic_form_of_laplacian_block_is_nonnegative() {
        let c = generate(&ManifoldSpec::rectangle(1.0, 1.0, 400)).unwrap();
        let k = Kernel::new(0.005, 2, Profile::Cubic).unwrap();
        let s = assemble(&c, &k, 0.2, &vec![0.0; c.len()], &vec![0.0; c.boundary_len()]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10 {
            let u: Vec<f64> = (0..c.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let q: f64 = (0..c.len())
                .map(|i| {
                    let li: f64 = s.laplacian().row(i).map(|(j, w)| w * (u[i] - u[j])).sum();
                    c.volume_weights()[i] * u[i] * li
                })
                .sum();
            assert!(q >= 0.0);
        }
    }

    #[test]
    fn switches_to_sparse_above_threshold() {
        let c = interval(600);
        let k = Kernel::new(0.0005, 1, Profile::Cubic).unwrap();
        let s = assemble(&c, &k, 0.1, &vec![0.0; 600], &[0.0, 0.0]).unwrap();
        assert_eq!(s.meta().storage, Storage::Sparse);
        assert!(s.meta().fill_ratio < 0.2);
    }

    #[test]
    fn rejects_bad_arguments() {
        let c = interval(11);
        let k = Kernel::new(0.01, 1, Profile::Cubic).unwrap();
        let f = vec![0.0; 11];
        assert!(assemble(&c, &k, 0.0, &f, &[0.0, 0.0]).is_err());
        assert!(assemble(&c, &k, -1.0, &f, &[0.0, 0.0]).is_err());
        assert!(assemble(&c, &k, 0.1, &f, &[0.0]).is_err());
        assert!(assemble(&c, &k, 0.1, &f[..5], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn guardrails_flag_small_beta() {
        let g = Guardrails::default();
        assert!(g.check(0.01, 0.1, None).is_empty());
        assert_eq!(g.check(0.01, 0.01, None).len(), 1);
        assert_eq!(g.check(1e-4, 0.1, Some(0.5)).len(), 1);
    }

    #[test]
    fn matrix_market_header() {
        let c = interval(5);
        let k = Kernel::new(0.1, 1, Profile::Cubic).unwrap();
        let s = assemble(&c, &k, 0.5, &vec![0.0; 5], &[0.0, 0.0]).unwrap();
        let mut out = Vec::new();
        s.write_matrix_market(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines().filter(|l| !l.starts_with('%'));
        assert_eq!(lines.next().unwrap(), format!("5 5 {}", s.to_csr().nnz()));
        assert_eq!(lines.count(), s.to_csr().nnz());
    }
}
