// Uniform-grid fixed-radius neighbor search.
//
// Points are bucketed into cubic cells whose side is (slightly larger than)
// the query radius, so a query only has to scan the 3^d cells around the
// query point. The radius is global (the kernel support 2√t), which is why a
// grid beats a tree here.

use std::collections::HashMap;

/// Relative slack on the query radius. Pairs at distance up to
/// `radius * (1 + RADIUS_SLACK)` may be reported; all pairs within `radius`
/// always are.
pub const RADIUS_SLACK: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct NeighborIndex {
    dim: usize,
    radius: f64,
    cell: f64,
    origin: Vec<f64>,
    /// Cells per axis.
    shape: Vec<u64>,
    coords: Vec<f64>,
    /// Point indices sorted by cell, then by index.
    order: Vec<usize>,
    /// Linear cell id -> range into `order`.
    buckets: HashMap<u64, (usize, usize)>,
}

impl NeighborIndex {
    /// Builds the index over a flat coordinate array of dimension `dim`.
    ///
    /// # Panics
    /// If `radius` is not positive or `coords.len()` is not a multiple of `dim`.
    pub fn build(coords: &[f64], dim: usize, radius: f64) -> Self {
        assert!(radius > 0.0 && radius.is_finite(), "radius must be positive");
        assert!(dim > 0 && coords.len() % dim == 0);
        let n = coords.len() / dim;
        // Inflate the cell so that rounding in floor() can never push a point
        // at distance exactly `radius` two cells away.
        let cell = radius * (1.0 + 1e-9);

        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for p in coords.chunks_exact(dim) {
            for a in 0..dim {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        if n == 0 {
            lo.iter_mut().for_each(|v| *v = 0.0);
            hi.iter_mut().for_each(|v| *v = 0.0);
        }
        let mut shape: Vec<u64> = lo
            .iter()
            .zip(&hi)
            .map(|(l, h)| ((h - l) / cell).floor() as u64 + 1)
            .collect();
        // Guard the linearized id against overflow; collapsing the grid only
        // costs speed, never correctness, because every query still filters
        // by exact distance.
        let total: f64 = shape.iter().map(|&s| s as f64).product();
        if total > 1e18 {
            shape.iter_mut().for_each(|s| *s = 1);
        }

        let mut index = Self {
            dim,
            radius,
            cell,
            origin: lo,
            shape,
            coords: coords.to_vec(),
            order: Vec::new(),
            buckets: HashMap::new(),
        };

        let mut keyed: Vec<(u64, usize)> = (0..n)
            .map(|i| (index.linear_id(&index.cell_of(index.point(i))), i))
            .collect();
        keyed.sort_unstable();
        let mut start = 0;
        while start < keyed.len() {
            let id = keyed[start].0;
            let mut end = start;
            while end < keyed.len() && keyed[end].0 == id {
                end += 1;
            }
            index.buckets.insert(id, (start, end));
            start = end;
        }
        index.order = keyed.into_iter().map(|(_, i)| i).collect();
        index
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn cell_count(&self) -> usize {
        self.buckets.len()
    }

    #[inline]
    fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    fn cell_of(&self, x: &[f64]) -> Vec<i64> {
        x.iter()
            .zip(&self.origin)
            .zip(&self.shape)
            .map(|((v, o), &s)| {
                if s == 1 {
                    0
                } else {
                    ((v - o) / self.cell).floor() as i64
                }
            })
            .collect()
    }

    fn linear_id(&self, cell: &[i64]) -> u64 {
        let mut id = 0u64;
        for (c, &s) in cell.iter().zip(&self.shape) {
            id = id * s + *c as u64;
        }
        id
    }

    /// Calls `visit(j, |x - p_j|^2)` for every indexed point within the
    /// radius of `x`. Visiting order is unspecified.
    pub fn for_each_within<F: FnMut(usize, f64)>(&self, x: &[f64], mut visit: F) {
        debug_assert_eq!(x.len(), self.dim);
        let r2 = self.radius * self.radius * (1.0 + RADIUS_SLACK);
        let center = self.cell_of(x);
        let d = self.dim;
        let mut offset = vec![-1i64; d];
        let mut cell = vec![0i64; d];
        'cells: loop {
            let mut inside = true;
            for a in 0..d {
                let c = if self.shape[a] == 1 { 0 } else { center[a] + offset[a] };
                if c < 0 || c >= self.shape[a] as i64 {
                    inside = false;
                }
                cell[a] = c;
            }
            // A collapsed axis has a single cell; only visit it once.
            let duplicate = (0..d).any(|a| self.shape[a] == 1 && offset[a] != 0);
            if inside && !duplicate {
                if let Some(&(s, e)) = self.buckets.get(&self.linear_id(&cell)) {
                    for &j in &self.order[s..e] {
                        let d2 = crate::dist2(x, self.point(j));
                        if d2 <= r2 {
                            visit(j, d2);
                        }
                    }
                }
            }
            // Odometer over {-1, 0, 1}^d.
            for a in 0..d {
                if offset[a] < 1 {
                    offset[a] += 1;
                    continue 'cells;
                }
                offset[a] = -1;
            }
            break;
        }
    }

    /// Indices (ascending) and squared distances of all points within the
    /// radius of `x`.
    pub fn query(&self, x: &[f64]) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        self.for_each_within(x, |j, d2| out.push((j, d2)));
        out.sort_unstable_by_key(|&(j, _)| j);
        out
    }

    /// Neighbors of indexed point `i`, including `i` itself.
    pub fn query_index(&self, i: usize) -> Vec<(usize, f64)> {
        let x = self.point(i).to_vec();
        self.query(&x)
    }
}
