//! Fixed-radius neighbour lookup in the sup norm.
//!
//! Points are bucketed into cells of side `radius`; a query inspects the
//! `3^d` cells around it. One-dimensional data is simply sorted, which is the
//! same thing with contiguous cells. Above [`MAX_GRID_DIM`] dimensions the
//! index degrades to a linear scan.

use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::points::Points;
use crate::{math, Error, Result};

pub const MAX_GRID_DIM: usize = 4;

type CellKey = [i64; MAX_GRID_DIM];

#[derive(Debug, Clone)]
enum Layout {
    Sorted,
    Cells {
        origin: [f64; MAX_GRID_DIM],
        keys: Vec<CellKey>,
        /// `starts[c]..starts[c + 1]` are the rows of cell `c`.
        starts: Vec<usize>,
    },
    Linear,
}

#[derive(Debug, Clone)]
pub struct NeighborIndex {
    dim: usize,
    radius: f64,
    /// Points in bucket order.
    points: Vec<f64>,
    /// `original[i]` is the input row of bucket-ordered row `i`.
    original: Vec<usize>,
    layout: Layout,
}

impl NeighborIndex {
    pub fn build(data: &Points, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::param("radius", "must be positive and finite"));
        }
        let dim = data.dim();
        let n = data.len();
        let mut order: Vec<usize> = (0..n).collect();
        let layout = if dim == 1 {
            let v = data.as_slice();
            order.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
            Layout::Sorted
        } else if dim <= MAX_GRID_DIM {
            let mut origin = [0.0; MAX_GRID_DIM];
            for (j, o) in origin.iter_mut().enumerate().take(dim) {
                *o = data.rows().map(|r| r[j]).fold(f64::INFINITY, f64::min);
                if !o.is_finite() {
                    *o = 0.0;
                }
            }
            let key_of = |r: &[f64]| cell_key(r, &origin, radius);
            let row_keys: Vec<CellKey> = data.rows().map(key_of).collect();
            order.sort_by(|&a, &b| row_keys[a].cmp(&row_keys[b]).then(a.cmp(&b)));
            let mut keys = Vec::new();
            let mut starts = Vec::new();
            for (pos, &i) in order.iter().enumerate() {
                if keys.last() != Some(&row_keys[i]) {
                    keys.push(row_keys[i]);
                    starts.push(pos);
                }
            }
            starts.push(n);
            Layout::Cells { origin, keys, starts }
        } else {
            Layout::Linear
        };
        let mut points = Vec::with_capacity(n * dim);
        for &i in &order {
            points.extend_from_slice(data.row(i));
        }
        Ok(Self {
            dim,
            radius,
            points,
            original: order,
            layout,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.original.len()
    }

    pub fn is_empty(&self) -> bool {
        self.original.is_empty()
    }

    /// Points in bucket order, row-major.
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Calls `f(first_row, run)` with every contiguous run of bucket-ordered
    /// rows that may lie within `radius` of `x`. Runs are a superset of the
    /// true neighbours.
    #[inline]
    pub fn for_each_candidate_run(&self, x: &[f64], mut f: impl FnMut(usize, &[f64])) {
        let d = self.dim;
        match &self.layout {
            Layout::Sorted => {
                let slack = 4.0 * f64::EPSILON * (x[0].abs() + self.radius);
                let lo = x[0] - self.radius - slack;
                let hi = x[0] + self.radius + slack;
                let start = self.points.partition_point(|&v| v < lo);
                let end = start + self.points[start..].partition_point(|&v| v <= hi);
                f(start, &self.points[start..end]);
            }
            Layout::Cells { origin, keys, starts } => {
                let center = cell_key(x, origin, self.radius);
                let total = 3usize.pow(d as u32);
                for combo in 0..total {
                    let mut key = center;
                    let mut c = combo;
                    for k in key.iter_mut().take(d) {
                        *k += (c % 3) as i64 - 1;
                        c /= 3;
                    }
                    if let Ok(cell) = keys.binary_search(&key) {
                        f(starts[cell], &self.points[starts[cell] * d..starts[cell + 1] * d]);
                    }
                }
            }
            Layout::Linear => f(0, &self.points),
        }
    }

    /// Input-row indices of every point with `‖x - X_i‖_∞ ≤ radius`, ascending.
    pub fn within(&self, x: &[f64]) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_candidate_run(x, |offset, run| {
            for (j, row) in run.chunks_exact(self.dim).enumerate() {
                if row.iter().zip(x).all(|(a, b)| (a - b).abs() <= self.radius) {
                    out.push(self.original[offset + j]);
                }
            }
        });
        out.sort_unstable();
        out
    }
}

#[inline]
fn cell_key(x: &[f64], origin: &[f64; MAX_GRID_DIM], side: f64) -> CellKey {
    let mut key = [0i64; MAX_GRID_DIM];
    for (j, k) in key.iter_mut().enumerate().take(x.len()) {
        *k = math::floor((x[j] - origin[j]) / side) as i64;
    }
    key
}
