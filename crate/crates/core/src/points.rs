use alloc::vec::Vec;
use core::ops::Range;

use crate::{Error, Result};

/// A row-major `n × d` matrix of points.
#[derive(Debug, Clone, PartialEq)]
pub struct Points {
    dim: usize,
    data: Vec<f64>,
}

impl Points {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("dim", "must be positive"));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: data.len() % dim,
            });
        }
        Ok(Self { dim, data })
    }

    pub fn zeros(dim: usize, rows: usize) -> Self {
        assert!(dim > 0, "dimension must be positive");
        Self {
            dim,
            data: alloc::vec![0.0; dim * rows],
        }
    }

    /// Builds a one-dimensional point set from scalar values.
    pub fn from_scalars(values: Vec<f64>) -> Self {
        Self { dim: 1, data: values }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> core::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim)
    }

    pub fn rows_mut(&mut self) -> core::slice::ChunksExactMut<'_, f64> {
        self.data.chunks_exact_mut(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Copies out the rows in `range`.
    pub fn slice_rows(&self, range: Range<usize>) -> Points {
        Points {
            dim: self.dim,
            data: self.data[range.start * self.dim..range.end * self.dim].to_vec(),
        }
    }

    /// Concatenates blocks of equal dimension in order.
    pub fn concat(dim: usize, blocks: impl IntoIterator<Item = Points>) -> Result<Points> {
        let mut data = Vec::new();
        for b in blocks {
            if b.dim != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: b.dim,
                });
            }
            data.extend_from_slice(&b.data);
        }
        Points::new(dim, data)
    }

    /// Per-coordinate sample mean.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = alloc::vec![0.0; self.dim];
        for r in self.rows() {
            for (acc, v) in m.iter_mut().zip(r) {
                *acc += v;
            }
        }
        let n = self.len().max(1) as f64;
        m.iter_mut().for_each(|v| *v /= n);
        m
    }

    /// Per-coordinate unbiased sample variance.
    pub fn variance(&self) -> Vec<f64> {
        let mean = self.mean();
        let mut v = alloc::vec![0.0; self.dim];
        for r in self.rows() {
            for ((acc, x), m) in v.iter_mut().zip(r).zip(&mean) {
                *acc += (x - m) * (x - m);
            }
        }
        let denom = (self.len().max(2) - 1) as f64;
        v.iter_mut().for_each(|x| *x /= denom);
        v
    }
}
