use std::f64::consts::PI;

use crate::error::{QgError, Result};

/// Periodic N x N grid on [0, 2pi)^2.
///
/// Nodes are stacked column-wise: node (x, y) has linear index `x + N * y`,
/// so the x index varies fastest. All indices in this crate are 0-based.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    n: usize,
    delta: f64,
}

impl GridSpec {
    pub fn new(n: usize) -> Result<Self> {
        if n < 4 || !n.is_multiple_of(2) {
            return Err(QgError::InvalidGridSize(n));
        }
        Ok(Self {
            n,
            delta: 2.0 * PI / n as f64,
        })
    }

    /// Points per direction.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Grid spacing 2pi/N.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Number of nodes, N^2.
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.n && y < self.n);
        x + self.n * y
    }

    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.n, idx / self.n)
    }

    /// Index of `idx` translated by `(dx, dy)` with periodic wrap.
    pub fn translate(&self, idx: usize, dx: isize, dy: isize) -> usize {
        let n = self.n as isize;
        let (x, y) = self.coords(idx);
        let xs = (x as isize + dx).rem_euclid(n) as usize;
        let ys = (y as isize + dy).rem_euclid(n) as usize;
        self.index(xs, ys)
    }

    /// Torus translation taking node 0 onto `target`, applied to `idx`.
    pub fn shift_to(&self, target: usize, idx: usize) -> usize {
        let (tx, ty) = self.coords(target);
        let (x, y) = self.coords(idx);
        self.index((x + tx) % self.n, (y + ty) % self.n)
    }

    /// Physical coordinates of a node.
    pub fn position(&self, idx: usize) -> (f64, f64) {
        let (x, y) = self.coords(idx);
        (x as f64 * self.delta, y as f64 * self.delta)
    }

    /// Samples `f(x, y)` at every node.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                let (x, y) = self.position(i);
                f(x, y)
            })
            .collect()
    }
}

/// Builds and validates a grid with N points per direction.
pub fn build_grid(n: usize) -> Result<GridSpec> {
    GridSpec::new(n)
}
