//! Periodic central differences, the five-point Laplacian and its
//! pseudo-inverse, all materialized as dense N^2 x N^2 matrices.

use nalgebra::{DMatrix, DVector};
use rustfft::{num_complex::Complex, FftPlanner};

use crate::error::{check_len, Result};
use crate::grid::GridSpec;

#[derive(Debug, Clone)]
pub struct OperatorSet {
    grid: GridSpec,
    pub dx: DMatrix<f64>,
    pub dy: DMatrix<f64>,
    pub laplacian: DMatrix<f64>,
    pub laplacian_pinv: DMatrix<f64>,
    pub lx: DMatrix<f64>,
    pub ly: DMatrix<f64>,
    /// First column of the pseudo-inverse on the grid: `kernel[x + N*y]` is
    /// the entry coupling two nodes whose offset is (x, y).
    pinv_kernel: Vec<f64>,
}

/// Eigenvalue of the periodic five-point Laplacian for Fourier mode (k, l).
pub fn laplacian_eigenvalue(grid: &GridSpec, k: usize, l: usize) -> f64 {
    let n = grid.n() as f64;
    let d2 = grid.delta() * grid.delta();
    let theta = |m: usize| 2.0 * std::f64::consts::PI * m as f64 / n;
    (2.0 * theta(k).cos() + 2.0 * theta(l).cos() - 4.0) / d2
}

/// Offset kernel of the Moore-Penrose pseudo-inverse, computed from the
/// circulant eigenstructure with a 2-D inverse FFT. The zero mode is
/// inverted to zero.
fn pinv_kernel(grid: &GridSpec) -> Vec<f64> {
    let n = grid.n();
    let mut buf: Vec<Complex<f64>> = (0..grid.len())
        .map(|idx| {
            let (k, l) = grid.coords(idx);
            if k == 0 && l == 0 {
                Complex::new(0.0, 0.0)
            } else {
                Complex::new(1.0 / laplacian_eigenvalue(grid, k, l), 0.0)
            }
        })
        .collect();

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_inverse(n);
    // rows (x fastest) are contiguous
    fft.process(&mut buf);
    let mut column = vec![Complex::new(0.0, 0.0); n];
    for x in 0..n {
        for y in 0..n {
            column[y] = buf[x + n * y];
        }
        fft.process(&mut column);
        for y in 0..n {
            buf[x + n * y] = column[y];
        }
    }
    let scale = 1.0 / grid.len() as f64;
    buf.into_iter().map(|c| c.re * scale).collect()
}

fn periodic_1d(n: usize, delta: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut d = DMatrix::zeros(n, n);
    let mut d2 = DMatrix::zeros(n, n);
    for i in 0..n {
        let next = (i + 1) % n;
        let prev = (i + n - 1) % n;
        d[(i, next)] += 1.0 / (2.0 * delta);
        d[(i, prev)] -= 1.0 / (2.0 * delta);
        d2[(i, next)] += 1.0 / (delta * delta);
        d2[(i, prev)] += 1.0 / (delta * delta);
        d2[(i, i)] -= 2.0 / (delta * delta);
    }
    (d, d2)
}

impl OperatorSet {
    pub fn new(grid: GridSpec) -> Self {
        let n = grid.n();
        let len = grid.len();
        let (d, d2) = periodic_1d(n, grid.delta());
        let eye = DMatrix::<f64>::identity(n, n);
        let dx = eye.kronecker(&d);
        let dy = d.kronecker(&eye);
        let laplacian = d2.kronecker(&eye) + eye.kronecker(&d2);

        let kernel = pinv_kernel(&grid);
        let laplacian_pinv = DMatrix::from_fn(len, len, |i, j| {
            let (xi, yi) = grid.coords(i);
            let (xj, yj) = grid.coords(j);
            let ox = (xi + n - xj) % n;
            let oy = (yi + n - yj) % n;
            kernel[ox + n * oy]
        });

        // Dx and Dy have two entries per row; form the products row by row.
        let half = 1.0 / (2.0 * grid.delta());
        let mut lx = DMatrix::zeros(len, len);
        let mut ly = DMatrix::zeros(len, len);
        for i in 0..len {
            let (xp, xm) = (grid.translate(i, 1, 0), grid.translate(i, -1, 0));
            let (yp, ym) = (grid.translate(i, 0, 1), grid.translate(i, 0, -1));
            for j in 0..len {
                lx[(i, j)] = half * (laplacian_pinv[(xp, j)] - laplacian_pinv[(xm, j)]);
                ly[(i, j)] = half * (laplacian_pinv[(yp, j)] - laplacian_pinv[(ym, j)]);
            }
        }

        Self {
            grid,
            dx,
            dy,
            laplacian,
            laplacian_pinv,
            lx,
            ly,
            pinv_kernel: kernel,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Pseudo-inverse entry for the node offset (x, y), wrapped.
    pub fn pinv_offset(&self, x: usize, y: usize) -> f64 {
        let n = self.grid.n();
        self.pinv_kernel[(x % n) + n * (y % n)]
    }

    /// Central x-difference via the stencil; identical to `dx * v`.
    pub fn apply_dx(&self, v: &[f64]) -> Vec<f64> {
        let g = &self.grid;
        let half = 1.0 / (2.0 * g.delta());
        (0..g.len())
            .map(|i| half * (v[g.translate(i, 1, 0)] - v[g.translate(i, -1, 0)]))
            .collect()
    }

    pub fn apply_dy(&self, v: &[f64]) -> Vec<f64> {
        let g = &self.grid;
        let half = 1.0 / (2.0 * g.delta());
        (0..g.len())
            .map(|i| half * (v[g.translate(i, 0, 1)] - v[g.translate(i, 0, -1)]))
            .collect()
    }

    pub fn apply_laplacian(&self, v: &[f64]) -> Vec<f64> {
        let g = &self.grid;
        let inv = 1.0 / (g.delta() * g.delta());
        (0..g.len())
            .map(|i| {
                inv * (v[g.translate(i, 1, 0)]
                    + v[g.translate(i, -1, 0)]
                    + v[g.translate(i, 0, 1)]
                    + v[g.translate(i, 0, -1)]
                    - 4.0 * v[i])
            })
            .collect()
    }

    /// Returns `laplacian_pinv * v`, a zero-mean field.
    pub fn apply_pseudo_laplacian_inverse(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.grid.len(), v.len())?;
        let out = &self.laplacian_pinv * DVector::from_column_slice(v);
        Ok(out.as_slice().to_vec())
    }

    /// Stream function psi = pinv(q - h).
    pub fn stream_function(&self, q: &[f64], h: &[f64]) -> Result<Vec<f64>> {
        check_len(self.grid.len(), q.len())?;
        check_len(self.grid.len(), h.len())?;
        let diff: Vec<f64> = q.iter().zip(h).map(|(a, b)| a - b).collect();
        self.apply_pseudo_laplacian_inverse(&diff)
    }
}

pub fn build_operators(grid: GridSpec) -> OperatorSet {
    OperatorSet::new(grid)
}
