//! Predicted slope of the mean vorticity/stream-function relation from the
//! spectrally truncated energy-enstrophy theory, the reference topography,
//! and constrained random initial conditions.

use std::fmt::Write as _;

use nalgebra::{Matrix4, Vector4};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rustfft::{num_complex::Complex, FftPlanner};

use crate::arakawa::State;
use crate::diagnostics::invariants;
use crate::error::{check_len, QgError, Result};
use crate::grid::GridSpec;
use crate::operators::OperatorSet;

pub const ENERGY_TARGET: f64 = 7.0;
pub const ENSTROPHY_TARGET: f64 = 20.0;
/// Truncation sizes of the reference table.
pub const TABLE_SIZES: [usize; 7] = [6, 8, 10, 16, 22, 32, 64];

/// h(x, y) = 0.2 cos x + 0.4 cos 2x sampled at the grid nodes.
pub fn topography(grid: &GridSpec) -> Vec<f64> {
    grid.sample(|x, _| 0.2 * x.cos() + 0.4 * (2.0 * x).cos())
}

/// Unitary 2-D DFT of a grid field: `hat[k + N*l] = (1/N) sum f e^{-i(kx+ly)}`
/// with k, l taken modulo N.
pub fn fourier_coefficients(grid: &GridSpec, field: &[f64]) -> Result<Vec<Complex<f64>>> {
    check_len(grid.len(), field.len())?;
    let n = grid.n();
    let mut buf: Vec<Complex<f64>> = field.iter().map(|&v| Complex::new(v, 0.0)).collect();
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n);
    fft.process(&mut buf);
    let mut column = vec![Complex::new(0.0, 0.0); n];
    for x in 0..n {
        for y in 0..n {
            column[y] = buf[x + n * y];
        }
        fft.process(&mut column);
        for y in 0..n {
            buf[x + n * y] = column[y] / n as f64;
        }
    }
    Ok(buf)
}

/// Whether the (0, 0) mode enters the fluctuation sums. The mean-part terms
/// vanish there for zero-mean topography either way.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZeroMode {
    Include,
    Exclude,
}

#[derive(Debug, Clone)]
pub struct PredictionInput {
    pub n: usize,
    pub energy: f64,
    pub enstrophy: f64,
    /// Unitary coefficients indexed `k + N*l` with k, l modulo N.
    pub h_hat: Vec<Complex<f64>>,
    pub zero_mode: ZeroMode,
}

impl PredictionInput {
    /// Reference configuration: E = 7, Z = 20 and the reference topography.
    pub fn reference(n: usize) -> Result<Self> {
        let grid = GridSpec::new(n)?;
        let h_hat = fourier_coefficients(&grid, &topography(&grid))?;
        Ok(Self {
            n,
            energy: ENERGY_TARGET,
            enstrophy: ENSTROPHY_TARGET,
            h_hat,
            zero_mode: ZeroMode::Include,
        })
    }

    /// Coefficient of mode (k, l) for k, l in -N/2+1..=N/2.
    pub fn coefficient(&self, k: i64, l: i64) -> Complex<f64> {
        let n = self.n as i64;
        self.h_hat[(k.rem_euclid(n) + n * l.rem_euclid(n)) as usize]
    }

    /// (k^2 + l^2, |h_kl|^2) over the retained modes.
    fn modes(&self) -> Vec<(f64, f64)> {
        let half = self.n as i64 / 2;
        let mut out = Vec::with_capacity(self.n * self.n);
        for l in (-half + 1)..=half {
            for k in (-half + 1)..=half {
                if k == 0 && l == 0 && self.zero_mode == ZeroMode::Exclude {
                    continue;
                }
                out.push(((k * k + l * l) as f64, self.coefficient(k, l).norm_sqr()));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionOutput {
    pub mu: f64,
    pub alpha: f64,
    pub residuals: (f64, f64),
    pub iterations: usize,
}

/// Mean parts and fluctuation sums at a given mu, with mu-derivatives.
/// E = em + beta*a, Z = zm + beta*b where beta = 1/(2 alpha).
struct Sums {
    em: f64,
    zm: f64,
    a: f64,
    b: f64,
    dem: f64,
    dzm: f64,
    da: f64,
    db: f64,
}

fn sums(modes: &[(f64, f64)], d2: f64, mu: f64) -> Sums {
    let mut s = Sums {
        em: 0.0,
        zm: 0.0,
        a: 0.0,
        b: 0.0,
        dem: 0.0,
        dzm: 0.0,
        da: 0.0,
        db: 0.0,
    };
    for &(k2, hh) in modes {
        let den = mu + k2;
        let den2 = den * den;
        let den3 = den2 * den;
        s.em += k2 * hh / den2;
        s.zm += mu * mu * hh / den2;
        s.dem += -2.0 * k2 * hh / den3;
        s.dzm += 2.0 * mu * k2 * hh / den3;
        s.a += 1.0 / den;
        s.b += k2 / den;
        s.da += -1.0 / den2;
        s.db += -k2 / den2;
    }
    let w = 0.5 * d2;
    s.em *= w;
    s.zm *= w;
    s.dem *= w;
    s.dzm *= w;
    s
}

pub const PREDICTION_TOLERANCE: f64 = 1e-12;
const MAX_NEWTON: usize = 200;

/// Solves the two truncated energy/enstrophy equations for (mu, alpha) with
/// damped Newton. Steps are halved until every denominator with k^2+l^2 >= 1
/// stays positive, mu keeps the sign of `mu0` (the retained zero mode is a
/// pole at mu = 0), alpha remains positive and the residual does not grow.
pub fn predict_mu(input: &PredictionInput, mu0: f64, alpha0: f64) -> Result<PredictionOutput> {
    if input.energy <= 0.0 || input.enstrophy <= 0.0 {
        return Err(QgError::Config("targets must be positive".into()));
    }
    if mu0 <= -1.0 || mu0 == 0.0 || alpha0 <= 0.0 {
        return Err(QgError::Config(format!(
            "initial guess needs mu0 > -1, mu0 != 0 and alpha0 > 0, got ({mu0}, {alpha0})"
        )));
    }
    let d2 = (2.0 * std::f64::consts::PI / input.n as f64).powi(2);
    let modes = input.modes();
    let min_k2 = modes.iter().map(|m| m.0).filter(|&k| k > 0.0).fold(f64::INFINITY, f64::min);
    let (e, z) = (input.energy, input.enstrophy);
    let residual = |mu: f64, beta: f64| {
        let s = sums(&modes, d2, mu);
        (s.em + beta * s.a - e, s.zm + beta * s.b - z)
    };
    let admissible = |mu: f64, beta: f64| {
        mu + min_k2 > 0.0 && mu.signum() == mu0.signum() && mu != 0.0 && beta > 0.0
    };

    let mut mu = mu0;
    let mut beta = 0.5 / alpha0;
    let mut r = residual(mu, beta);
    for it in 0..MAX_NEWTON {
        let norm = r.0.hypot(r.1);
        if norm <= PREDICTION_TOLERANCE {
            return Ok(PredictionOutput {
                mu,
                alpha: 0.5 / beta,
                residuals: r,
                iterations: it,
            });
        }
        let s = sums(&modes, d2, mu);
        // Jacobian in (mu, beta)
        let j11 = s.dem + beta * s.da;
        let j12 = s.a;
        let j21 = s.dzm + beta * s.db;
        let j22 = s.b;
        let det = j11 * j22 - j12 * j21;
        if det == 0.0 || !det.is_finite() {
            return Err(QgError::NonConvergence(format!("singular Jacobian at mu = {mu}")));
        }
        let dmu = -(j22 * r.0 - j12 * r.1) / det;
        let dbeta = -(-j21 * r.0 + j11 * r.1) / det;
        let mut step = 1.0;
        loop {
            let (m, b) = (mu + step * dmu, beta + step * dbeta);
            if admissible(m, b) {
                let rn = residual(m, b);
                if rn.0.hypot(rn.1) < norm || step < 1e-10 {
                    mu = m;
                    beta = b;
                    r = rn;
                    break;
                }
            }
            step *= 0.5;
            if step < 1e-12 {
                return Err(QgError::NonConvergence(format!("line search stalled at mu = {mu}")));
            }
        }
    }
    Err(QgError::NonConvergence(format!(
        "no convergence after {MAX_NEWTON} iterations, mu = {mu}"
    )))
}

/// Predicted mu for the reference configuration, from a standard start.
pub fn predict_reference(n: usize) -> Result<PredictionOutput> {
    predict_mu(&PredictionInput::reference(n)?, -0.5, 1.0)
}

/// Text table with columns `N predicted_mu`.
pub fn prediction_report(sizes: &[usize]) -> Result<String> {
    let mut out = String::from("N predicted_mu\n");
    for &n in sizes {
        let p = predict_reference(n)?;
        writeln!(out, "{n} {:.4}", p.mu).expect("write to string");
    }
    Ok(out)
}

const MAX_PROJECTION_ITERS: usize = 200;
const MAX_RETRIES: u64 = 10;
pub const CONSTRAINT_TOLERANCE: f64 = 1e-8;

fn constraint_residual(state: &State, ops: &OperatorSet, e: f64, z: f64) -> Result<Vector4<f64>> {
    let r = invariants(state, ops, 0.0)?;
    Ok(Vector4::new(r.circulation, r.third_moment, r.energy - e, r.enstrophy - z))
}

/// Minimum-norm Gauss-Newton projection of `state.q` onto the constraint set.
fn project(state: &mut State, ops: &OperatorSet, e: f64, z: f64) -> Result<bool> {
    let d2 = ops.grid().delta().powi(2);
    let len = state.len();
    let mut r = constraint_residual(state, ops, e, z)?;
    for _ in 0..MAX_PROJECTION_ITERS {
        if r.amax() <= 0.1 * CONSTRAINT_TOLERANCE {
            return Ok(true);
        }
        let psi = ops.stream_function(&state.q, &state.h)?;
        let rows: [Vec<f64>; 4] = [
            vec![d2; len],
            state.q.iter().map(|q| q * q * d2).collect(),
            psi.iter().map(|p| -p * d2).collect(),
            state.q.iter().map(|q| q * d2).collect(),
        ];
        let mut gram = Matrix4::zeros();
        for a in 0..4 {
            for b in 0..4 {
                gram[(a, b)] = rows[a].iter().zip(&rows[b]).map(|(x, y)| x * y).sum();
            }
        }
        let Some(lambda) = gram.lu().solve(&r) else {
            return Ok(false);
        };
        let dq: Vec<f64> = (0..len)
            .map(|i| -(0..4).map(|a| lambda[a] * rows[a][i]).sum::<f64>())
            .collect();
        let norm = r.norm();
        let mut step = 1.0;
        loop {
            let trial = State::new(
                state.q.iter().zip(&dq).map(|(q, d)| q + step * d).collect(),
                state.h.clone(),
            )?;
            let rt = constraint_residual(&trial, ops, e, z)?;
            if rt.norm() < norm {
                *state = trial;
                r = rt;
                break;
            }
            step *= 0.5;
            if step < 1e-8 {
                return Ok(false);
            }
        }
    }
    Ok(r.amax() <= CONSTRAINT_TOLERANCE)
}

/// Random vorticity field over the reference topography with zero first and
/// third moments and the given energy and enstrophy. The draw is a smoothed
/// Gaussian field, scaled to the enstrophy target and then projected onto the
/// constraint set. A failed projection is retried with a fresh draw.
pub fn generate_initial(grid: &GridSpec, ops: &OperatorSet, energy: f64, enstrophy: f64, seed: u64) -> Result<State> {
    if enstrophy <= 0.0 || energy <= 0.0 {
        return Err(QgError::Config("energy and enstrophy targets must be positive".into()));
    }
    check_len(grid.len(), ops.grid().len())?;
    let h = topography(grid);
    let d2 = grid.delta().powi(2);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    for attempt in 0..MAX_RETRIES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(attempt);
        let noise: Vec<f64> = (0..grid.len()).map(|_| normal.sample(&mut rng)).collect();
        // one application of the pseudo-inverse shifts weight to large scales
        let smooth = ops.apply_pseudo_laplacian_inverse(&noise)?;
        let mut q: Vec<f64> = smooth.iter().zip(&noise).map(|(s, n)| s + 0.05 * n).collect();
        let mean = q.iter().sum::<f64>() / q.len() as f64;
        q.iter_mut().for_each(|v| *v -= mean);
        let zq = 0.5 * q.iter().map(|v| v * v).sum::<f64>() * d2;
        let scale = (enstrophy / zq).sqrt();
        q.iter_mut().for_each(|v| *v *= scale);
        let mut state = State::new(q, h.clone())?;
        if project(&mut state, ops, energy, enstrophy)? {
            return Ok(state);
        }
    }
    Err(QgError::NonConvergence(format!(
        "initial condition projection failed after {MAX_RETRIES} draws"
    )))
}
