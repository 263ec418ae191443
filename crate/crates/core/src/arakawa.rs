//! Arakawa's semi-discrete Jacobians, evaluated either directly from the
//! difference operators or component by component through the quadratic
//! forms `f_i(q) = (q - h)^T A^i q`.
//!
//! Every `A^i` is the torus translate of `A^1` (the matrix of node 0), so a
//! [`CoefficientTemplate`] keeps only the handful of nonzero columns of that
//! single matrix.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{check_len, QgError, Result};
use crate::grid::GridSpec;
use crate::operators::OperatorSet;

/// Entries at or below this magnitude are treated as structural zeros.
pub const ENTRY_THRESHOLD: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    J0,
    JE,
    JZ,
    JEZ,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::J0, Scheme::JE, Scheme::JZ, Scheme::JEZ];

    /// Upper bound on the nonzero columns of `A^i`.
    pub fn max_columns(self) -> usize {
        match self {
            Scheme::JEZ => 8,
            _ => 4,
        }
    }

    pub fn conserves_energy(self) -> bool {
        matches!(self, Scheme::JE | Scheme::JEZ)
    }

    pub fn conserves_enstrophy(self) -> bool {
        matches!(self, Scheme::JZ | Scheme::JEZ)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Scheme::J0 => "J0",
            Scheme::JE => "JE",
            Scheme::JZ => "JZ",
            Scheme::JEZ => "JEZ",
        };
        f.write_str(s)
    }
}

impl FromStr for Scheme {
    type Err = QgError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "J0" | "0" => Ok(Scheme::J0),
            "JE" | "E" => Ok(Scheme::JE),
            "JZ" | "Z" => Ok(Scheme::JZ),
            "JEZ" | "EZ" => Ok(Scheme::JEZ),
            other => Err(QgError::Config(format!("unknown scheme '{other}'"))),
        }
    }
}

/// Vorticity `q` together with the fixed topography `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub q: Vec<f64>,
    pub h: Vec<f64>,
}

impl State {
    pub fn new(q: Vec<f64>, h: Vec<f64>) -> Result<Self> {
        check_len(q.len(), h.len())?;
        Ok(Self { q, h })
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.q.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().all(|v| v.is_finite())
    }
}

/// Evaluates `J_M(q)` straight from the difference operators.
pub fn eval_direct(scheme: Scheme, state: &State, ops: &OperatorSet) -> Result<Vec<f64>> {
    let len = ops.grid().len();
    check_len(len, state.q.len())?;
    check_len(len, state.h.len())?;
    let q = &state.q;
    let psi = ops.stream_function(q, &state.h)?;

    let j0 = || {
        let (qx, qy) = (ops.apply_dx(q), ops.apply_dy(q));
        let (px, py) = (ops.apply_dx(&psi), ops.apply_dy(&psi));
        (0..len).map(|i| qx[i] * py[i] - qy[i] * px[i]).collect::<Vec<_>>()
    };
    let je = || {
        let (px, py) = (ops.apply_dx(&psi), ops.apply_dy(&psi));
        let a: Vec<f64> = (0..len).map(|i| q[i] * py[i]).collect();
        let b: Vec<f64> = (0..len).map(|i| q[i] * px[i]).collect();
        let (da, db) = (ops.apply_dx(&a), ops.apply_dy(&b));
        (0..len).map(|i| da[i] - db[i]).collect::<Vec<_>>()
    };
    let jz = || {
        let (qx, qy) = (ops.apply_dx(q), ops.apply_dy(q));
        let a: Vec<f64> = (0..len).map(|i| qx[i] * psi[i]).collect();
        let b: Vec<f64> = (0..len).map(|i| qy[i] * psi[i]).collect();
        let (da, db) = (ops.apply_dy(&a), ops.apply_dx(&b));
        (0..len).map(|i| da[i] - db[i]).collect::<Vec<_>>()
    };

    Ok(match scheme {
        Scheme::J0 => j0(),
        Scheme::JE => je(),
        Scheme::JZ => jz(),
        Scheme::JEZ => {
            let (a, b, c) = (j0(), je(), jz());
            (0..len).map(|i| (a[i] + b[i] + c[i]) / 3.0).collect()
        }
    })
}

/// Entry `a^i_{k,l}` of the quadratic form for target node `i`, computed
/// from the dense operators without any shift.
pub fn coefficient_entry(scheme: Scheme, ops: &OperatorSet, i: usize, k: usize, l: usize) -> f64 {
    let dx = &ops.dx;
    let dy = &ops.dy;
    let a0 = || dx[(i, l)] * ops.ly[(i, k)] - dy[(i, l)] * ops.lx[(i, k)];
    let ae = || dx[(i, l)] * ops.ly[(l, k)] - dy[(i, l)] * ops.lx[(l, k)];
    let az = || {
        // row vector Dx(i,:) .* Dy(l,:) - Dy(i,:) .* Dx(l,:) is supported on
        // the four axis neighbours of i
        let g = ops.grid();
        [(1, 0), (-1, 0), (0, 1), (0, -1)]
            .iter()
            .map(|&(sx, sy)| {
                let m = g.translate(i, sx, sy);
                let r = dx[(i, m)] * dy[(l, m)] - dy[(i, m)] * dx[(l, m)];
                r * ops.laplacian_pinv[(m, k)]
            })
            .sum::<f64>()
    };
    match scheme {
        Scheme::J0 => a0(),
        Scheme::JE => ae(),
        Scheme::JZ => az(),
        Scheme::JEZ => (a0() + ae() + az()) / 3.0,
    }
}

/// Sparse column representation of `A^1`, shifted over the torus to give
/// every `A^i`.
#[derive(Debug, Clone)]
pub struct CoefficientTemplate {
    scheme: Scheme,
    grid: GridSpec,
    /// Linear index (offset from node 0) of each stored column.
    offsets: Vec<usize>,
    /// Column values interleaved by row: `values[k * ncols + c]`.
    values: Vec<f64>,
}

impl CoefficientTemplate {
    pub fn build(scheme: Scheme, ops: &OperatorSet) -> Self {
        let grid = *ops.grid();
        let len = grid.len();
        let mut offsets = Vec::new();
        let mut columns: Vec<Vec<f64>> = Vec::new();
        for l in 0..len {
            let mut col: Vec<f64> = (0..len).map(|k| coefficient_entry(scheme, ops, 0, k, l)).collect();
            for v in col.iter_mut() {
                if v.abs() <= ENTRY_THRESHOLD {
                    *v = 0.0;
                }
            }
            if col.iter().any(|&v| v != 0.0) {
                offsets.push(l);
                columns.push(col);
            }
        }
        assert!(
            offsets.len() <= scheme.max_columns(),
            "{scheme} template has {} nonzero columns, expected at most {}",
            offsets.len(),
            scheme.max_columns()
        );
        Self::from_columns(scheme, grid, offsets, &columns)
    }

    fn from_columns(scheme: Scheme, grid: GridSpec, offsets: Vec<usize>, columns: &[Vec<f64>]) -> Self {
        let len = grid.len();
        let ncols = offsets.len();
        let mut values = vec![0.0; len * ncols];
        for (c, col) in columns.iter().enumerate() {
            for k in 0..len {
                values[k * ncols + c] = col[k];
            }
        }
        Self {
            scheme,
            grid,
            offsets,
            values,
        }
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn ncols(&self) -> usize {
        self.offsets.len()
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// Entry `A^1[k, offset_c]`.
    pub fn base_entry(&self, k: usize, c: usize) -> f64 {
        self.values[k * self.ncols() + c]
    }

    /// Dense `A^1` entry for any (k, l).
    pub fn base(&self, k: usize, l: usize) -> f64 {
        match self.offsets.iter().position(|&o| o == l) {
            Some(c) => self.base_entry(k, c),
            None => 0.0,
        }
    }

    /// Entry `A^i[k, l]`, recovered through the inverse shift.
    pub fn entry(&self, i: usize, k: usize, l: usize) -> f64 {
        let g = &self.grid;
        let n = g.n();
        let (ix, iy) = g.coords(i);
        let unshift = |j: usize| {
            let (x, y) = g.coords(j);
            g.index((x + n - ix) % n, (y + n - iy) % n)
        };
        self.base(unshift(k), unshift(l))
    }

    /// Dense `A^i`; intended for small grids and tests.
    pub fn materialize(&self, i: usize) -> DMatrix<f64> {
        let len = self.grid.len();
        let mut a = DMatrix::zeros(len, len);
        let ncols = self.ncols();
        for k in 0..len {
            let sk = self.grid.shift_to(i, k);
            for c in 0..ncols {
                let sl = self.grid.shift_to(i, self.offsets[c]);
                a[(sk, sl)] = self.values[k * ncols + c];
            }
        }
        a
    }

    /// `f_i(q) = (q - h)^T A^i q`.
    #[inline]
    pub fn component_unchecked(&self, i: usize, q: &[f64], h: &[f64]) -> f64 {
        let n = self.grid.n();
        let ncols = self.ncols();
        let (ix, iy) = self.grid.coords(i);
        let mut acc = [0.0_f64; 8];
        let mut k = 0;
        for ky in 0..n {
            let sy = if ky + iy >= n { ky + iy - n } else { ky + iy };
            let row = sy * n;
            // shifted row is the wrap-around of [ix, n) then [0, ix)
            for s in (row + ix..row + n).chain(row..row + ix) {
                let p = q[s] - h[s];
                let vals = &self.values[k * ncols..(k + 1) * ncols];
                for (a, v) in acc.iter_mut().zip(vals) {
                    *a += p * v;
                }
                k += 1;
            }
        }
        self.offsets
            .iter()
            .zip(acc.iter())
            .map(|(&off, a)| q[self.grid.shift_to(i, off)] * a)
            .sum()
    }

    pub fn component(&self, i: usize, state: &State) -> Result<f64> {
        let len = self.grid.len();
        if i >= len {
            return Err(QgError::IndexOutOfRange { index: i, len });
        }
        check_len(len, state.q.len())?;
        check_len(len, state.h.len())?;
        Ok(self.component_unchecked(i, &state.q, &state.h))
    }

    /// The whole vector field assembled from components.
    pub fn eval(&self, state: &State) -> Result<Vec<f64>> {
        (0..self.grid.len()).map(|i| self.component(i, state)).collect()
    }

    /// Gradient of `f_i`: `A^i q + (A^i)^T (q - h)`.
    pub fn component_gradient(&self, i: usize, state: &State) -> Vec<f64> {
        let len = self.grid.len();
        let ncols = self.ncols();
        let mut grad = vec![0.0; len];
        let cols: Vec<usize> = self.offsets.iter().map(|&o| self.grid.shift_to(i, o)).collect();
        for k in 0..len {
            let sk = self.grid.shift_to(i, k);
            let p = state.q[sk] - state.h[sk];
            for c in 0..ncols {
                let v = self.values[k * ncols + c];
                grad[sk] += v * state.q[cols[c]];
                grad[cols[c]] += v * p;
            }
        }
        grad
    }

    /// Trace of the Jacobian of the full vector field.
    pub fn divergence(&self, state: &State) -> f64 {
        (0..self.grid.len())
            .map(|i| self.component_gradient(i, state)[i])
            .sum()
    }

    /// Writes the template as text: a header, then one line per stored
    /// column holding `col_offset idx value` triplets (0-based indices).
    pub fn dump<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "# coefficient template N={} scheme={} ncols={} (0-based linear indices; col_offset idx value)",
            self.grid.n(),
            self.scheme,
            self.ncols()
        )?;
        let len = self.grid.len();
        for (c, off) in self.offsets.iter().enumerate() {
            let mut line = String::new();
            for k in 0..len {
                let v = self.base_entry(k, c);
                if v != 0.0 {
                    if !line.is_empty() {
                        line.push(' ');
                    }
                    line.push_str(&format!("{off} {k} {v:.16e}"));
                }
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn load<R: BufRead>(input: R) -> Result<Self> {
        let bad = |reason: String| QgError::Parse {
            path: "<template>".into(),
            reason,
        };
        let mut lines = input.lines();
        let header = lines.next().ok_or_else(|| bad("empty input".into()))??;
        let field = |key: &str| -> Result<String> {
            header
                .split_whitespace()
                .find_map(|t| t.strip_prefix(key))
                .map(str::to_string)
                .ok_or_else(|| bad(format!("header missing {key}")))
        };
        let n: usize = field("N=")?.parse().map_err(|e| bad(format!("{e}")))?;
        let scheme: Scheme = field("scheme=")?.parse()?;
        let grid = GridSpec::new(n)?;
        let mut offsets = Vec::new();
        let mut columns = Vec::new();
        for line in lines {
            let line = line?;
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.is_empty() || !toks.len().is_multiple_of(3) {
                return Err(bad(format!("bad column line '{line}'")));
            }
            let mut col = vec![0.0; grid.len()];
            let mut off = None;
            for t in toks.chunks(3) {
                let o: usize = t[0].parse().map_err(|e| bad(format!("{e}")))?;
                let k: usize = t[1].parse().map_err(|e| bad(format!("{e}")))?;
                let v: f64 = t[2].parse().map_err(|e| bad(format!("{e}")))?;
                if *off.get_or_insert(o) != o || k >= grid.len() {
                    return Err(bad(format!("inconsistent triplet in '{line}'")));
                }
                col[k] = v;
            }
            offsets.push(off.unwrap());
            columns.push(col);
        }
        Ok(Self::from_columns(scheme, grid, offsets, &columns))
    }
}

pub fn build_template(scheme: Scheme, ops: &OperatorSet) -> CoefficientTemplate {
    CoefficientTemplate::build(scheme, ops)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use crate::operators::build_operators;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_state(len: usize, seed: u64) -> State {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
        let h = (0..len).map(|_| rng.random_range(-0.5..0.5)).collect();
        State::new(q, h).unwrap()
    }

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn constant_vorticity_gives_zero_field() {
        let ops = build_operators(build_grid(8).unwrap());
        let state = State::new(vec![2.5; 64], vec![0.0; 64]).unwrap();
        for scheme in Scheme::ALL {
            let f = eval_direct(scheme, &state, &ops).unwrap();
            assert!(f.iter().all(|v| v.abs() < 1e-13), "{scheme}");
        }
    }

    #[test]
    fn q_equal_h_gives_zero_field() {
        let ops = build_operators(build_grid(8).unwrap());
        let s = random_state(64, 1);
        let state = State::new(s.q.clone(), s.q).unwrap();
        for scheme in Scheme::ALL {
            let f = eval_direct(scheme, &state, &ops).unwrap();
            assert!(f.iter().all(|&v| v == 0.0), "{scheme}");
        }
    }

    #[test]
    fn jez_is_mean_of_others() {
        let ops = build_operators(build_grid(8).unwrap());
        let s = random_state(64, 2);
        let parts: Vec<Vec<f64>> = [Scheme::J0, Scheme::JE, Scheme::JZ]
            .iter()
            .map(|&m| eval_direct(m, &s, &ops).unwrap())
            .collect();
        let ez = eval_direct(Scheme::JEZ, &s, &ops).unwrap();
        for i in 0..64 {
            let mean = (parts[0][i] + parts[1][i] + parts[2][i]) / 3.0;
            assert!((ez[i] - mean).abs() <= 1e-14);
        }
    }

    #[test]
    fn column_counts() {
        let ops = build_operators(build_grid(8).unwrap());
        assert!(build_template(Scheme::JEZ, &ops).ncols() <= 8);
        assert!(build_template(Scheme::JE, &ops).ncols() <= 4);
        assert!(build_template(Scheme::J0, &ops).ncols() <= 4);
        assert!(build_template(Scheme::JZ, &ops).ncols() <= 4);
    }

    #[test]
    fn template_matches_direct() {
        for n in [6, 8] {
            let ops = build_operators(build_grid(n).unwrap());
            for scheme in Scheme::ALL {
                let t = build_template(scheme, &ops);
                let s = random_state(n * n, n as u64 + 10);
                let d = eval_direct(scheme, &s, &ops).unwrap();
                let c = t.eval(&s).unwrap();
                assert!(max_diff(&d, &c) <= 1e-12, "{scheme} N={n}");
            }
        }
    }

    #[test]
    fn component_ignores_own_variable() {
        let ops = build_operators(build_grid(8).unwrap());
        let t = build_template(Scheme::JEZ, &ops);
        let s = random_state(64, 5);
        for i in [0, 9, 37, 63] {
            let base = t.component(i, &s).unwrap();
            let mut p = s.clone();
            p.q[i] += 3.7;
            assert!((t.component(i, &p).unwrap() - base).abs() <= 1e-13);
        }
    }

    #[test]
    fn component_of_constant_is_zero() {
        let ops = build_operators(build_grid(6).unwrap());
        let t = build_template(Scheme::JEZ, &ops);
        let s = State::new(vec![1.3; 36], vec![0.0; 36]).unwrap();
        for i in 0..36 {
            assert!(t.component(i, &s).unwrap().abs() < 1e-13);
        }
    }

    #[test]
    fn component_index_out_of_range() {
        let ops = build_operators(build_grid(4).unwrap());
        let t = build_template(Scheme::JEZ, &ops);
        let s = random_state(16, 0);
        assert!(matches!(t.component(16, &s), Err(QgError::IndexOutOfRange { .. })));
    }

    #[test]
    fn dense_shift_matches_formula() {
        let ops = build_operators(build_grid(4).unwrap());
        for scheme in Scheme::ALL {
            let t = build_template(scheme, &ops);
            for i in 0..16 {
                let a = t.materialize(i);
                for k in 0..16 {
                    for l in 0..16 {
                        let exact = coefficient_entry(scheme, &ops, i, k, l);
                        assert!((a[(k, l)] - exact).abs() < 1e-13);
                    }
                }
            }
        }
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let ops = build_operators(build_grid(6).unwrap());
        let t = build_template(Scheme::JEZ, &ops);
        let s = random_state(36, 8);
        let i = 14;
        let g = t.component_gradient(i, &s);
        let eps = 1e-6;
        for (j, gj) in g.iter().enumerate() {
            let mut p = s.clone();
            let mut m = s.clone();
            p.q[j] += eps;
            m.q[j] -= eps;
            let fd = (t.component(i, &p).unwrap() - t.component(i, &m).unwrap()) / (2.0 * eps);
            assert!((fd - gj).abs() < 1e-8);
        }
        assert_eq!(g[i], 0.0);
    }

    #[test]
    fn dump_and_load() {
        let ops = build_operators(build_grid(6).unwrap());
        let t = build_template(Scheme::JEZ, &ops);
        let mut buf = Vec::new();
        t.dump(&mut buf).unwrap();
        let back = CoefficientTemplate::load(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(back.offsets(), t.offsets());
        assert_eq!(back.values, t.values);
        assert_eq!(back.scheme(), Scheme::JEZ);
    }

    #[test]
    fn scheme_parsing() {
        assert_eq!("jez".parse::<Scheme>().unwrap(), Scheme::JEZ);
        assert_eq!(Scheme::JE.to_string(), "JE");
        assert!("JX".parse::<Scheme>().is_err());
    }
}
