//! Orderings of the canonical shears: sequential, checkerboard and the
//! greedy minimal-commutation ordering.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use crate::arakawa::CoefficientTemplate;
use crate::error::{QgError, Result};
use crate::grid::GridSpec;

/// Commutation weights `c^1_j = sum_k |A^1[j,k]| + |A^1[k,j]|` on the grid;
/// `c^i_j` is the same field translated so that node 0 lands on node `i`.
#[derive(Debug, Clone)]
pub struct CommutationWeight {
    grid: GridSpec,
    c1: Vec<f64>,
}

impl CommutationWeight {
    pub fn from_template(template: &CoefficientTemplate) -> Self {
        let grid = *template.grid();
        let len = grid.len();
        let mut c1 = vec![0.0; len];
        for k in 0..len {
            for (c, &off) in template.offsets().iter().enumerate() {
                let v = template.base_entry(k, c).abs();
                // row k and column `off`
                c1[k] += v;
                c1[off] += v;
            }
        }
        Self { grid, c1 }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// `c^1` indexed by linear node index.
    pub fn base(&self) -> &[f64] {
        &self.c1
    }

    /// `c^i_j`.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let n = self.grid.n();
        let (ix, iy) = self.grid.coords(i);
        let (jx, jy) = self.grid.coords(j);
        self.c1[self.grid.index((jx + n - ix) % n, (jy + n - iy) % n)]
    }

    /// Adds `C^i` into `acc`.
    fn accumulate(&self, i: usize, acc: &mut [f64]) {
        for (j, a) in acc.iter_mut().enumerate() {
            *a += self.weight(i, j);
        }
    }

    /// `C^1` as an N x N array, `grid[x][y]`.
    pub fn to_grid(&self) -> Vec<Vec<f64>> {
        let n = self.grid.n();
        (0..n)
            .map(|x| (0..n).map(|y| self.c1[self.grid.index(x, y)]).collect())
            .collect()
    }
}

pub fn commutation_weights(template: &CoefficientTemplate) -> CommutationWeight {
    CommutationWeight::from_template(template)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OrderingKind {
    Plain,
    BW,
    MinCom,
}

impl fmt::Display for OrderingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OrderingKind::Plain => "Plain",
            OrderingKind::BW => "BW",
            OrderingKind::MinCom => "MinCom",
        })
    }
}

impl FromStr for OrderingKind {
    type Err = QgError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "plain" => Ok(OrderingKind::Plain),
            "bw" => Ok(OrderingKind::BW),
            "mincom" => Ok(OrderingKind::MinCom),
            other => Err(QgError::Config(format!("unknown ordering '{other}'"))),
        }
    }
}

/// Permutation of the node indices (0-based) in which shears are applied.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShearOrdering {
    perm: Vec<usize>,
    kind: OrderingKind,
    start: usize,
}

impl ShearOrdering {
    pub fn new(perm: Vec<usize>, kind: OrderingKind, start: usize) -> Result<Self> {
        let mut seen = vec![false; perm.len()];
        for &p in &perm {
            if p >= perm.len() || seen[p] {
                return Err(QgError::Config(format!(
                    "ordering is not a permutation of 0..{}",
                    perm.len()
                )));
            }
            seen[p] = true;
        }
        Ok(Self { perm, kind, start })
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn kind(&self) -> OrderingKind {
        self.kind
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    /// 1-based labels, as used in external listings.
    pub fn one_based(&self) -> Vec<usize> {
        self.perm.iter().map(|p| p + 1).collect()
    }

    /// Cache format: header `N kind i1`, then 1-based indices.
    pub fn write<W: Write>(&self, grid: &GridSpec, mut out: W) -> Result<()> {
        writeln!(out, "{} {} {}", grid.n(), self.kind, self.start + 1)?;
        let body: Vec<String> = self.one_based().iter().map(|p| p.to_string()).collect();
        writeln!(out, "{}", body.join(" "))?;
        Ok(())
    }

    pub fn read<R: BufRead>(input: R) -> Result<(usize, Self)> {
        let bad = |reason: String| QgError::Parse {
            path: "<ordering>".into(),
            reason,
        };
        let mut lines = input.lines();
        let header = lines.next().ok_or_else(|| bad("empty input".into()))??;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 3 {
            return Err(bad(format!("bad header '{header}'")));
        }
        let n: usize = h[0].parse().map_err(|e| bad(format!("{e}")))?;
        let kind: OrderingKind = h[1].parse()?;
        let start: usize = h[2].parse().map_err(|e| bad(format!("{e}")))?;
        let mut perm = Vec::with_capacity(n * n);
        for line in lines {
            for tok in line?.split_whitespace() {
                let p: usize = tok.parse().map_err(|e| bad(format!("{e}")))?;
                if p == 0 {
                    return Err(bad("indices are 1-based".into()));
                }
                perm.push(p - 1);
            }
        }
        if perm.len() != n * n || start == 0 {
            return Err(bad(format!("expected {} indices, found {}", n * n, perm.len())));
        }
        Ok((n, Self::new(perm, kind, start - 1)?))
    }
}

pub fn plain_order(grid: &GridSpec) -> ShearOrdering {
    ShearOrdering {
        perm: (0..grid.len()).collect(),
        kind: OrderingKind::Plain,
        start: 0,
    }
}

/// Checkerboard: nodes with even `x + y` first, then odd, each in
/// increasing linear index.
pub fn bw_order(grid: &GridSpec) -> ShearOrdering {
    let parity = |i: &usize| {
        let (x, y) = grid.coords(*i);
        (x + y) % 2
    };
    let mut perm: Vec<usize> = (0..grid.len()).filter(|i| parity(i) == 0).collect();
    perm.extend((0..grid.len()).filter(|i| parity(i) == 1));
    ShearOrdering {
        perm,
        kind: OrderingKind::BW,
        start: 0,
    }
}

/// Relative tolerance for treating two cumulative weights as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

fn is_tie(value: f64, min: f64) -> bool {
    (value - min).abs() <= TIE_TOLERANCE * (1.0 + min.abs())
}

/// Greedy ordering of `candidates` seeded at `start`: repeatedly accept every
/// unlisted candidate whose cumulative weight equals the current minimum,
/// ordering such a tie set by a recursive call seeded at its lowest index.
fn order_subset(weights: &CommutationWeight, candidates: &[usize], start: usize) -> Vec<usize> {
    let len = weights.grid().len();
    let mut listed = vec![false; len];
    let mut list = vec![start];
    listed[start] = true;
    let mut newest = vec![start];
    let mut cumulative = vec![0.0; len];

    while list.len() < candidates.len() {
        for &i in &newest {
            weights.accumulate(i, &mut cumulative);
        }
        // `candidates` is ascending, so ties come out in index order
        let remaining: Vec<usize> = candidates.iter().copied().filter(|&j| !listed[j]).collect();
        let min = remaining
            .iter()
            .map(|&j| cumulative[j])
            .fold(f64::INFINITY, f64::min);
        let mut ties: Vec<usize> = remaining
            .into_iter()
            .filter(|&j| is_tie(cumulative[j], min))
            .collect();
        if ties.len() > 1 {
            ties = order_subset(weights, &ties, ties[0]);
        }
        for &j in &ties {
            listed[j] = true;
        }
        list.extend_from_slice(&ties);
        newest = ties;
    }
    list
}

/// Minimal cumulative commutation ordering starting from node `start`.
pub fn mincom_order(weights: &CommutationWeight, start: usize) -> Result<ShearOrdering> {
    let len = weights.grid().len();
    if start >= len {
        return Err(QgError::IndexOutOfRange { index: start, len });
    }
    let all: Vec<usize> = (0..len).collect();
    let perm = order_subset(weights, &all, start);
    ShearOrdering::new(perm, OrderingKind::MinCom, start)
}
