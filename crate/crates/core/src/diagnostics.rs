use crate::arakawa::State;
use crate::error::{check_len, QgError, Result};
use crate::operators::OperatorSet;

/// Conserved-quantity snapshot at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub energy: f64,
    pub enstrophy: f64,
    pub circulation: f64,
    pub third_moment: f64,
    pub mu_hat: Option<f64>,
}

/// Total vorticity, energy, enstrophy and third moment of a state. The
/// stream function is recomputed from `q`.
pub fn invariants(state: &State, ops: &OperatorSet, t: f64) -> Result<DiagnosticsRecord> {
    let d2 = ops.grid().delta().powi(2);
    let psi = ops.stream_function(&state.q, &state.h)?;
    let energy = -0.5
        * psi
            .iter()
            .zip(state.q.iter().zip(&state.h))
            .map(|(p, (q, h))| p * (q - h))
            .sum::<f64>()
        * d2;
    let circulation = state.q.iter().sum::<f64>() * d2;
    let enstrophy = 0.5 * state.q.iter().map(|q| q * q).sum::<f64>() * d2;
    let third_moment = state.q.iter().map(|q| q * q * q).sum::<f64>() * d2 / 3.0;
    Ok(DiagnosticsRecord {
        t,
        energy,
        enstrophy,
        circulation,
        third_moment,
        mu_hat: None,
    })
}

pub const CSV_HEADER: &str = "t,E,Z,C,M3,relE,relZ,absC,absM3,mu_hat";

fn sci(v: f64) -> String {
    format!("{v:.16e}")
}

impl DiagnosticsRecord {
    /// CSV row with errors relative to `initial` (17 significant digits).
    pub fn csv_row(&self, initial: &DiagnosticsRecord) -> String {
        let mu = self.mu_hat.map(sci).unwrap_or_default();
        [
            sci(self.t),
            sci(self.energy),
            sci(self.enstrophy),
            sci(self.circulation),
            sci(self.third_moment),
            sci(self.relative_energy_error(initial)),
            sci(self.relative_enstrophy_error(initial)),
            sci(self.circulation - initial.circulation),
            sci(self.third_moment - initial.third_moment),
            mu,
        ]
        .join(",")
    }

    pub fn relative_energy_error(&self, initial: &DiagnosticsRecord) -> f64 {
        (self.energy - initial.energy) / initial.energy
    }

    pub fn relative_enstrophy_error(&self, initial: &DiagnosticsRecord) -> f64 {
        (self.enstrophy - initial.enstrophy) / initial.enstrophy
    }
}

/// Neumaier-compensated running sum of a field.
#[derive(Debug, Clone, PartialEq)]
pub struct CompensatedSum {
    pub sum: Vec<f64>,
    pub compensation: Vec<f64>,
}

impl CompensatedSum {
    pub fn zeros(len: usize) -> Self {
        Self {
            sum: vec![0.0; len],
            compensation: vec![0.0; len],
        }
    }

    pub fn add(&mut self, values: &[f64]) {
        for ((s, c), &v) in self.sum.iter_mut().zip(self.compensation.iter_mut()).zip(values) {
            let t = *s + v;
            if s.abs() >= v.abs() {
                *c += (*s - t) + v;
            } else {
                *c += (v - t) + *s;
            }
            *s = t;
        }
    }

    pub fn total(&self) -> Vec<f64> {
        self.sum.iter().zip(&self.compensation).map(|(s, c)| s + c).collect()
    }
}

/// Running time averages of `q` and `psi` over steps `start+1..=step`.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragingAccumulator {
    start_step: u64,
    step: u64,
    q: CompensatedSum,
    psi: CompensatedSum,
}

impl AveragingAccumulator {
    pub fn new(len: usize, start_step: u64) -> Self {
        Self {
            start_step,
            step: start_step,
            q: CompensatedSum::zeros(len),
            psi: CompensatedSum::zeros(len),
        }
    }

    /// Rebuilds an accumulator from stored parts (checkpoint restore).
    pub fn from_parts(start_step: u64, step: u64, q: CompensatedSum, psi: CompensatedSum) -> Result<Self> {
        check_len(q.sum.len(), psi.sum.len())?;
        if step < start_step {
            return Err(QgError::BeforeAveragingStart { step, start: start_step });
        }
        Ok(Self { start_step, step, q, psi })
    }

    pub fn start_step(&self) -> u64 {
        self.start_step
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn count(&self) -> u64 {
        self.step - self.start_step
    }

    pub fn q_sum(&self) -> &CompensatedSum {
        &self.q
    }

    pub fn psi_sum(&self) -> &CompensatedSum {
        &self.psi
    }

    /// Adds the sample belonging to step `step`, which must follow the last.
    pub fn accumulate(&mut self, step: u64, q: &[f64], psi: &[f64]) -> Result<()> {
        if step <= self.start_step {
            return Err(QgError::BeforeAveragingStart {
                step,
                start: self.start_step,
            });
        }
        check_len(self.q.sum.len(), q.len())?;
        check_len(self.psi.sum.len(), psi.len())?;
        self.q.add(q);
        self.psi.add(psi);
        self.step = step;
        Ok(())
    }

    pub fn mean_q(&self) -> Vec<f64> {
        let n = self.count().max(1) as f64;
        self.q.total().into_iter().map(|v| v / n).collect()
    }

    pub fn mean_psi(&self) -> Vec<f64> {
        let n = self.count().max(1) as f64;
        self.psi.total().into_iter().map(|v| v / n).collect()
    }

    pub fn estimate_mu(&self) -> Result<f64> {
        if self.count() == 0 {
            return Err(QgError::UndefinedEstimate);
        }
        estimate_mu(&self.mean_q(), &self.mean_psi())
    }
}

/// Least-squares slope of `<q>` against `<psi>`.
pub fn estimate_mu(mean_q: &[f64], mean_psi: &[f64]) -> Result<f64> {
    check_len(mean_q.len(), mean_psi.len())?;
    let pp: f64 = mean_psi.iter().map(|p| p * p).sum();
    if pp.sqrt() <= 1e-14 {
        return Err(QgError::UndefinedEstimate);
    }
    let pq: f64 = mean_psi.iter().zip(mean_q).map(|(p, q)| p * q).sum();
    Ok(pq / pp)
}
