//! Batch driver for long simulations: configuration, diagnostics output,
//! checkpoint/resume and the summary table.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::arakawa::{build_template, CoefficientTemplate, Scheme, State};
use crate::diagnostics::{invariants, AveragingAccumulator, CompensatedSum, DiagnosticsRecord, CSV_HEADER};
use crate::error::{QgError, Result};
use crate::grid::GridSpec;
use crate::operators::{build_operators, OperatorSet};
use crate::ordering::{bw_order, commutation_weights, mincom_order, plain_order, OrderingKind, ShearOrdering};
use crate::prediction::{generate_initial, topography, ENERGY_TARGET, ENSTROPHY_TARGET};
use crate::splitting::{check_blowup, Order, Stepper, StepperConfig};

pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const ORDERING_FILE: &str = "ordering.txt";
pub const CONFIG_FILE: &str = "config.txt";
/// Times at which the summary reports the running estimate.
pub const SUMMARY_TIMES: [f64; 3] = [1e4, 1e5, 1e6];
pub const RNG_NAME: &str = "ChaCha8";

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n: usize,
    pub scheme: Scheme,
    pub ordering: OrderingKind,
    /// 1-based first node of the MinCom ordering.
    pub mincom_start: usize,
    pub order: Order,
    pub tau: f64,
    pub t0: f64,
    pub t_end: f64,
    pub seed: u64,
    pub energy: f64,
    pub enstrophy: f64,
    pub diag_every: u64,
    pub checkpoint_every: u64,
    pub output_dir: PathBuf,
    /// Cap on steps taken by one invocation; the run stops with a checkpoint.
    pub max_steps: Option<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n: 8,
            scheme: Scheme::JEZ,
            ordering: OrderingKind::MinCom,
            mincom_start: 1,
            order: Order::Two,
            tau: 0.1,
            t0: 1e3,
            t_end: 1e4,
            seed: 1,
            energy: ENERGY_TARGET,
            enstrophy: ENSTROPHY_TARGET,
            diag_every: 100,
            checkpoint_every: 10_000,
            output_dir: PathBuf::from("out"),
            max_steps: None,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| QgError::Config(format!("bad value for {key}: {value:?}")))
}

impl RunConfig {
    /// Sets one field from a `key`/`value` pair. Keys are case-insensitive.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim().to_ascii_lowercase().as_str() {
            "n" => self.n = parse_value(key, value)?,
            "scheme" => self.scheme = value.parse()?,
            "ordering" | "ordering_tag" => self.ordering = value.parse()?,
            "mincom_start" | "i1" => self.mincom_start = parse_value(key, value)?,
            "order" => self.order = Order::from_int(parse_value(key, value)?)?,
            "tau" => self.tau = parse_value(key, value)?,
            "t0" => self.t0 = parse_value(key, value)?,
            "t_end" => self.t_end = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "energy" | "e_target" => self.energy = parse_value(key, value)?,
            "enstrophy" | "z_target" => self.enstrophy = parse_value(key, value)?,
            "diag_every" => self.diag_every = parse_value(key, value)?,
            "checkpoint_every" => self.checkpoint_every = parse_value(key, value)?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            "max_steps" => {
                self.max_steps = match value {
                    "" | "none" => None,
                    v => Some(parse_value(key, v)?),
                }
            }
            other => return Err(QgError::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Applies an override of the form `key=value`.
    pub fn apply_override(&mut self, kv: &str) -> Result<()> {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| QgError::Config(format!("override {kv:?} is not key=value")))?;
        self.set(k, v)
    }

    /// Parses flat `key = value` text on top of the defaults. `#` starts a
    /// comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            cfg.apply_override(line)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "N = {}", self.n);
        let _ = writeln!(s, "scheme = {}", self.scheme);
        let _ = writeln!(s, "ordering = {}", self.ordering);
        let _ = writeln!(s, "mincom_start = {}", self.mincom_start);
        let _ = writeln!(s, "order = {}", self.order.as_int());
        let _ = writeln!(s, "tau = {:.16e}", self.tau);
        let _ = writeln!(s, "T0 = {:.16e}", self.t0);
        let _ = writeln!(s, "T_end = {:.16e}", self.t_end);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "energy = {:.16e}", self.energy);
        let _ = writeln!(s, "enstrophy = {:.16e}", self.enstrophy);
        let _ = writeln!(s, "diag_every = {}", self.diag_every);
        let _ = writeln!(s, "checkpoint_every = {}", self.checkpoint_every);
        let _ = writeln!(s, "output_dir = {}", self.output_dir.display());
        if let Some(m) = self.max_steps {
            let _ = writeln!(s, "max_steps = {m}");
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        GridSpec::new(self.n)?;
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(QgError::Config(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.t0 >= 0.0 && self.t0 < self.t_end) {
            return Err(QgError::Config(format!(
                "need 0 <= T0 < T_end, got T0 = {}, T_end = {}",
                self.t0, self.t_end
            )));
        }
        if self.diag_every == 0 || self.checkpoint_every == 0 {
            return Err(QgError::Config("diag_every and checkpoint_every must be positive".into()));
        }
        if self.mincom_start == 0 || self.mincom_start > self.n * self.n {
            return Err(QgError::Config(format!(
                "mincom_start must lie in 1..={}, got {}",
                self.n * self.n,
                self.mincom_start
            )));
        }
        if self.energy <= 0.0 || self.enstrophy <= 0.0 {
            return Err(QgError::Config("energy and enstrophy targets must be positive".into()));
        }
        Ok(())
    }

    pub fn averaging_start(&self) -> u64 {
        (self.t0 / self.tau).round() as u64
    }

    pub fn total_steps(&self) -> u64 {
        (self.t_end / self.tau).round() as u64
    }

    /// Hash over the fields that determine the trajectory and its CSV.
    /// `T_end`, output location, checkpoint cadence and the step cap are left
    /// out so that a run can be extended on resume.
    pub fn hash(&self) -> String {
        let canon = format!(
            "N={};scheme={};ordering={};start={};order={};tau={:.16e};T0={:.16e};seed={};E={:.16e};Z={:.16e};diag={}",
            self.n,
            self.scheme,
            self.ordering,
            self.mincom_start,
            self.order.as_int(),
            self.tau,
            self.t0,
            self.seed,
            self.energy,
            self.enstrophy,
            self.diag_every
        );
        hex(&Sha256::digest(canon.as_bytes()))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Builds the shear ordering requested by a configuration.
pub fn build_ordering(
    grid: &GridSpec,
    template: &CoefficientTemplate,
    kind: OrderingKind,
    start_one_based: usize,
) -> Result<ShearOrdering> {
    match kind {
        OrderingKind::Plain => Ok(plain_order(grid)),
        OrderingKind::BW => Ok(bw_order(grid)),
        OrderingKind::MinCom => mincom_order(&commutation_weights(template), start_one_based - 1),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome {
    Completed,
    /// Stopped by the step cap; resumable from the last checkpoint.
    Interrupted,
    BlowUp { t: f64 },
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub outcome: Outcome,
    pub final_step: u64,
    pub final_state: State,
    /// (T, estimate) for the summary times inside the run window.
    pub summary: Vec<(f64, Option<f64>)>,
    pub final_mu: Option<f64>,
    pub max_rel_energy: f64,
    pub max_rel_enstrophy: f64,
    pub last_checkpoint: Option<PathBuf>,
}

struct Context {
    cfg: RunConfig,
    ops: OperatorSet,
    template: CoefficientTemplate,
    ordering: ShearOrdering,
}

impl Context {
    fn new(cfg: &RunConfig) -> Result<Self> {
        cfg.validate()?;
        let grid = GridSpec::new(cfg.n)?;
        let ops = build_operators(grid);
        let template = build_template(cfg.scheme, &ops);
        let ordering = build_ordering(&grid, &template, cfg.ordering, cfg.mincom_start)?;
        Ok(Self {
            cfg: cfg.clone(),
            ops,
            template,
            ordering,
        })
    }
}

/// Everything needed to continue a trajectory.
struct Progress {
    step: u64,
    state: State,
    acc: AveragingAccumulator,
    initial: DiagnosticsRecord,
    max_rel_energy: f64,
    max_rel_enstrophy: f64,
    /// (step, estimate) for each summary time; `None` until reached.
    summary: Vec<(u64, Option<f64>)>,
}

fn summary_slots(cfg: &RunConfig) -> Vec<(u64, Option<f64>)> {
    SUMMARY_TIMES
        .iter()
        .filter(|&&t| t >= cfg.t0 && t <= cfg.t_end)
        .map(|&t| ((t / cfg.tau).round() as u64, None))
        .collect()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_else(|| "-".into())
}

fn checkpoint_path(dir: &Path, step: u64) -> PathBuf {
    dir.join(format!("state_{step}.csv"))
}

fn write_checkpoint(ctx: &Context, p: &Progress) -> Result<PathBuf> {
    let path = checkpoint_path(&ctx.cfg.output_dir, p.step);
    let mut s = String::new();
    let _ = writeln!(s, "# qgsplit checkpoint");
    let _ = writeln!(s, "# config_hash {}", ctx.cfg.hash());
    let _ = writeln!(s, "# step {}", p.step);
    let _ = writeln!(s, "# rng {RNG_NAME} seed {}", ctx.cfg.seed);
    let i = &p.initial;
    let _ = writeln!(
        s,
        "# initial {:.16e} {:.16e} {:.16e} {:.16e}",
        i.energy, i.enstrophy, i.circulation, i.third_moment
    );
    let _ = writeln!(s, "# averaging {} {}", p.acc.start_step(), p.acc.step());
    let _ = writeln!(s, "# drift {:.16e} {:.16e}", p.max_rel_energy, p.max_rel_enstrophy);
    for (step, v) in &p.summary {
        let _ = writeln!(s, "# summary {step} {}", fmt_opt(*v));
    }
    let _ = writeln!(s, "index,q,sum_q,comp_q,sum_psi,comp_psi");
    let (sq, sp) = (p.acc.q_sum(), p.acc.psi_sum());
    for k in 0..p.state.len() {
        let _ = writeln!(
            s,
            "{k},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            p.state.q[k], sq.sum[k], sq.compensation[k], sp.sum[k], sp.compensation[k]
        );
    }
    let checksum = hex(&Sha256::digest(s.as_bytes()));
    let _ = writeln!(s, "# checksum {checksum}");
    fs::write(&path, s)?;
    Ok(path)
}

struct Checkpoint {
    hash: String,
    progress: Progress,
}

fn read_checkpoint(path: &Path, h: Vec<f64>) -> Result<Checkpoint> {
    let bad = |reason: String| QgError::Checkpoint {
        path: path.to_path_buf(),
        reason,
    };
    let text = fs::read_to_string(path).map_err(|e| bad(format!("cannot read: {e}")))?;
    let body_end = text
        .rfind("# checksum ")
        .ok_or_else(|| bad("missing checksum".into()))?;
    let (body, tail) = text.split_at(body_end);
    let stored = tail.trim_start_matches("# checksum ").trim();
    if hex(&Sha256::digest(body.as_bytes())) != stored {
        return Err(bad("checksum mismatch".into()));
    }

    let num = |s: &str| -> Result<f64> { s.parse::<f64>().map_err(|_| bad(format!("bad number {s:?}"))) };
    let int = |s: &str| -> Result<u64> { s.parse::<u64>().map_err(|_| bad(format!("bad integer {s:?}"))) };
    let mut hash = None;
    let mut step = None;
    let mut initial = None;
    let mut averaging = None;
    let mut drift = (0.0, 0.0);
    let mut summary = Vec::new();
    let mut rows: Vec<[f64; 5]> = Vec::new();
    for line in body.lines() {
        if let Some(rest) = line.strip_prefix("# ") {
            let f: Vec<&str> = rest.split_whitespace().collect();
            match f.first().copied() {
                Some("config_hash") if f.len() == 2 => hash = Some(f[1].to_string()),
                Some("step") if f.len() == 2 => step = Some(int(f[1])?),
                Some("initial") if f.len() == 5 => {
                    initial = Some([num(f[1])?, num(f[2])?, num(f[3])?, num(f[4])?]);
                }
                Some("averaging") if f.len() == 3 => averaging = Some((int(f[1])?, int(f[2])?)),
                Some("drift") if f.len() == 3 => drift = (num(f[1])?, num(f[2])?),
                Some("summary") if f.len() == 3 => {
                    let v = if f[2] == "-" { None } else { Some(num(f[2])?) };
                    summary.push((int(f[1])?, v));
                }
                _ => {}
            }
        } else if line.starts_with("index") || line.is_empty() {
            continue;
        } else {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 || int(f[0])? as usize != rows.len() {
                return Err(bad(format!("bad data row {line:?}")));
            }
            rows.push([num(f[1])?, num(f[2])?, num(f[3])?, num(f[4])?, num(f[5])?]);
        }
    }
    let hash = hash.ok_or_else(|| bad("missing config_hash".into()))?;
    let step = step.ok_or_else(|| bad("missing step".into()))?;
    let initial = initial.ok_or_else(|| bad("missing initial invariants".into()))?;
    let (start, acc_step) = averaging.ok_or_else(|| bad("missing averaging line".into()))?;
    if rows.len() != h.len() {
        return Err(bad(format!("expected {} rows, found {}", h.len(), rows.len())));
    }
    let column = |c: usize| rows.iter().map(|r| r[c]).collect::<Vec<f64>>();
    let acc = AveragingAccumulator::from_parts(
        start,
        acc_step,
        CompensatedSum {
            sum: column(1),
            compensation: column(2),
        },
        CompensatedSum {
            sum: column(3),
            compensation: column(4),
        },
    )?;
    Ok(Checkpoint {
        hash,
        progress: Progress {
            step,
            state: State::new(column(0), h)?,
            acc,
            initial: DiagnosticsRecord {
                t: 0.0,
                energy: initial[0],
                enstrophy: initial[1],
                circulation: initial[2],
                third_moment: initial[3],
                mu_hat: None,
            },
            max_rel_energy: drift.0,
            max_rel_enstrophy: drift.1,
            summary,
        },
    })
}

fn write_summary(ctx: &Context, p: &Progress, blown_up: bool) -> Result<()> {
    let cfg = &ctx.cfg;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "# scheme={} order={} tau={} T0={} seed={} rng={RNG_NAME}",
        cfg.scheme,
        cfg.order.as_int(),
        cfg.tau,
        cfg.t0,
        cfg.seed
    );
    let _ = writeln!(s, "{}x{} {}", cfg.n, cfg.n, cfg.ordering);
    for (step, v) in &p.summary {
        let t = *step as f64 * cfg.tau;
        let exp = t.log10().round() as i32;
        let value = match v {
            Some(mu) => format!("{mu:.4}"),
            None if blown_up => "NaN".into(),
            None => "-".into(),
        };
        let _ = writeln!(s, "T=10^{exp} {value}");
    }
    fs::write(cfg.output_dir.join(SUMMARY_FILE), s)?;
    Ok(())
}

fn write_artifacts(ctx: &Context) -> Result<()> {
    fs::create_dir_all(&ctx.cfg.output_dir)?;
    let grid = *ctx.ops.grid();
    ctx.ordering
        .write(&grid, BufWriter::new(File::create(ctx.cfg.output_dir.join(ORDERING_FILE))?))?;
    fs::write(ctx.cfg.output_dir.join(CONFIG_FILE), ctx.cfg.to_text())?;
    Ok(())
}

fn record(ctx: &Context, p: &Progress) -> Result<DiagnosticsRecord> {
    let mut r = invariants(&p.state, &ctx.ops, p.step as f64 * ctx.cfg.tau)?;
    if p.acc.count() > 0 {
        r.mu_hat = p.acc.estimate_mu().ok();
    }
    Ok(r)
}

fn integrate(ctx: &Context, mut p: Progress, csv: &mut BufWriter<File>) -> Result<RunReport> {
    let cfg = &ctx.cfg;
    let stepper = Stepper::new(
        &ctx.template,
        StepperConfig::new(cfg.tau, ctx.ordering.clone(), cfg.order)?,
    )?;
    let total = cfg.total_steps();
    let cap = cfg.max_steps.map(|m| p.step.saturating_add(m)).unwrap_or(u64::MAX);
    let mut last_checkpoint = None;
    let mut outcome = Outcome::Completed;

    while p.step < total {
        if p.step >= cap {
            outcome = Outcome::Interrupted;
            break;
        }
        stepper.step_unchecked(&mut p.state);
        p.step += 1;
        let t = p.step as f64 * cfg.tau;

        if check_blowup(&p.state, t).is_err() {
            let r = record(ctx, &p)?;
            writeln!(csv, "{}", r.csv_row(&p.initial))?;
            writeln!(csv, "# blowup t={t:.16e} step={} max_abs={:e}", p.step, p.state.max_abs())?;
            outcome = Outcome::BlowUp { t };
            break;
        }
        if p.step > p.acc.start_step() {
            let psi = ctx.ops.stream_function(&p.state.q, &p.state.h)?;
            p.acc.accumulate(p.step, &p.state.q, &psi)?;
        }
        if let Some(slot) = p.summary.iter_mut().find(|s| s.0 == p.step) {
            slot.1 = p.acc.estimate_mu().ok();
        }
        if p.step.is_multiple_of(cfg.diag_every) {
            let r = record(ctx, &p)?;
            p.max_rel_energy = p.max_rel_energy.max(r.relative_energy_error(&p.initial).abs());
            p.max_rel_enstrophy = p.max_rel_enstrophy.max(r.relative_enstrophy_error(&p.initial).abs());
            writeln!(csv, "{}", r.csv_row(&p.initial))?;
        }
        if p.step.is_multiple_of(cfg.checkpoint_every) {
            csv.flush()?;
            last_checkpoint = Some(write_checkpoint(ctx, &p)?);
        }
    }
    csv.flush()?;
    let blown_up = matches!(outcome, Outcome::BlowUp { .. });
    if !blown_up && last_checkpoint.as_ref() != Some(&checkpoint_path(&cfg.output_dir, p.step)) {
        last_checkpoint = Some(write_checkpoint(ctx, &p)?);
    }
    write_summary(ctx, &p, blown_up)?;
    Ok(RunReport {
        outcome,
        final_step: p.step,
        final_mu: if p.acc.count() > 0 { p.acc.estimate_mu().ok() } else { None },
        summary: p
            .summary
            .iter()
            .map(|(s, v)| (*s as f64 * cfg.tau, *v))
            .collect(),
        max_rel_energy: p.max_rel_energy,
        max_rel_enstrophy: p.max_rel_enstrophy,
        final_state: p.state,
        last_checkpoint,
    })
}

/// Runs a fresh trajectory from a generated initial condition.
pub fn run(cfg: &RunConfig) -> Result<RunReport> {
    let ctx = Context::new(cfg)?;
    write_artifacts(&ctx)?;
    let grid = *ctx.ops.grid();
    let state = generate_initial(&grid, &ctx.ops, cfg.energy, cfg.enstrophy, cfg.seed)?;
    let initial = invariants(&state, &ctx.ops, 0.0)?;
    let mut csv = BufWriter::new(File::create(cfg.output_dir.join(DIAGNOSTICS_FILE))?);
    writeln!(csv, "{CSV_HEADER}")?;
    writeln!(csv, "{}", initial.csv_row(&initial))?;
    let progress = Progress {
        step: 0,
        acc: AveragingAccumulator::new(state.len(), cfg.averaging_start()),
        state,
        initial,
        max_rel_energy: 0.0,
        max_rel_enstrophy: 0.0,
        summary: summary_slots(cfg),
    };
    integrate(&ctx, progress, &mut csv)
}

/// Drops diagnostics rows written after `step`, keeping the header.
fn truncate_diagnostics(path: &Path, step: u64, tau: f64) -> Result<()> {
    let reader = BufReader::new(File::open(path)?);
    let mut kept = String::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if n > 0 {
            // a trailing blow-up marker belongs to the discarded tail
            if line.starts_with('#') {
                break;
            }
            let t: f64 = line
                .split(',')
                .next()
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| QgError::Parse {
                    path: path.to_path_buf(),
                    reason: format!("line {}: missing time", n + 1),
                })?;
            if (t / tau).round() as u64 > step {
                break;
            }
        }
        kept.push_str(&line);
        kept.push('\n');
    }
    fs::write(path, kept)?;
    Ok(())
}

/// Continues the trajectory stored in `checkpoint`. The configuration must
/// hash to the value recorded there; outputs go to `cfg.output_dir`.
pub fn resume(checkpoint: &Path, cfg: &RunConfig) -> Result<RunReport> {
    let ctx = Context::new(cfg)?;
    let grid = *ctx.ops.grid();
    let cp = read_checkpoint(checkpoint, topography(&grid))?;
    if cp.hash != cfg.hash() {
        return Err(QgError::Checkpoint {
            path: checkpoint.to_path_buf(),
            reason: "configuration hash does not match".into(),
        });
    }
    let mut p = cp.progress;
    // summary slots may differ if T_end changed
    let stored = std::mem::replace(&mut p.summary, summary_slots(cfg));
    for slot in p.summary.iter_mut() {
        if let Some(s) = stored.iter().find(|s| s.0 == slot.0) {
            slot.1 = s.1;
        }
    }
    write_artifacts(&ctx)?;
    let csv_path = cfg.output_dir.join(DIAGNOSTICS_FILE);
    truncate_diagnostics(&csv_path, p.step, cfg.tau)?;
    let mut csv = BufWriter::new(fs::OpenOptions::new().append(true).open(&csv_path)?);
    integrate(&ctx, p, &mut csv)
}

/// Checkpoint with the highest step in `dir`.
pub fn latest_checkpoint(dir: &Path) -> Result<Option<PathBuf>> {
    let mut best: Option<(u64, PathBuf)> = None;
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let step = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_prefix("state_"))
            .and_then(|n| n.strip_suffix(".csv"))
            .and_then(|n| n.parse::<u64>().ok());
        if let Some(s) = step {
            if best.as_ref().is_none_or(|b| s > b.0) {
                best = Some((s, path));
            }
        }
    }
    Ok(best.map(|b| b.1))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(dir: &Path) -> RunConfig {
        RunConfig {
            n: 4,
            t0: 1.0,
            t_end: 5.0,
            diag_every: 5,
            checkpoint_every: 20,
            output_dir: dir.to_path_buf(),
            ..RunConfig::default()
        }
    }

    #[test]
    fn parse_and_override() {
        let cfg = RunConfig::parse("N = 16\n# comment\nordering = BW  \ntau=0.05\nT_end = 2e4\n").unwrap();
        assert_eq!(cfg.n, 16);
        assert_eq!(cfg.ordering, OrderingKind::BW);
        assert_eq!(cfg.tau, 0.05);
        assert_eq!(cfg.t_end, 2e4);
        assert_eq!(cfg.t0, 1e3);
        let mut c2 = cfg.clone();
        c2.apply_override("order=4").unwrap();
        assert_eq!(c2.order, Order::Four);
        assert!(c2.apply_override("bogus=1").is_err());
        assert!(c2.apply_override("tau").is_err());
        let round = RunConfig::parse(&cfg.to_text()).unwrap();
        assert_eq!(round, cfg);
    }

    #[test]
    fn defaults() {
        let c = RunConfig::default();
        assert_eq!((c.tau, c.t0, c.diag_every), (0.1, 1e3, 100));
        assert_eq!(c.averaging_start(), 10_000);
        assert_eq!(c.total_steps(), 100_000);
    }

    #[test]
    fn validation() {
        let mut c = RunConfig {
            t_end: 500.0,
            ..RunConfig::default()
        };
        assert!(matches!(c.validate(), Err(QgError::Config(_))));
        c.t_end = 2e3;
        c.tau = 0.0;
        assert!(matches!(c.validate(), Err(QgError::Config(_))));
        c.tau = 0.1;
        c.n = 7;
        assert!(c.validate().is_err());
        c.n = 8;
        assert!(c.validate().is_ok());
    }

    #[test]
    fn hash_tracks_dynamics_only() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.t_end = 5e4;
        b.output_dir = "elsewhere".into();
        assert_eq!(a.hash(), b.hash());
        b.tau = 0.05;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn small_run_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small(dir.path());
        let rep = run(&cfg).unwrap();
        assert_eq!(rep.outcome, Outcome::Completed);
        assert_eq!(rep.final_step, 50);
        let csv = fs::read_to_string(dir.path().join(DIAGNOSTICS_FILE)).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 1 + 1 + 10);
        // mu appears only once averaging has started
        assert!(lines[1].ends_with(','));
        assert!(!lines.last().unwrap().ends_with(','));
        assert!(dir.path().join(ORDERING_FILE).exists());
        assert!(dir.path().join("state_40.csv").exists());
        assert!(dir.path().join("state_50.csv").exists());
        assert!(fs::read_to_string(dir.path().join(SUMMARY_FILE)).unwrap().contains("4x4 MinCom"));
    }

    #[test]
    fn checkpoint_corruption_detected() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small(dir.path());
        run(&cfg).unwrap();
        let path = dir.path().join("state_20.csv");
        let text = fs::read_to_string(&path).unwrap();
        fs::write(&path, text.replacen("0,", "0,1", 1)).unwrap();
        let err = resume(&path, &cfg).unwrap_err();
        assert!(matches!(err, QgError::Checkpoint { .. }), "{err}");
    }

    #[test]
    fn latest_is_highest_step() {
        let dir = tempfile::tempdir().unwrap();
        run(&small(dir.path())).unwrap();
        assert_eq!(latest_checkpoint(dir.path()).unwrap().unwrap(), dir.path().join("state_50.csv"));
    }
}
