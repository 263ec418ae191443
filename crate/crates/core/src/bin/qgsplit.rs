use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qgsplit::experiment::{self, build_ordering, Outcome, RunReport, CONFIG_FILE};
use qgsplit::prediction::{predict_mu, PredictionInput, TABLE_SIZES};
use qgsplit::{build_operators, build_template, GridSpec, OrderingKind, QgError, RunConfig, Scheme};

#[derive(Parser)]
#[command(name = "qgsplit", version, about = "Volume-preserving splitting for the quasi-geostrophic equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a trajectory and write diagnostics, checkpoints and a summary.
    Run {
        /// Flat `key = value` configuration file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override a key, e.g. `--set tau=0.05`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Continue a run from a checkpoint.
    Resume {
        /// Checkpoint file, or an output directory to use its latest one.
        checkpoint: PathBuf,
        /// Configuration; defaults to the config.txt stored with the run.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Print the predicted mu for a list of truncation sizes.
    Predict {
        #[arg(long = "n", value_delimiter = ',')]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 7.0)]
        energy: f64,
        #[arg(long, default_value_t = 20.0)]
        enstrophy: f64,
        #[arg(long, default_value_t = -0.5, allow_hyphen_values = true)]
        mu0: f64,
        #[arg(long, default_value_t = 1.0)]
        alpha0: f64,
    },
    /// Write a shear ordering file.
    Order {
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long, default_value = "MinCom")]
        kind: OrderingKind,
        #[arg(long, default_value = "JEZ")]
        scheme: Scheme,
        /// 1-based first node for MinCom.
        #[arg(long, default_value_t = 1)]
        start: usize,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also dump the coefficient template to this file.
        #[arg(long)]
        template: Option<PathBuf>,
    },
    /// Run the invariant suite and report each check.
    Verify {
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn exit_code(err: &QgError) -> u8 {
    match err {
        QgError::Config(_) | QgError::InvalidGridSize(_) | QgError::Parse { .. } | QgError::Checkpoint { .. } => 2,
        QgError::BlowUp { .. } => 3,
        QgError::NonConvergence(_) => 4,
        _ => 1,
    }
}

fn load_config(path: Option<&Path>, overrides: &[String]) -> qgsplit::Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    for o in overrides {
        cfg.apply_override(o)?;
    }
    Ok(cfg)
}

fn report(rep: &RunReport) -> u8 {
    for (t, mu) in &rep.summary {
        match mu {
            Some(m) => println!("T={t} mu={m:.4}"),
            None => println!("T={t} mu=-"),
        }
    }
    println!(
        "steps={} max|relE|={:.3e} max|relZ|={:.3e}",
        rep.final_step, rep.max_rel_energy, rep.max_rel_enstrophy
    );
    match rep.outcome {
        Outcome::Completed => 0,
        Outcome::Interrupted => {
            if let Some(cp) = &rep.last_checkpoint {
                println!("stopped at step cap; resume from {}", cp.display());
            }
            0
        }
        Outcome::BlowUp { t } => {
            eprintln!("blow-up at t = {t}");
            3
        }
    }
}

fn execute(cli: Cli) -> qgsplit::Result<u8> {
    match cli.command {
        Command::Run { config, overrides } => {
            let cfg = load_config(config.as_deref(), &overrides)?;
            Ok(report(&experiment::run(&cfg)?))
        }
        Command::Resume {
            checkpoint,
            config,
            overrides,
        } => {
            let checkpoint = if checkpoint.is_dir() {
                experiment::latest_checkpoint(&checkpoint)?.ok_or_else(|| QgError::Checkpoint {
                    path: checkpoint.clone(),
                    reason: "no checkpoint in directory".into(),
                })?
            } else {
                checkpoint
            };
            let stored = checkpoint.parent().unwrap_or(Path::new(".")).join(CONFIG_FILE);
            let path = config.unwrap_or(stored);
            let cfg = load_config(Some(&path), &overrides)?;
            Ok(report(&experiment::resume(&checkpoint, &cfg)?))
        }
        Command::Predict {
            sizes,
            energy,
            enstrophy,
            mu0,
            alpha0,
        } => {
            let sizes = if sizes.is_empty() { TABLE_SIZES.to_vec() } else { sizes };
            println!("N predicted_mu");
            for n in sizes {
                let mut input = PredictionInput::reference(n)?;
                input.energy = energy;
                input.enstrophy = enstrophy;
                let p = predict_mu(&input, mu0, alpha0)?;
                println!("{n} {:.4}", p.mu);
            }
            Ok(0)
        }
        Command::Order {
            n,
            kind,
            scheme,
            start,
            out,
            template,
        } => {
            let grid = GridSpec::new(n)?;
            if start == 0 || start > grid.len() {
                return Err(QgError::Config(format!("start must lie in 1..={}", grid.len())));
            }
            let ops = build_operators(grid);
            let tmpl = build_template(scheme, &ops);
            let ordering = build_ordering(&grid, &tmpl, kind, start)?;
            match out {
                Some(p) => ordering.write(&grid, BufWriter::new(File::create(p)?))?,
                None => ordering.write(&grid, io::stdout().lock())?,
            }
            if let Some(p) = template {
                let mut w = BufWriter::new(File::create(p)?);
                tmpl.dump(&mut w)?;
                w.flush()?;
            }
            Ok(0)
        }
        Command::Verify { n, seed } => {
            let checks = qgsplit::verify::run_suite(n, seed)?;
            let mut failed = 0;
            for c in &checks {
                let tag = if c.passed() { "PASS" } else { "FAIL" };
                println!("{tag} {:<40} {:.3e} (tol {:.0e})", c.name, c.measured, c.tolerance);
                failed += usize::from(!c.passed());
            }
            println!("{} checks, {failed} failed", checks.len());
            Ok(if failed == 0 { 0 } else { 1 })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
