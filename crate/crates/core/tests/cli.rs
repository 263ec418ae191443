use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use qgsplit::arakawa::CoefficientTemplate;
use qgsplit::diagnostics::estimate_mu;
use qgsplit::{build_operators, invariants, topography, GridSpec, ShearOrdering, State};

fn qgsplit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qgsplit")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn predict_prints_table() {
    let o = qgsplit(&["predict"]);
    assert!(o.status.success());
    assert_eq!(
        stdout(&o),
        "N predicted_mu\n6 -0.3995\n8 -0.5646\n10 -0.6403\n16 -0.7107\n22 -0.7298\n32 -0.7409\n64 -0.7487\n"
    );
    let o = qgsplit(&["predict", "--n", "8", "--energy", "100", "--enstrophy", "1"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn config_errors_exit_before_stepping() {
    let dir = tempfile::tempdir().unwrap();
    let out = format!("output_dir={}", dir.path().join("o").display());
    let o = qgsplit(&["run", "--set", &out, "--set", "T0=1000", "--set", "T_end=10"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("o").exists());
    let o = qgsplit(&["run", "--set", &out, "--set", "tau=-1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = qgsplit(&["run", "--set", &out, "--set", "N=7"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_and_resume_from_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.cfg");
    fs::write(
        &cfg_path,
        format!(
            "# short run\nN = 4\nT0 = 5\nT_end = 30\ndiag_every = 10\ncheckpoint_every = 100\noutput_dir = {}\n",
            dir.path().join("out").display()
        ),
    )
    .unwrap();
    let cfg = cfg_path.to_str().unwrap();
    let o = qgsplit(&["run", "--config", cfg, "--set", "max_steps=150"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("resume from"));
    let out = dir.path().join("out");
    assert!(out.join("state_150.csv").exists());

    let o = qgsplit(&["resume", out.to_str().unwrap(), "--set", "max_steps=none"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("state_300.csv").exists());
    let resumed = fs::read(out.join("diagnostics.csv")).unwrap();

    let straight = dir.path().join("straight");
    let o = qgsplit(&["run", "--config", cfg, "--set", &format!("output_dir={}", straight.display())]);
    assert!(o.status.success());
    assert_eq!(resumed, fs::read(straight.join("diagnostics.csv")).unwrap());
    assert_eq!(
        fs::read_to_string(out.join("summary.txt")).unwrap(),
        fs::read_to_string(straight.join("summary.txt")).unwrap()
    );

    let o = qgsplit(&["resume", out.join("state_150.csv").to_str().unwrap(), "--set", "seed=9"]);
    assert_eq!(o.status.code(), Some(2));
    let o = qgsplit(&["resume", out.join("state_7.csv").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn blow_up_is_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b");
    let o = qgsplit(&[
        "run",
        "--set",
        &format!("output_dir={}", out.display()),
        "--set",
        "N=4",
        "--set",
        "tau=10",
        "--set",
        "T0=0",
        "--set",
        "T_end=1e5",
        "--set",
        "diag_every=1",
    ]);
    assert_eq!(o.status.code(), Some(3));
    let csv = fs::read_to_string(out.join("diagnostics.csv")).unwrap();
    assert!(csv.lines().last().unwrap().starts_with("# blowup"));
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("T=10^5 NaN"), "{summary}");
}

#[test]
fn order_and_template_files() {
    let dir = tempfile::tempdir().unwrap();
    let ord = dir.path().join("ord.txt");
    let tmpl = dir.path().join("a1.txt");
    let o = qgsplit(&[
        "order",
        "--n",
        "8",
        "--kind",
        "MinCom",
        "--out",
        ord.to_str().unwrap(),
        "--template",
        tmpl.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let (n, ordering) = ShearOrdering::read(fs::read_to_string(&ord).unwrap().as_bytes()).unwrap();
    assert_eq!(n, 8);
    assert_eq!(&ordering.one_based()[..4], &[1, 37, 5, 33]);
    let t = CoefficientTemplate::load(fs::read_to_string(&tmpl).unwrap().as_bytes()).unwrap();
    assert_eq!(t.ncols(), 8);

    let o = qgsplit(&["order", "--n", "4", "--kind", "BW"]);
    assert!(stdout(&o).starts_with("4 BW"));
}

#[test]
fn verify_suite_passes() {
    let o = qgsplit(&["verify", "--n", "6"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("0 failed"));
}

fn parse_checkpoint(path: &Path) -> (u64, Vec<f64>, Vec<f64>, Vec<f64>, u64) {
    let text = fs::read_to_string(path).unwrap();
    let mut step = 0;
    let mut count = 0;
    let (mut q, mut sq, mut sp) = (Vec::new(), Vec::new(), Vec::new());
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("# step ") {
            step = rest.parse().unwrap();
        } else if let Some(rest) = line.strip_prefix("# averaging ") {
            let f: Vec<u64> = rest.split_whitespace().map(|v| v.parse().unwrap()).collect();
            count = f[1] - f[0];
        } else if !line.starts_with('#') && !line.starts_with("index") {
            let f: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
            q.push(f[1]);
            sq.push(f[2] + f[3]);
            sp.push(f[4] + f[5]);
        }
    }
    (step, q, sq, sp, count)
}

#[test]
fn checkpoint_reproduces_diagnostics_and_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c");
    let o = qgsplit(&[
        "run",
        "--set",
        &format!("output_dir={}", out.display()),
        "--set",
        "T0=10",
        "--set",
        "T_end=40",
        "--set",
        "diag_every=50",
        "--set",
        "checkpoint_every=200",
    ]);
    assert!(o.status.success());
    let (step, q, sq, sp, count) = parse_checkpoint(&out.join("state_200.csv"));
    assert_eq!(step, 200);
    let grid = GridSpec::new(8).unwrap();
    let ops = build_operators(grid);
    let state = State::new(q, topography(&grid)).unwrap();
    let rec = invariants(&state, &ops, 20.0).unwrap();

    let csv = fs::read_to_string(out.join("diagnostics.csv")).unwrap();
    let row: Vec<&str> = csv.lines().find(|l| l.starts_with("2.0000000000000000e1,")).unwrap().split(',').collect();
    let value = |k: usize| row[k].parse::<f64>().unwrap();
    assert!((rec.energy - value(1)).abs() <= 1e-14 * value(1).abs());
    assert!((rec.enstrophy - value(2)).abs() <= 1e-14 * value(2).abs());
    assert!((rec.circulation - value(3)).abs() <= 1e-14);
    assert!((rec.third_moment - value(4)).abs() <= 1e-14);

    let c = count as f64;
    let mean_q: Vec<f64> = sq.iter().map(|v| v / c).collect();
    let mean_psi: Vec<f64> = sp.iter().map(|v| v / c).collect();
    let mu = estimate_mu(&mean_q, &mean_psi).unwrap();
    assert_eq!(mu, value(9));
}
