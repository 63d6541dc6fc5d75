use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use liutype_nb::cli_io::{simulation_cells, SimulateConfig, SimulateGrid};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_liutype-nb"))
}

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/collinear_counts.csv")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn fit_prints_all_estimators() {
    let f = fixture();
    let out = run(&["fit", "--data", f.to_str().unwrap(), "--response", "y"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    for label in ["LT(kAM)", "LT(kMAX)", "RR", "LE", "MLE", "condition X'X", "Standard errors"] {
        assert!(text.contains(label), "missing {label}");
    }
}

#[test]
fn fit_writes_report_and_standardizes() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("report.txt");
    let out = run(&[
        "fit",
        "--data",
        f.to_str().unwrap(),
        "--response",
        "y",
        "--theta",
        "1",
        "--standardize",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(std::fs::read_to_string(&out_path).unwrap(), stdout(&out));
}

#[test]
fn intercept_only_fit_reports_log_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("io.csv");
    std::fs::write(&path, "y\n1\n2\n3\n").unwrap();
    let out = run(&["fit", "--data", path.to_str().unwrap(), "--response", "y", "--theta", "1"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("0.6931"));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&run(&[])), 1);
    assert_eq!(code(&run(&["fit", "--response", "y"])), 1);
    assert_eq!(code(&run(&["simulate", "--paper-grid", "--n", "50", "--reps", "1", "--seed", "1", "--out", "x.csv"])), 1);
    let f = fixture();
    let bad_safety = run(&["fit", "--data", f.to_str().unwrap(), "--response", "y", "--safety", "1.5"]);
    assert_eq!(code(&bad_safety), 1);
    let bad_step = run(&[
        "sweep", "--data", f.to_str().unwrap(), "--response", "y", "--param", "k", "--step", "0", "--out", "x.csv",
    ]);
    assert_eq!(code(&bad_step), 1);
}

#[test]
fn data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    assert_eq!(code(&run(&["fit", "--data", missing.to_str().unwrap(), "--response", "y"])), 2);

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "y,x\n1,0.5\n2,abc\n3,1.0\n4,2.0\n").unwrap();
    let out = run(&["fit", "--data", bad.to_str().unwrap(), "--response", "y"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 2"));

    let negative = dir.path().join("neg.csv");
    std::fs::write(&negative, "y,x\n1,0.5\n-2,0.1\n3,1.0\n4,2.0\n").unwrap();
    assert_eq!(code(&run(&["fit", "--data", negative.to_str().unwrap(), "--response", "y"])), 2);

    let f = fixture();
    assert_eq!(code(&run(&["fit", "--data", f.to_str().unwrap(), "--response", "count"])), 2);
}

#[test]
fn collinear_duplicate_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("dup.csv");
    let mut text = String::from("y,a,b\n");
    for i in 0..12 {
        let x = i as f64 * 0.1;
        text.push_str(&format!("{},{x},{x}\n", i % 4));
    }
    std::fs::write(&path, text).unwrap();
    let out = run(&["fit", "--data", path.to_str().unwrap(), "--response", "y", "--theta", "1"]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn simulate_single_rep_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("sim.csv");
    let out = run(&[
        "simulate", "--n", "30", "--p", "2", "--rho", "0.5", "--theta", "1", "--reps", "1", "--seed", "3", "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&out_path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "p,n,rho,theta,estimator,mse,excluded");
    assert_eq!(lines.len(), 6);
}

#[test]
fn simulate_is_byte_identical_across_workers() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for (i, workers) in ["1", "3", "1"].iter().enumerate() {
        let path = dir.path().join(format!("s{i}.csv"));
        let out = run(&[
            "simulate", "--n", "40", "--p", "3", "--rho", "0.95", "--theta", "2", "--reps", "60", "--seed", "99",
            "--workers", workers, "--out", path.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0);
        files.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(files[0], files[1]);
    assert_eq!(files[0], files[2]);
}

#[test]
fn paper_grid_has_thirty_six_cells() {
    let config = SimulateConfig {
        grid: SimulateGrid::Paper,
        reps: 2000,
        seed: 1,
        safety: 0.9,
        workers: None,
        out: PathBuf::from("unused.csv"),
    };
    let cells = simulation_cells(&config).unwrap();
    assert_eq!(cells.len(), 36);
    let mut seeds: Vec<u64> = cells.iter().map(|c| c.seed).collect();
    seeds.sort_unstable();
    seeds.dedup();
    assert_eq!(seeds.len(), 36);
}

#[test]
fn sweep_rows_are_sorted() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("curve.csv");
    let out = run(&[
        "sweep", "--data", f.to_str().unwrap(), "--response", "y", "--theta", "1", "--param", "k", "--from", "0.1",
        "--to", "1.0", "--step", "0.1", "--out", out_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&out_path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "parameter_name,parameter_value,estimator,mse");
    let rows: Vec<(String, f64)> = lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            assert_eq!(f[0], "k");
            (f[2].to_owned(), f[1].parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 20);
    assert!(rows.windows(2).all(|w| (w[0].0.as_str(), w[0].1) < (w[1].0.as_str(), w[1].1)));
}

#[test]
fn check_theorems_at_minus_k_has_no_strict_dominance() {
    let f = fixture();
    let out = run(&[
        "check-theorems", "--data", f.to_str().unwrap(), "--response", "y", "--theta", "1", "--k", "0.5", "--d",
        "-0.5",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let t22 = text.split("T2.3").next().unwrap();
    assert!(t22.contains("difference eigenvalues: 0.0000, 0.0000, 0.0000"), "{t22}");
    assert!(t22.contains("difference positive definite: no"));
}
