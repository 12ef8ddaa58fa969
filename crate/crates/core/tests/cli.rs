use std::path::Path;
use std::process::{Command, Output};

use bangbang_core::artifacts::{read_json, read_trajectory_csv, write_json, SolveArtifact};
use bangbang_core::continuation::ContinuationReport;
use bangbang_core::harness::{read_records, MonteCarloStats};

fn bangbang(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bangbang")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn solve_oscillator_writes_report_and_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let out = bangbang(&[
        "solve", "--problem", "oscillator", "--filter", "l2", "--delta", "1e-8", "--guess", "0.5,0.5,2", "--out-dir",
        path_str(dir.path()),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: SolveArtifact = read_json(&dir.path().join("report.json")).unwrap();
    assert!(report.report.converged);
    assert!((report.cost.unwrap() - 2.4980916).abs() < 1e-4);
    assert_eq!(report.switches, Some(1));

    // report.json is a fixpoint of read → write → read.
    let copy = dir.path().join("copy.json");
    write_json(&copy, &report).unwrap();
    assert_eq!(read_json::<SolveArtifact>(&copy).unwrap(), report);

    let table = read_trajectory_csv(&dir.path().join("trajectory.csv")).unwrap();
    assert_eq!(table.columns, ["t", "x1", "x2", "lambda1", "lambda2", "u", "S"]);
    let t = table.column("t").unwrap();
    assert!((t.last().unwrap() - report.cost.unwrap()).abs() < 1e-12);
}

#[test]
fn usage_and_config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = path_str(dir.path());
    assert_eq!(code(&bangbang(&["solve", "--problem", "pendulum", "--out-dir", d])), 2);
    assert_eq!(code(&bangbang(&["solve", "--guess", "0.5,0.5", "--out-dir", d])), 2);
    assert_eq!(code(&bangbang(&["solve", "--filter", "tanh", "--delta", "1e-3", "--out-dir", d])), 2);
    assert_eq!(code(&bangbang(&["solve", "--filter", "cubic", "--out-dir", d])), 2);
    assert_eq!(code(&bangbang(&["frobnicate"])), 2);
    assert_eq!(code(&bangbang(&["montecarlo", "-n", "0", "--out-dir", d])), 2);
    assert_eq!(code(&bangbang(&["continue", "--start", "1e-3", "--floor", "1e-2", "--out-dir", d])), 2);

    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "problem = \"oscillator\"\n[schedule]\nstart = 1e-3\nfloor = 1.0\n").unwrap();
    assert_eq!(code(&bangbang(&["continue", "--config", path_str(&cfg), "--out-dir", d])), 2);
    std::fs::write(&cfg, "problem = \"gto-geo\"\n[domain]\nlower = [0.0, 0.0]\nupper = [1.0, 1.0]\n").unwrap();
    assert_eq!(code(&bangbang(&["montecarlo", "--config", path_str(&cfg), "-n", "2", "--out-dir", d])), 2);
    assert_eq!(code(&bangbang(&["solve", "--config", "/nonexistent/run.toml"])), 2);
}

#[test]
fn non_convergence_exits_1_with_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = bangbang(&[
        "solve", "--problem", "gto-geo", "--delta", "1e-8", "--guess", "0.05,0.05,0.05,0.05,0.05,0.05,0.05",
        "--abs-tol", "1e-8", "--rel-tol", "1e-8", "--max-iterations", "2", "--out-dir", path_str(dir.path()),
    ]);
    assert_eq!(code(&out), 1, "{}", String::from_utf8_lossy(&out.stderr));
    let report: SolveArtifact = read_json(&dir.path().join("report.json")).unwrap();
    assert!(!report.report.converged);
    assert_eq!(report.problem, "gto-geo");
    assert!(report.cost.is_none());
    assert!(!dir.path().join("trajectory.csv").exists());
}

#[test]
fn continuation_writes_history() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "problem = \"oscillator\"\nguess = [0.5, 0.5, 2.0]\n[filter]\nkind = \"tanh\"\n").unwrap();
    let out = bangbang(&["continue", "--config", path_str(&cfg), "--quiet", "--out-dir", path_str(dir.path())]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let history: ContinuationReport = read_json(&dir.path().join("history.json")).unwrap();
    assert!(history.converged);
    let constants: Vec<f64> = history.steps.iter().map(|s| s.constant).collect();
    let expected = [1.0, 1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6];
    assert_eq!(constants.len(), expected.len());
    for (c, e) in constants.iter().zip(expected) {
        assert!((c / e - 1.0).abs() < 1e-12);
    }
    let report: SolveArtifact = read_json(&dir.path().join("report.json")).unwrap();
    assert!((report.cost.unwrap() - 2.4980916).abs() < 1e-4);
    assert!(dir.path().join("trajectory.csv").exists());
}

#[test]
fn montecarlo_is_reproducible_across_thread_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let run = |dir: &Path, threads: &str| {
        bangbang(&["montecarlo", "--problem", "oscillator", "-n", "40", "--seed", "5", "--threads", threads, "--out-dir", path_str(dir)])
    };
    assert_eq!(code(&run(a.path(), "1")), 0);
    assert_eq!(code(&run(b.path(), "3")), 0);
    for f in ["records.jsonl", "records.csv", "stats.json"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        if f == "stats.json" {
            // Mean wall time differs between runs; everything else is fixed.
            let mut s: MonteCarloStats = serde_json::from_slice(&x).unwrap();
            let mut t: MonteCarloStats = serde_json::from_slice(&y).unwrap();
            s.wall_time_mean = 0.0;
            t.wall_time_mean = 0.0;
            assert_eq!(s, t);
            assert_eq!(s.n_runs, 40);
            assert!(s.convergence_rate >= 0.8);
        } else {
            assert_eq!(x, y, "{f} differs");
        }
    }
    let records = read_records(std::io::BufReader::new(std::fs::File::open(a.path().join("records.jsonl")).unwrap()))
        .unwrap();
    assert_eq!(records.len(), 40);
    assert!(records.iter().enumerate().all(|(i, r)| r.index == i));
    let timings = std::fs::read_to_string(a.path().join("timings.jsonl")).unwrap();
    assert_eq!(timings.lines().count(), 40);
}

#[test]
fn export_reproduces_saved_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let d = path_str(dir.path());
    assert_eq!(code(&bangbang(&["solve", "--guess", "0.5,0.5,2", "--out-dir", d])), 0);
    let original = read_trajectory_csv(&dir.path().join("trajectory.csv")).unwrap();
    let exported = dir.path().join("export");
    let report = dir.path().join("report.json");
    let out = bangbang(&["export", "--from", path_str(&report), "--out-dir", path_str(&exported)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(read_trajectory_csv(&exported.join("trajectory.csv")).unwrap(), original);
}
