use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_viewalign")).args(args).current_dir(root()).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
    assert_eq!(run(&["align", "--help"]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&["dump-bins", "--colour", "red"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["align"]).status.code(), Some(1));
}

#[test]
fn dump_bins_writes_a_symmetric_table() {
    let o = run(&["dump-bins"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("index,lower,center,upper,width"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 20);
    assert_eq!(rows[0][1], -180.0);
    assert_eq!(rows[19][3], 180.0);
    for w in rows.windows(2) {
        assert_eq!(w[0][3], w[1][1]);
    }
    for k in 10..19 {
        assert!(rows[k + 1][4] > rows[k][4]);
        assert!((rows[k][4] - rows[19 - k][4]).abs() < 1e-9);
    }
    assert!(!run(&["dump-bins", "--bins", "7"]).status.success());
}

#[test]
fn dump_bins_writes_to_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bins.csv");
    let o = run(&["dump-bins", "--bins", "8", "--mu", "10", "--out", path.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(std::fs::read_to_string(path).unwrap().lines().count(), 9);
}

#[test]
fn single_iteration_align_writes_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("traj.csv");
    let o = run(&[
        "align",
        "--template",
        "templates/chair.json",
        "--estimator",
        "oracle",
        "--truth",
        "40,20,0",
        "--init",
        "0,20,0",
        "--max-iter",
        "1",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&path).unwrap();
    assert_eq!(csv.lines().count(), 2);
    let summary: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(summary["iterations"], 1);
}

#[test]
fn align_prints_trajectory_and_converges_with_reprojection() {
    let o = run(&["align", "--template", "templates/chair.json", "--truth", "30,15,0", "--init", "0,20,0"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.lines().count() >= 2);
    assert!(text.lines().last().unwrap().contains("converged"));
}

#[test]
fn align_rejects_bad_input() {
    assert_eq!(run(&["align", "--template", "templates/missing.json"]).status.code(), Some(2));
    assert_eq!(run(&["align", "--template", "templates/chair.json", "--tau", "1,2"]).status.code(), Some(1));
}

#[test]
fn experiment_reproduces_the_golden_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["experiment", "--config", "configs/sample_experiment.json", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    let golden = std::fs::read_to_string(root().join("configs/golden/sample_report.json")).unwrap();
    assert_eq!(report, golden);
    assert_eq!(std::fs::read_dir(dir.path().join("trajectories")).unwrap().count(), 20);
    assert_eq!(std::fs::read_to_string(dir.path().join("trials.csv")).unwrap().lines().count(), 21);
}

#[test]
fn malformed_configs_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"format": "experiment", "version": 1, "trials": 0}"#).unwrap();
    assert_eq!(run(&["experiment", "--config", path.to_str().unwrap()]).status.code(), Some(2));
    std::fs::write(&path, "not json").unwrap();
    let o = run(&["experiment", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
    assert_eq!(run(&["experiment", "--config", "configs/none.json"]).status.code(), Some(2));
}

#[test]
fn gen_correspondence_writes_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pairs.csv");
    let o = run(&[
        "gen-correspondence",
        "--template",
        "templates/chair.json",
        "--pruning",
        "templates/chair.pruning.json",
        "--view-a",
        "0,20,0",
        "--view-b",
        "20,20,0",
        "--negatives",
        "2",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&path).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("xa_u,xa_v,xb_u,xb_v,s"));
    let labels: Vec<&str> = lines.map(|l| l.rsplit(',').next().unwrap()).collect();
    let positives = labels.iter().filter(|s| **s == "1").count();
    assert!(positives > 0);
    assert_eq!(labels.len(), positives * 3);
}

#[test]
fn bench_correlate_reports_throughput() {
    let o = run(&["bench-correlate", "--size", "8", "--dim", "4", "--repeats", "2"]);
    assert!(o.status.success());
    assert!(!stdout(&o).trim().is_empty());
}
