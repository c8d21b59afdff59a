use std::path::Path;
use std::process::{Command, Output};

use signflow::grid::io::read_field;

fn signflow(dir: &Path, args: &[&str], config: &str) -> Output {
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_signflow"))
        .args(args)
        .arg(&cfg)
        .arg("--output")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn small_n_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = signflow(dir.path(), &["solve-all"], "n = 2\n");
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("n: must be ≥ 3"), "{}", stderr(&out));
}

#[test]
fn unknown_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let out = signflow(
        dir.path(),
        &["probe-cones"],
        "dimension = 2\nsmoothness = 3\n",
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("smoothness"));
}

#[test]
fn missing_config_file_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_signflow"))
        .arg("solve-positive")
        .arg(dir.path().join("absent.cfg"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solve_positive_writes_referenced_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = signflow(
        dir.path(),
        &["solve-positive"],
        "n = 63\nexecution = sequential\n",
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let root = dir.path().join("out");
    let summary = std::fs::read_to_string(root.join("summary.txt")).unwrap();
    assert!(summary.contains("status: ok"));
    assert!(summary.contains("classification: positive"));
    for line in summary.lines().filter(|l| l.starts_with("field_file: ")) {
        assert!(root.join(&line["field_file: ".len()..]).is_file(), "{line}");
    }
    for name in ["positive.xy.csv", "positive.trace.csv", "timings.txt"] {
        assert!(root.join(name).is_file(), "{name}");
    }
    let u = read_field(root.join("positive.csv")).unwrap();
    assert!(u.min() > 0.0);
}

#[test]
fn two_dimensional_runs_emit_heatmaps() {
    let dir = tempfile::tempdir().unwrap();
    let out = signflow(dir.path(), &["solve-negative"], "dimension = 2\nn = 15\n");
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let pgm = std::fs::read(dir.path().join("out/negative.pgm")).unwrap();
    assert!(pgm.starts_with(b"P2\n15 15\n"));
}

#[test]
fn swallowed_surface_is_a_solver_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = signflow(dir.path(), &["solve-sign-changing"], "n = 63\neps = 100\n");
    assert_eq!(out.status.code(), Some(3));
    let summary = std::fs::read_to_string(dir.path().join("out/summary.txt")).unwrap();
    assert!(summary.contains("status: solver_failure"));
    assert!(summary.contains("exclusion set swallowed surface"));
}

#[test]
fn failed_check_is_a_verification_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = signflow(dir.path(), &["verify-lemmas"], "n = 63\neps = 100\n");
    assert_eq!(out.status.code(), Some(4));
    let summary = std::fs::read_to_string(dir.path().join("out/summary.txt")).unwrap();
    assert!(summary.contains("pass: false"));
}

#[test]
fn verify_lemmas_passes_on_a_small_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = signflow(dir.path(), &["verify-lemmas"], "n = 63\n");
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let summary = std::fs::read_to_string(dir.path().join("out/summary.txt")).unwrap();
    assert!(!summary.contains("pass: false"));
}
