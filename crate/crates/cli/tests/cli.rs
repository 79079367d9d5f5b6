use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ulpsat::corpus;

fn ulpsat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ulpsat")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_corpus_file(dir: &Path, name: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, corpus::source(name).unwrap()).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn solve_prints_sat_and_model() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_corpus_file(dir.path(), "toy.smt2");
    let model_path = dir.path().join("model.smt2");
    let o = ulpsat(&["solve", &file, "--model-out", model_path.to_str().unwrap()]);
    assert!(o.status.success());
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("sat"));
    assert_eq!(lines.next(), Some("(model"));
    let one = format!("(fp #b0 #b01111111111 #b{})", "0".repeat(52));
    assert_eq!(out.matches(&one).count(), 2, "{out}");
    let saved = fs::read_to_string(model_path).unwrap();
    assert!(out.contains(saved.trim_end()));
}

#[test]
fn contradiction_gives_unsat_guess_with_score() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_corpus_file(dir.path(), "contradictory.smt2");
    let o = ulpsat(&["solve", &file, "--verbose", "--stats"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.starts_with("unsat-guess\n; score "), "{out}");
    assert!(!String::from_utf8_lossy(&o.stderr).is_empty());
}

#[test]
fn tiny_timeout_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_corpus_file(dir.path(), "chain20.smt2");
    let o = ulpsat(&["solve", &file, "--timeout", "0.000001"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stdout(&o), "timeout\n");
}

#[test]
fn malformed_input_reports_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.smt2");
    fs::write(&path, "(assert (fp.eq x").unwrap();
    let o = ulpsat(&["solve", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stdout(&o), "error\n");
    assert!(String::from_utf8_lossy(&o.stderr).contains("1:"));
}

#[test]
fn repeated_solves_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_corpus_file(dir.path(), "mixed_widths.smt2");
    let a = ulpsat(&["solve", &file, "--seed", "9"]);
    let b = ulpsat(&["solve", &file, "--seed", "9"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn bench_ablation_writes_one_row_per_variant() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("suite");
    fs::create_dir(&suite).unwrap();
    for name in ["toy.smt2", "contradictory.smt2", "subnormal_trap.smt2"] {
        write_corpus_file(&suite, name);
    }
    fs::write(
        suite.join("expected.csv"),
        "path,status\ntoy.smt2,sat\ncontradictory.smt2,unsat\nsubnormal_trap.smt2,sat\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = ulpsat(&[
        "bench",
        suite.to_str().unwrap(),
        "--ablation",
        "--out-dir",
        out.to_str().unwrap(),
        "--timeout",
        "30",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(out.join("ablation.csv")).unwrap();
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows.len(), 7, "{table}");
    assert!(rows[0].starts_with("variant,n,n_sat"));
    assert!(rows[1].starts_with("full,3,2,1,0,0,1"), "{table}");
    let runs = fs::read_to_string(out.join("runs.csv")).unwrap();
    assert_eq!(runs.lines().next(), Some("path,run,verdict,time,seed"));
    assert_eq!(runs.lines().count(), 4);
    assert!(out.join("summary.csv").exists());
}

#[test]
fn selftest_filter_runs_one_group() {
    let o = ulpsat(&["selftest", "--filter", "lattice"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.lines().filter(|l| l.starts_with("pass")).all(|l| l.contains("lattice")));
    assert!(out.trim_end().ends_with("0 failed"), "{out}");
    let o = ulpsat(&["selftest", "--filter", "nothing"]);
    assert_eq!(o.status.code(), Some(1));
}
