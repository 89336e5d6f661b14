use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semidiscrete"))
        .args(args)
        .env_remove("SEMIDISCRETE_OUT")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: [&str; 12] = [
    "--dim", "2", "--fine-steps", "256", "--levels", "4,8,16,32", "--paths", "40", "--steps", "16", "--seed", "11",
];

fn run_all(out: &Path, workers: &str) -> Output {
    let mut args = vec!["all", "--out", out.to_str().unwrap(), "--workers", workers];
    args.extend_from_slice(&SMALL);
    run(&args)
}

#[test]
fn missing_subcommand_exits_2() {
    assert_eq!(run(&[]).status.code(), Some(2));
}

#[test]
fn non_dividing_level_exits_2_naming_the_field() {
    let o = run(&["convergence", "--fine-steps", "1000", "--levels", "3", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("levels"), "{}", stderr(&o));
    assert!(stdout(&o).is_empty());
}

#[test]
fn missing_seed_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["moments", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("seed"));
}

#[test]
fn validate_split_reports_zero_deviation() {
    let o = run(&["validate-split", "--system", "example", "--dim", "4"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("max consistency deviation 0e0"), "{out}");
    assert!(out.contains("Lipschitz estimate for f"));

    let o = run(&["validate-split", "--system", "nope"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn positivity_semidiscrete_has_no_violations() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "positivity", "--scheme", "euler,semidiscrete", "--dim", "1", "--x0", "0.1", "--steps", "16", "--paths",
        "2000", "--seed", "5", "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 2);
    assert!(out.lines().any(|l| l.starts_with("positivity: semidiscrete") && l.contains(": 0/2000 paths")), "{out}");

    let csv = fs::read_to_string(dir.path().join("positivity.csv")).unwrap();
    let row = csv.lines().find(|l| l.starts_with("semidiscrete,")).unwrap();
    assert_eq!(row.split(',').nth(3), Some("0"));
}

#[test]
fn artifacts_are_reproducible_across_runs_and_workers() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    for (dir, workers) in [(&a, "1"), (&b, "1"), (&c, "8")] {
        let o = run_all(dir.path(), workers);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert_eq!(stdout(&o).lines().count(), 1 + 3 + 3);
    }
    for name in ["result.json", "strong_error.csv", "positivity.csv", "moments.csv"] {
        let ra = fs::read(a.path().join(name)).unwrap();
        assert_eq!(ra, fs::read(b.path().join(name)).unwrap(), "{name} differs between runs");
        assert_eq!(ra, fs::read(c.path().join(name)).unwrap(), "{name} differs across worker counts");
    }
    let json: serde_json::Value = serde_json::from_slice(&fs::read(a.path().join("result.json")).unwrap()).unwrap();
    assert_eq!(json["completed"], true);
    assert_eq!(json["config"]["seed"], 11);
    assert_eq!(json["config"]["levels"], serde_json::json!([4, 8, 16, 32]));
    assert!(a.path().join("timing.json").exists());
}

#[test]
fn out_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("nested");
    let o = Command::new(env!("CARGO_BIN_EXE_semidiscrete"))
        .args(["moments", "--dim", "1", "--fine-steps", "16", "--levels", "1,2", "--paths", "4", "--seed", "2"])
        .env("SEMIDISCRETE_OUT", &target)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(target.join("moments.csv").exists());
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"seed": 3, "dim": 1, "x0": [0.3], "fine_steps": 32, "levels": [1, 2, 4], "paths": 6}"#).unwrap();
    let out = dir.path().join("out");
    let o = run(&["convergence", "--config", cfg.to_str().unwrap(), "--paths", "9", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let json: serde_json::Value = serde_json::from_slice(&fs::read(out.join("result.json")).unwrap()).unwrap();
    assert_eq!(json["config"]["paths"], 9);
    assert_eq!(json["config"]["seed"], 3);
}
