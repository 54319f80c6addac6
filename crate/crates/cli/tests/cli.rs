//! Drives the `relaug` binary end to end on generated datasets.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn relaug(args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_relaug")).args(args).env_remove("RELAUG_LLM_ENDPOINT").output().unwrap();
    assert!(out.status.success(), "relaug {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn gen(dir: &Path) -> PathBuf {
    let data = dir.join("data");
    relaug(&[
        "gen",
        "--out",
        data.to_str().unwrap(),
        "--tables",
        "5",
        "--rows",
        "400",
        "--selectivity",
        "0.2",
        "--seed",
        "9",
        "--planted-hop",
        "2",
    ]);
    data
}

fn pipeline_args<'a>(sub: &'a str, data: &'a Path, out: &'a Path) -> Vec<&'a str> {
    vec![sub, "--dataset", data.to_str().unwrap(), "--out", out.to_str().unwrap(), "--max-len", "4", "--features", "4"]
}

fn read(dir: &Path, f: &str) -> Vec<u8> {
    fs::read(dir.join(f)).unwrap_or_else(|e| panic!("{}: {e}", dir.join(f).display()))
}

#[test]
fn gen_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let a = gen(dir.path());
    let b = dir.path().join("again");
    relaug(&[
        "gen",
        "--out",
        b.to_str().unwrap(),
        "--tables",
        "5",
        "--rows",
        "400",
        "--selectivity",
        "0.2",
        "--seed",
        "9",
        "--planted-hop",
        "2",
    ]);
    for f in ["graph.json", "t0.csv", "t2.csv", "t4.csv"] {
        assert_eq!(read(&a, f), read(&b, f));
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path());
    let (o1, o2) = (dir.path().join("o1"), dir.path().join("o2"));
    relaug(&pipeline_args("run", &data, &o1));
    relaug(&pipeline_args("run", &data, &o2));
    for f in ["augmented.csv", "paths.json", "selection.json", "consolidated.csv"] {
        assert_eq!(read(&o1, f), read(&o2, f), "{f} differs");
    }
    let report: serde_json::Value = serde_json::from_slice(&read(&o1, "report.json")).unwrap();
    for key in ["config", "timings_ms", "paths", "features", "warnings"] {
        assert!(report.get(key).is_some(), "report lacks {key}");
    }
}

#[test]
fn stage_subcommands_compose_to_run() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path());
    let (whole, staged) = (dir.path().join("whole"), dir.path().join("staged"));
    relaug(&pipeline_args("run", &data, &whole));
    for sub in ["describe", "explore", "execute", "select"] {
        relaug(&pipeline_args(sub, &data, &staged));
    }
    for f in ["descriptions.json", "paths.json", "consolidated.csv", "augmented.csv", "selection.json"] {
        assert_eq!(read(&whole, f), read(&staged, f), "{f} differs");
    }
}

#[test]
fn executors_produce_identical_tables() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path());
    let (y, b) = (dir.path().join("y"), dir.path().join("b"));
    let mut args = pipeline_args("run", &data, &y);
    args.extend(["--executor", "yannakakis"]);
    relaug(&args);
    let mut args = pipeline_args("run", &data, &b);
    args.extend(["--executor", "binary"]);
    relaug(&args);
    assert_eq!(read(&y, "augmented.csv"), read(&b, "augmented.csv"));
    assert_eq!(read(&y, "selection.json"), read(&b, "selection.json"));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path());
    let out = dir.path().join("o");
    let cfg = dir.path().join("relaug.toml");
    fs::write(&cfg, format!("dataset_dir = {:?}\nout_dir = {:?}\nmethod = \"none\"\nfeatures = 2\n", data, out)).unwrap();
    relaug(&["run", "--config", cfg.to_str().unwrap(), "--features", "3", "--method", "stats-only", "--threads", "2"]);
    let report: serde_json::Value = serde_json::from_slice(&read(&out, "report.json")).unwrap();
    assert_eq!(report["config"]["features"], 3);
    assert_eq!(report["config"]["method"], "stats_only");
    assert_eq!(report["config"]["threads"], 2);
    assert_eq!(report["llm_calls"]["feature_ranking"], 0);
}

#[test]
fn bench_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path());
    let out = dir.path().join("o");
    relaug(&["bench", "--dataset", data.to_str().unwrap(), "--out", out.to_str().unwrap(), "--max-len", "3", "--reps", "1", "--all-paths"]);
    let report: serde_json::Value = serde_json::from_slice(&read(&out, "bench.json")).unwrap();
    assert!(!report["entries"].as_array().unwrap().is_empty());
}

#[test]
fn invalid_input_fails_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_relaug"))
        .args(["run", "--dataset", dir.path().join("missing").to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(!out.stderr.is_empty());
    let bad = Command::new(env!("CARGO_BIN_EXE_relaug")).args(["run", "--dataset", "x", "--max-len", "1"]).output().unwrap();
    assert!(!bad.status.success());
}
