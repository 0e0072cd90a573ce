#![cfg(feature = "cli")]

use std::path::Path;
use std::process::{Command, Output};

fn misinfo(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_misinfo"))
        .current_dir(dir)
        .args(["--log", "warn"])
        .args(args)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn full_stage_chain() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for args in [
        &["synth", "--output", "corpus.jsonl", "--n-m", "60", "--n-t", "80"][..],
        &["preprocess", "--input", "corpus.jsonl", "--output", "tokens.jsonl"],
        &["split", "--input", "tokens.jsonl"],
        &["train", "--model", "dt", "--method", "unigram", "--set", "max_depth=8", "--output", "dt.json"],
        &["eval", "--model", "dt.json", "--output", "report.json"],
    ] {
        let o = misinfo(d, args);
        assert!(o.status.success(), "{args:?}: {}", stderr(&o));
    }
    assert!(d.join("dt.json.space.json").exists());
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["test_rows"], 28);
}

#[test]
fn experiment_writes_grid() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(misinfo(d, &["synth", "--output", "c.jsonl"]).status.success());
    let o = misinfo(d, &["experiment", "--corpus", "c.jsonl", "--models", "nb,svm", "--methods", "bow"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.starts_with("Model"), "{stdout}");
    let csv = std::fs::read_to_string(d.join("results/grid.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn missing_predecessor_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = misinfo(dir.path(), &["train", "--model", "nb", "--method", "bow", "--output", "m.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("misinfo split"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = misinfo(dir.path(), &["train", "--model", "knn", "--method", "bow", "--output", "m.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(misinfo(dir.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(misinfo(dir.path(), &["--help"]).status.code(), Some(0));
    let o = misinfo(dir.path(), &["synth", "--output", "x.jsonl", "--signal", "2"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn failed_cells_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let synth = ["synth", "--output", "s.jsonl", "--n-m", "20", "--n-t", "20", "--min-len", "1", "--max-len", "1"];
    assert!(misinfo(d, &synth).status.success());
    let o = misinfo(d, &["experiment", "--corpus", "s.jsonl", "--models", "nb", "--methods", "unigram,trigram"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("tri-gram"), "{}", stderr(&o));
    assert!(d.join("results/grid.csv").exists());
}

#[test]
fn occupied_port_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("t.jsonl"), "{\"id\":\"1\",\"text\":\"mask up\"}\n").unwrap();
    let holder = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = holder.local_addr().unwrap().port().to_string();
    let o = misinfo(d, &["annotate", "--dataset", "t.jsonl", "--journal", "j.csv", "--port", &port]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("already in use"), "{}", stderr(&o));
}
