use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = "1,1,1,1\n1,2,1,2\n1,2,1,2\n";

fn catclust(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_catclust")).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stderr)))
}

#[test]
fn sample_then_summarize() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("tiny.csv");
    fs::write(&data, TINY).unwrap();
    let samples = dir.path().join("s.jsonl");
    let out = catclust(&[
        "sample", "--data", path(&data), "--k", "2", "--m", "3", "--samples", "5", "--seed", "3", "--output", path(&samples),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(&samples).unwrap().lines().count(), 5);
    assert!(dir.path().join("s.jsonl.meta.json").exists());

    let plots = dir.path().join("plots");
    let out = catclust(&["summarize", path(&samples), "--plot-dir", path(&plots)]);
    assert!(out.status.success());
    let report = json(&out);
    assert_eq!(report["samples"], 5);
    for f in ["k_histogram.csv", "co_clustering.csv", "clusters.csv"] {
        assert!(plots.join(f).exists(), "{f}");
    }
}

#[test]
fn stdout_matches_file_output() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("tiny.jsonl");
    fs::write(&data, "{\"states\":[1,1,1,1]}\n{\"states\":[1,2,1,2]}\n").unwrap();
    let file = dir.path().join("o.jsonl");
    let args = ["sample", "--data", path(&data), "--samples", "3", "--threads", "2"];
    let a = catclust(&args);
    let mut with_file = args.to_vec();
    with_file.extend(["--output", path(&file)]);
    assert!(catclust(&with_file).status.success());
    assert_eq!(a.stdout, fs::read(&file).unwrap());
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("tiny.csv");
    fs::write(&data, TINY).unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, format!("data = {:?}\nk = 2\nm = 2\nsamples = 4\nseed = 9\n\n[anneal]\niterations = 50\n", path(&data)))
        .unwrap();
    let out = catclust(&["sample", "--config", path(&cfg), "--samples", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let lines: Vec<&str> = std::str::from_utf8(&out.stdout).unwrap().lines().collect();
    assert_eq!(lines.len(), 2);
    let rec: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
    assert_eq!(rec["s"].as_array().unwrap().len(), 2);
}

#[test]
fn input_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bad.csv");
    fs::write(&data, "1,2\n1,7\n").unwrap();
    let out = catclust(&["sample", "--data", path(&data), "--k", "2"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.csv:2:"));
    assert_eq!(catclust(&["sample", "--data", path(&data), "--samples", "0"]).status.code(), Some(1));
    assert_eq!(catclust(&["sample", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(catclust(&["summarize", path(&dir.path().join("missing.jsonl"))]).status.code(), Some(1));
    assert_eq!(catclust(&["--help"]).status.code(), Some(0));
}

#[test]
fn non_coalescence_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("wide.csv");
    fs::write(&data, "1,1,1,2,1,1\n2,2,2,1,2,2\n1,2,1,2,1,2\n2,1,1,2,2,1\n1,1,2,2,1,1\n2,2,1,1,2,2\n").unwrap();
    let out = catclust(&["sample", "--data", path(&data), "--m", "4", "--epoch-cap", "1"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn diagnostics_report_json() {
    let out = catclust(&["diagnose", "logconcavity", "--configurations", "5", "--a", "2"]);
    assert!(out.status.success());
    let r = json(&out);
    assert_eq!(r["gamma_violations"], 0);
    assert!(!r["witness"].is_null());

    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("tiny.csv");
    fs::write(&data, TINY).unwrap();
    let out = catclust(&["diagnose", "envelopes", "--data", path(&data), "--z", "1,2,1", "--s", "1,2,2", "--probes", "50"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(&out);
    assert_eq!(r["coordinates"].as_array().unwrap().len(), 4);
    assert_eq!(r["minorization"]["violations"], 0);

    let out = catclust(&["diagnose", "bounds", "--configurations", "5", "--probes", "20"]);
    assert!(out.status.success());
    let r = json(&out);
    assert_eq!(r["sandwich_failures"], 0);
    assert_eq!(r["property_failures"], 0);
}
