use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const BALL: &str = r#"{"kind":"lp_ball","p":2,"gamma":0.05}"#;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_robust-halfspace"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success() || out.status.code() == Some(4), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is one JSON object")
}

fn gen_clean(dir: &Path, name: &str) {
    let out = run(dir, &["gen", "--d", "3", "--m", "150", "--gamma", "0.1", "--out", name]);
    assert!(out.status.success());
}

#[test]
fn gen_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a", "b"] {
        run(dir.path(), &["--seed", "7", "gen", "--d", "4", "--m", "50", "--gamma", "0.1", "--eta", "0.1", "--out", name]);
    }
    run(dir.path(), &["--seed", "8", "gen", "--d", "4", "--m", "50", "--gamma", "0.1", "--eta", "0.1", "--out", "c"]);
    let read = |n: &str| std::fs::read(dir.path().join(n).join("data.csv")).unwrap();
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));
}

#[test]
fn invalid_noise_rate_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["gen", "--d", "2", "--m", "10", "--gamma", "0.1", "--eta", "0.6", "--out", "x"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
}

#[test]
fn train_rerm_reaches_zero_robust_risk() {
    let dir = tempfile::tempdir().unwrap();
    gen_clean(dir.path(), "d");
    let rec = json(&run(
        dir.path(),
        &["--json", "train-rerm", "--data", "d/data.csv", "--adversary", BALL, "--out", "m.json"],
    ));
    assert_eq!(rec["metrics"]["outcome"], "separator");
    assert_eq!(rec["metrics"]["empirical_robust_risk"].as_f64(), Some(0.0));
    let model: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("m.json")).unwrap()).unwrap();
    assert_eq!(model["w"].as_array().unwrap().len(), 3);

    let ev = json(&run(
        dir.path(),
        &["--json", "eval", "--model", "m.json", "--data", "d/data.csv", "--adversary", BALL],
    ));
    assert_eq!(ev["metrics"]["empirical_robust_risk"].as_f64(), Some(0.0));
    assert_eq!(ev["metrics"]["clean_error"].as_f64(), Some(0.0));
}

#[test]
fn overlapping_classes_exit_infeasible() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("o.csv"), "y,x1,x2\n1,0.3,0.0\n-1,0.35,0.0\n-1,-0.5,0.1\n").unwrap();
    let out = run(dir.path(), &["--json", "train-rerm", "--data", "o.csv", "--adversary", BALL]);
    assert_eq!(out.status.code(), Some(4));
    let rec = json(&out);
    assert_eq!(rec["metrics"]["outcome"], "infeasible");
    assert!(rec["metrics"]["note"].as_str().unwrap().contains("margin"));
}

#[test]
fn empty_dataset_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("e.csv"), "y,x1,x2\n").unwrap();
    let out = run(dir.path(), &["train-rerm", "--data", "e.csv", "--adversary", BALL]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn certify_lines_replay() {
    let dir = tempfile::tempdir().unwrap();
    gen_clean(dir.path(), "d");
    std::fs::write(dir.path().join("m.json"), r#"{"w":[1.0,0.0,0.0],"bias":0.0}"#).unwrap();
    let big = r#"{"kind":"lp_ball","p":2,"gamma":0.3}"#;
    let out = run(dir.path(), &["certify", "--model", "m.json", "--data", "d/data.csv", "--adversary", big]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 150);
    assert!(lines.iter().any(|l| l["result"] == "counterexample"));
    std::fs::write(dir.path().join("c.jsonl"), &text).unwrap();
    let rec = json(&run(
        dir.path(),
        &["--json", "certify", "--model", "m.json", "--data", "d/data.csv", "--adversary", big, "--replay", "c.jsonl"],
    ));
    assert!(rec["metrics"]["replayed_counterexamples"].as_u64().unwrap() > 0);

    // a tampered counterexample is rejected
    let forged = text.replacen("\"result\":\"robust\"", "\"result\":\"counterexample\",\"z\":[0.0,0.0,0.0]", 1);
    std::fs::write(dir.path().join("f.jsonl"), forged).unwrap();
    let out = run(
        dir.path(),
        &["certify", "--model", "m.json", "--data", "d/data.csv", "--adversary", big, "--replay", "f.jsonl"],
    );
    assert!(!out.status.success());
}

#[test]
fn reduce_separates_far_queries() {
    let dir = tempfile::tempdir().unwrap();
    let rec = json(&run(dir.path(), &["--json", "reduce", "--x", "0,0", "--z", "2,0.5", "--radius", "1"]));
    assert_eq!(rec["metrics"]["result"], "hyperplane");
    assert!(rec["metrics"]["support_gap"].as_f64().unwrap() <= 0.05);
    let rec = json(&run(dir.path(), &["--json", "reduce", "--x", "0,0", "--z", "0.3,0.2", "--radius", "1"]));
    assert_eq!(rec["metrics"]["result"], "near_inside");
}

#[test]
fn sweep_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &["sweep", "--d", "3", "--etas", "0,0.2", "--gammas", "0.2", "--steps", "5000", "--holdout", "5000", "--out", "s.csv"],
    );
    assert!(out.status.success());
    let mut rdr = csv::Reader::from_path(dir.path().join("s.csv")).unwrap();
    assert!(rdr.headers().unwrap().iter().any(|h| h == "noisy_margin_error"));
    assert_eq!(rdr.records().count(), 2);
}

#[test]
fn run_record_replays_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let first = json(&run(
        dir.path(),
        &["--json", "--seed", "3", "--record", "r.json", "train-rcn", "--d", "3", "--gamma", "0.2", "--eta", "0.1",
          "--steps", "3000", "--holdout", "2000"],
    ));
    let again = json(&run(dir.path(), &["--json", "--config", "r.json", "train-rcn"]));
    assert_eq!(first["metrics"], again["metrics"]);
    assert_eq!(first["config"], again["config"]);

    // command-line flags override the file
    let other = json(&run(dir.path(), &["--json", "--config", "r.json", "train-rcn", "--steps", "1000"]));
    assert_eq!(other["metrics"]["steps"].as_u64(), Some(1000));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.json"), r#"{"d":2,"m":5,"gamma":0.1,"out":"o","bogus":1}"#).unwrap();
    let out = run(dir.path(), &["--config", "c.json", "gen"]);
    assert_eq!(out.status.code(), Some(2));
    std::fs::write(dir.path().join("c.json"), r#"{"d":2,"m":5,"gamma":0.1,"out":"o"}"#).unwrap();
    assert!(run(dir.path(), &["--config", "c.json", "gen"]).status.success());
}

#[test]
fn bias_on_an_affine_plant() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["gen", "--d", "3", "--m", "200", "--gamma", "0.1", "--bias", "--out", "a.csv"]);
    assert!(out.status.success());
    let rec = json(&run(dir.path(), &["--json", "train-rerm", "--data", "a.csv", "--adversary", BALL, "--bias"]));
    assert_eq!(rec["metrics"]["empirical_robust_risk"].as_f64(), Some(0.0));
    assert_ne!(rec["model"]["bias"].as_f64(), Some(0.0));
}

#[test]
fn train_rcn_from_a_dataset_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["gen", "--d", "4", "--m", "2000", "--gamma", "0.2", "--eta", "0.1", "--out", "n"]);
    assert!(out.status.success());
    let rec = json(&run(
        dir.path(),
        &["--json", "train-rcn", "--data", "n/data.csv", "--gamma", "0.2", "--eta", "0.1", "--steps", "20000",
          "--surrogate", "glm", "--out", "w.json"],
    ));
    assert!(rec["metrics"]["train_noisy_margin_error"].as_f64().unwrap() <= 0.22);
    let model: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("w.json")).unwrap()).unwrap();
    assert_eq!(model["q"].as_f64(), Some(2.0));
}
