use std::path::Path;
use std::process::{Command, Output};

fn spinlab(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spinlab"))
        .args(args)
        .current_dir(cwd)
        .env("SPINLAB_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn graph_gen_then_audit() {
    let dir = tempfile::tempdir().unwrap();
    let o = spinlab(&["graph", "gen", "--n", "200", "--d", "7", "--seed", "4", "--out", "g.txt"], dir.path());
    assert!(o.status.success(), "{o:?}");
    let text = std::fs::read_to_string(dir.path().join("g.txt")).unwrap();
    assert_eq!(text.lines().next(), Some("200 7 4"));
    assert_eq!(text.lines().count(), 201);
    let o = spinlab(&["graph", "audit", "--in", "g.txt", "--checks", "lambda2,expansion"], dir.path());
    let out = stdout(&o);
    assert!(out.contains("lambda2 ="), "{out}");
    assert!(out.contains("expansion partition"), "{out}");
    assert!(o.status.success(), "{out}");
}

#[test]
fn odd_degree_sum_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = spinlab(&["graph", "gen", "--n", "5", "--d", "3", "--out", "g.txt"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn run_writes_record_and_observer_rows() {
    let dir = tempfile::tempdir().unwrap();
    spinlab(&["graph", "gen", "--n", "100", "--d", "7", "--seed", "1", "--out", "g.txt"], dir.path());
    let args = [
        "run", "--graph", "g.txt", "--rule", "ising", "--beta", "3", "--init", "biased:0.9", "--horizon", "4",
        "--seed", "7", "--observers", "mag,clusters", "--paranoid", "--out", "out/run.jsonl",
    ];
    let o = spinlab(&args, dir.path());
    assert!(o.status.success(), "{o:?}");
    let rec = std::fs::read_to_string(dir.path().join("out/run.jsonl")).unwrap();
    let v: serde_json::Value = serde_json::from_str(rec.lines().next().unwrap()).unwrap();
    assert_eq!(v["stream_seed"], 7);
    assert_eq!(v["generator"], "ChaCha8Rng");
    let mag = std::fs::read_to_string(dir.path().join("out/run.mag.csv")).unwrap();
    assert_eq!(mag.lines().next(), Some("t,magnetization"));
    assert_eq!(mag.lines().count(), 1 + 101);
    let clusters = std::fs::read_to_string(dir.path().join("out/run.clusters.csv")).unwrap();
    assert!(clusters.starts_with("t,n_minus"));
    // Same seed, same trajectory.
    spinlab(&args, dir.path());
    let again = std::fs::read_to_string(dir.path().join("out/run.mag.csv")).unwrap();
    assert_eq!(mag, again);
}

#[test]
fn experiment_run_and_summarize() {
    let dir = tempfile::tempdir().unwrap();
    let spec = r#"{"name": "extinction_scaling", "seed": 1, "graph": {"n": [64, 128, 256], "d": 7},
        "rule": {"kind": "ising", "beta": 3}, "init": "biased:0.9", "horizon": {"log_n": 10},
        "replicas": 2, "output": "records/sweep.jsonl"}"#;
    std::fs::write(dir.path().join("spec.json"), spec).unwrap();
    let o = spinlab(&["experiment", "run", "--spec", "spec.json"], dir.path());
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).contains("extinction_time"));
    let o = spinlab(&["experiment", "summarize", "--in", "records"], dir.path());
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).contains("ln n"), "{}", stdout(&o));
    let csv = std::fs::read_to_string(dir.path().join("records/summary.csv")).unwrap();
    assert!(csv.starts_with("experiment,rule,n,observable"));
}

#[test]
fn summarize_flags_violations() {
    let dir = tempfile::tempdir().unwrap();
    let line = r#"{"experiment":"grand_coupling","graph":{"kind":"random","n":10,"d":3,"seed":0},"rule":{"kind":"ising","beta":1.0},"init":"all_plus","replica":0,"spec_seed":0,"stream_seed":1,"init_seed":2,"generator":"ChaCha8Rng","horizon":1.0,"check_mode":"normal","observables":{"events":10},"violations":{"order":3},"wall_clock_s":0.0}"#;
    std::fs::write(dir.path().join("bad.jsonl"), format!("{line}\n")).unwrap();
    let o = spinlab(&["experiment", "summarize", "--in", "bad.jsonl"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("VIOLATION order: 3"));
}

#[test]
fn empty_records_are_an_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("none.jsonl"), "").unwrap();
    let o = spinlab(&["experiment", "summarize", "--in", "none.jsonl"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_lemmas() {
    let dir = tempfile::tempdir().unwrap();
    let o = spinlab(&["verify", "--suite", "lemmas"], dir.path());
    assert!(o.status.success(), "{o:?}");
    assert_eq!(stdout(&o).lines().filter(|l| l.starts_with("PASS")).count(), 4);
    let o = spinlab(&["verify", "--suite", "nope"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}
