use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn subgap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_subgap")).args(args).output().expect("run subgap")
}

fn last_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stdout);
    serde_json::from_str(text.lines().last().expect("output")).expect("JSON report")
}

fn write(name: &str, body: &str) -> PathBuf {
    let path = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn gap_reports_the_k2_numbers() {
    let out = subgap(&["gap", "k2cut"]);
    assert_eq!(code(&out), 0);
    let r = last_json(&out);
    assert_eq!(r["command"], "gap");
    assert_eq!(r["results"]["opt"], 1.0);
    assert_eq!(r["results"]["opt_bar"], 0.5);
    assert_eq!(r["results"]["gamma"], 0.5);
    for key in ["config", "seed", "wall_time", "version"] {
        assert!(r.get(key).is_some(), "{key} missing");
    }
}

#[test]
fn text_format_prints_a_summary() {
    let out = subgap(&["--format", "text", "gap", "cardinality:3"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("gamma = 0.7037"), "{text}");
}

#[test]
fn solve_k2_over_the_free_matroid() {
    let f = write("k2.json", r#"{"n": 2, "kind": "cut", "payload": {"edges": [[0, 1]]}}"#);
    let m = write("free2.json", r#"{"kind": "free", "n": 2}"#);
    let out = subgap(&["solve", "--instance", f.to_str().unwrap(), "--constraint", m.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = last_json(&out);
    assert_eq!(r["results"]["value"], 0.5);
    assert_eq!(r["results"]["opt"], 1.0);
    assert_eq!(r["results"]["ratio"], 0.5);
}

#[test]
fn solve_is_reproducible_for_a_seed() {
    let f = write("dc.json", r#"{"n": 4, "kind": "directed-cut", "payload": {"arcs": [[0, 2], [1, 3]]}}"#);
    let m = write("p22.json", r#"{"kind": "partition", "parts": [[0, 1], [2, 3]], "caps": [1, 1]}"#);
    let run = || {
        let out = subgap(&["--seed", "9", "solve", "--bases", "--instance", f.to_str().unwrap(), "--constraint", m.to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        last_json(&out)["results"].clone()
    };
    let (a, b) = (run(), run());
    assert_eq!(a, b);
    assert!(a["ratio"].as_f64().unwrap() >= 0.25);
}

#[test]
fn malformed_input_exits_2() {
    let bad = write("bad.json", "{not json");
    let m = write("free1.json", r#"{"kind": "free", "n": 1}"#);
    let out = subgap(&["solve", "--instance", bad.to_str().unwrap(), "--constraint", m.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert_eq!(code(&subgap(&["check", "nope"])), 2);
    assert_eq!(code(&subgap(&["gap", "k2cut", "--bogus"])), 2);
}

#[test]
fn empty_truncated_base_polytope_exits_3() {
    let f = write("dc3.json", r#"{"n": 4, "kind": "directed-cut", "payload": {"arcs": [[0, 1]]}}"#);
    let m = write("p13.json", r#"{"kind": "partition", "parts": [[0], [1, 2, 3]], "caps": [1, 1]}"#);
    let out = subgap(&["solve", "--bases", "--instance", f.to_str().unwrap(), "--constraint", m.to_str().unwrap()]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("nu"));
}

#[test]
fn non_strongly_symmetric_instance_exits_3() {
    assert_eq!(code(&subgap(&["gap", "cyclic4"])), 3);
    assert_eq!(code(&subgap(&["harden", "cyclic4", "--trials", "0"])), 3);
}

#[test]
fn oversized_ground_set_exits_4() {
    let f = write("big.json", r#"{"n": 30, "kind": "cut", "payload": {"edges": [[0, 1]]}}"#);
    let m = write("free30.json", r#"{"kind": "free", "n": 30}"#);
    let out = subgap(&["solve", "--instance", f.to_str().unwrap(), "--constraint", m.to_str().unwrap()]);
    assert_eq!(code(&out), 4);
}

#[test]
fn harden_reports_the_realized_gap() {
    let out = subgap(&["harden", "k2cut", "--n", "3", "--trials", "4", "--queries", "50"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    // One JSON line per trial, then the report.
    assert_eq!(text.lines().count(), 5);
    let r = last_json(&out);
    let g = &r["results"]["gap_report"];
    assert!(g["max_f_hat"].as_f64().unwrap() >= 0.98);
    assert!(g["max_g_hat"].as_f64().unwrap() <= 0.51);
    assert!(r["results"]["experiment"].get("trials").is_none());
}

#[test]
fn check_suite_passes_and_lists_properties() {
    let out = subgap(&["--format", "text", "check", "bounds"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("bipartite tightness"));
    assert!(text.contains("100/100 pass"));
}

#[test]
fn seed_comes_from_the_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_subgap")).env("SUBGAP_SEED", "77").args(["gap", "k2cut"]).output().unwrap();
    assert_eq!(last_json(&out)["seed"], 77);
}
