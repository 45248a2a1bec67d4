use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn lipmix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lipmix")).args(args).output().unwrap()
}

fn ok_json(args: &[&str]) -> Value {
    let out = lipmix(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

#[test]
fn generate_and_estimate_turning() {
    let dir = tempfile::tempdir().unwrap();
    let c = path(dir.path(), "c.json");
    let out = lipmix(&["generate", "--kind", "circle", "--r", "1", "--n", "1000", "-o", &c]);
    assert!(out.status.success());
    let file: Value = serde_json::from_str(&fs::read_to_string(&c).unwrap()).unwrap();
    assert_eq!(file["points"].as_array().unwrap().len(), 1000);
    assert_eq!(file["topology"], "circle");

    let r = ok_json(&["estimate", "--what", "turning", "--curve", &c, "--exhaustive"]);
    assert!((r["value"].as_f64().unwrap() - 1.0).abs() < 1e-2);
    assert_eq!(r["budget"], 1000 * 999 / 2);

    let csv = lipmix(&["estimate", "--what", "turning", "--curve", &c, "--budget", "500", "--seed", "4", "--format", "csv"]);
    let text = String::from_utf8(csv.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("name,value,witness,budget,seed,refinement"));
    assert!(lines.next().unwrap().ends_with(",500,4,1000"));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let c = path(dir.path(), "b.json");
    lipmix(&["generate", "--kind", "box-curve", "--t", "1.4", "--per-edge", "30", "-o", &c]);
    let args = ["estimate", "--what", "lip", "--kind", "box-mixer", "--curve", &c, "--budget", "3000", "--seed", "11"];
    let (a, b) = (lipmix(&args), lipmix(&args));
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let again = path(dir.path(), "b2.json");
    lipmix(&["generate", "--spec", r#"{"kind": "box-curve", "t": 1.4, "per_edge": 30}"#, "-o", &again]);
    assert_eq!(fs::read(&c).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn construct_evaluates_tuples() {
    let dir = tempfile::tempdir().unwrap();
    let c = path(dir.path(), "p.json");
    let t = path(dir.path(), "t.json");
    lipmix(&["generate", "--kind", "graph-curve", "--profile", "parabola", "--extent", "3", "--n", "7", "-o", &c]);
    fs::write(&t, "[[1, 6], [6, 1], [3, 3]]").unwrap();
    let rows = ok_json(&["construct", "--kind", "graph-mean", "--curve", &c, "--eval", &t]);
    assert_eq!(rows[0]["output"], serde_json::json!([2.0, 4.0]));
    assert_eq!(rows[0]["output"], rows[1]["output"]);
    assert_eq!(rows[2]["output"], serde_json::json!([0.0, 0.0]));

    // a circle mixer rejects far-apart triples with exit code 3
    let circle = path(dir.path(), "c.json");
    lipmix(&["generate", "--kind", "circle", "--r", "1", "--n", "100", "-o", &circle]);
    fs::write(&t, "[[0, 25, 50]]").unwrap();
    let out = lipmix(&["construct", "--kind", "circle-mixer", "--curve", &circle, "--eval", &t]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn parse_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = path(dir.path(), "bad.json");
    fs::write(&bad, "not json").unwrap();
    assert_eq!(lipmix(&["estimate", "--what", "turning", "--curve", &bad]).status.code(), Some(2));
    assert_eq!(lipmix(&["estimate", "--what", "nothing", "--curve", &bad]).status.code(), Some(2));
    let c = path(dir.path(), "c.json");
    assert_eq!(lipmix(&["generate", "--kind", "circle", "--n", "10", "-o", &c]).status.code(), Some(2));
}

#[test]
fn domain_errors_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let c = path(dir.path(), "c.json");
    // sampled circles need at least three points
    assert_eq!(lipmix(&["generate", "--kind", "circle", "--r", "1", "--n", "2", "-o", &c]).status.code(), Some(3));
    lipmix(&["generate", "--kind", "circle", "--r", "1", "--n", "50", "-o", &c]);
    assert_eq!(lipmix(&["obstruct", "--curve", &c]).status.code(), Some(3));
}

#[test]
fn chain_components_of_two_lines() {
    let dir = tempfile::tempdir().unwrap();
    let s = path(dir.path(), "s.json");
    lipmix(&["generate", "--kind", "two-lines", "--extent", "10", "--n", "201", "-o", &s]);
    let r = ok_json(&["estimate", "--what", "chain", "--curve", &s, "--eps", "0.5"]);
    assert_eq!(r["value"], 2.0);
    let r = ok_json(&["estimate", "--what", "chain", "--curve", &s, "--eps", "1.01"]);
    assert_eq!(r["value"], 1.0);
}

#[test]
fn hyperspace_distance_and_retraction() {
    let dir = tempfile::tempdir().unwrap();
    let s = path(dir.path(), "line.json");
    fs::write(&s, r#"{"backend": "euclidean", "points": [[0.0], [1.0], [3.0]]}"#).unwrap();
    let r = ok_json(&["hyperspace", "--op", "dist", "--curve", &s, "--a", "0,1", "--b", "0,2"]);
    assert_eq!(r["hausdorff"], 2.0);

    let (fa, fb) = (path(dir.path(), "a.json"), path(dir.path(), "b.json"));
    fs::write(&fa, r#"{"base": "line.json", "members": [0]}"#).unwrap();
    fs::write(&fb, r#"{"base": "line.json", "members": [1]}"#).unwrap();
    let r = ok_json(&["hyperspace", "--op", "dist", "--subset", &fa, "--subset", &fb]);
    assert_eq!(r["hausdorff"], 1.0);

    let c = path(dir.path(), "p.json");
    lipmix(&["generate", "--kind", "graph-curve", "--profile", "parabola", "--extent", "2", "--n", "201", "-o", &c]);
    let r = ok_json(&["hyperspace", "--op", "retract-verify", "--curve", &c, "--arity", "3", "--budget", "2000"]);
    assert_eq!(r["passed"], true);
    assert_eq!(r["budget"], 2000);
}

#[test]
fn obstruct_long_arc() {
    let dir = tempfile::tempdir().unwrap();
    let c = path(dir.path(), "e.json");
    let spec = format!(r#"{{"kind": "circular-arc", "r": 1, "t_max": {}, "n": 301}}"#, 1.5 * std::f64::consts::PI);
    lipmix(&["generate", "--spec", &spec, "-o", &c]);
    let r = ok_json(&["obstruct", "--curve", &c, "--z0", "0,0", "--budget", "1000000"]);
    assert_eq!(r["witness_pair"], serde_json::json!([0, 300]));
    assert!(r["lower_bound"].as_f64().unwrap() > 2.0 / std::f64::consts::PI);
    assert_eq!(r["no_obstruction"], false);
    let auto = ok_json(&["obstruct", "--curve", &c, "--budget", "1000000"]);
    assert!(auto["lower_bound"].as_f64().unwrap() >= r["lower_bound"].as_f64().unwrap() - 1e-6);
}

#[test]
fn verify_single_criterion() {
    let out = lipmix(&["verify", "--suite", "paper", "--only", "9"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("[PASS]  9"));
    assert!(text.contains("1 of 1 criteria passed"));
    assert_eq!(lipmix(&["verify", "--only", "11"]).status.code(), Some(2));
}
