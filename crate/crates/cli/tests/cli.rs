use std::path::Path;
use std::process::{Command, Output};

use kkt_spectra::report::{parse_report, Payload};
use serde_json::Value;

const EXAMPLE2: &str = r#"{ "n": 2, "p": 2,
  "f": { "lin": [1, 0], "quad": [[2, 0], [0, 2]] },
  "G": { "A0": [0, 0, 0, 0], "A": [[1, 0, 0, 0], [0, 0, 0, 1]] } }"#;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kkt-spectra")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json(args: &[&str]) -> (String, Value) {
    let mut all = args.to_vec();
    all.extend(["--format", "json"]);
    let o = run(&all);
    assert!(o.status.success(), "{:?}: {}", args, String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let v = serde_json::from_str(&text).expect("valid json");
    (text, v)
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn json_is_deterministic_and_round_trips() {
    let args = ["analyze", "--builtin", "example2"];
    let (a, _) = json(&args);
    let (b, _) = json(&args);
    assert_eq!(a, b);
    let r = parse_report(&a).unwrap();
    assert!(matches!(r.payload, Payload::Analyze(_)));
}

#[test]
fn example3_analysis() {
    let (_, v) = json(&["analyze", "--builtin", "example3"]);
    assert_eq!(v["schema"], "kkt-spectra/1");
    assert_eq!(v["criticality"]["tag"], "Noncritical");
    assert_eq!(v["sosc"]["verdict"], "SOSCy_holds");
    assert_eq!(v["partition"]["strict_complementarity"], false);
}

#[test]
fn example2_partition_has_one_degenerate_index() {
    let (_, v) = json(&["cones", "--builtin", "example2"]);
    assert_eq!(v["partition"]["beta"].as_array().unwrap().len(), 1);
    assert_eq!(v["partition"]["alpha"].as_array().unwrap().len(), 0);
}

#[test]
fn problem_file_matches_builtin() {
    let dir = tempfile::tempdir().unwrap();
    let prob = write(dir.path(), "p.json", EXAMPLE2);
    let point = write(dir.path(), "x.json", r#"{"x": [0, 0], "Y": [-1, 0, 0, 0]}"#);
    let (_, file) = json(&["criticality", "--problem", &prob, "--point", &point]);
    let (_, builtin) = json(&["criticality", "--builtin", "example2"]);
    assert_eq!(file["criticality"], builtin["criticality"]);
    assert_eq!(file["nlp_crosscheck"]["tag"], "Noncritical");
}

#[test]
fn perturb_sweeps() {
    let (_, v) = json(&["perturb", "--builtin", "example2"]);
    let e = v["error_bounds"]["exponent_fit"]["exponent"].as_f64().unwrap();
    assert!((e - 2.0 / 3.0).abs() < 0.05, "{e}");
    assert_eq!(v["error_bounds"]["verdict_101"], "diverging");
    let (_, v) = json(&["perturb", "--builtin", "example3"]);
    assert_eq!(v["error_bounds"]["verdict_101"], "bounded");
}

#[test]
fn perturb_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sweep.csv");
    let o = run(&["perturb", "--builtin", "example3", "--geo", "1e-2:1e-4:5", "--csv", csv.to_str().unwrap()]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("parameter,dx,p_norm,dy"));
    assert_eq!(lines.count(), 5);
}

#[test]
fn text_output_names_the_verdicts() {
    let o = run(&["analyze", "--builtin", "example3"]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.contains("Noncritical") && s.contains("SOSCy_holds"), "{s}");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let prob = write(dir.path(), "p.json", EXAMPLE2);
    let bad = write(dir.path(), "bad.json", r#"{"x": [0], "Y": [0, 0, 0]"#);
    assert_eq!(run(&["analyze", "--problem", &prob, "--point", &bad]).status.code(), Some(2));
    let far = write(dir.path(), "far.json", r#"{"x": [1, 1], "Y": [0, 0, 0, 0]}"#);
    assert_eq!(run(&["analyze", "--problem", &prob, "--point", &far]).status.code(), Some(2));
    assert_eq!(run(&["perturb", "--builtin", "example2", "--geo", ""]).status.code(), Some(1));
    assert_eq!(run(&["analyze"]).status.code(), Some(1));
    let missing = dir.path().join("none.json");
    assert_eq!(run(&["analyze", "--problem", missing.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(run(&["analyze", "--builtin", "example9"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}
