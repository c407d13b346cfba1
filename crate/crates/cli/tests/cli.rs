use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_delaynet");

fn fixture(name: &str) -> String {
    format!("{}/../core/fixtures/v1/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("DELAYNET_FIELD")
        .output()
        .expect("binary runs")
}

fn report(args: &[&str]) -> Value {
    let out = run(args);
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("report is JSON")
}

#[test]
fn compute_transfer_reproduces_the_determinant_table() {
    let r = report(&["compute-transfer", &fixture("fig2.json"), "--lecs", "ones"]);
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["command"], "compute-transfer");
    assert_eq!(r["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
    let dets: Vec<&str> = r["result"]["demanded_determinants"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert_eq!(dets, ["D^5", "D^5", "D^6", "D^5", "D^4"]);
}

#[test]
fn classical_check_reports_f() {
    let r = report(&["check-feasibility", &fixture("fig2.json"), "--mode", "classical"]);
    assert_eq!(r["result"]["f"], "D^25");
}

#[test]
fn search_finds_a_transform_code() {
    let r = report(&["check-feasibility", &fixture("fig2.json"), "--mode", "search"]);
    assert_eq!(r["result"]["verdict"], "solvable-transform");
    assert_eq!(r["result"]["n"], 7);
}

#[test]
fn transform_mode_without_a_root_suggests_an_extension() {
    let out = run(&["check-feasibility", &fixture("fig2.json"), "--mode", "transform", "--n", "7"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("smallest extension degree"), "{err}");
}

#[test]
fn field_comes_from_the_environment() {
    let out = Command::new(BIN)
        .args(["transform-simulate", &fixture("fig2.json"), "--n", "7", "--seed", "4"])
        .env("DELAYNET_FIELD", "2^3")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["result"]["instantaneous_relation_holds"], true);
    assert_eq!(r["result"]["wire_slots"], 7 + r["result"]["d_max"].as_u64().unwrap());
}

#[test]
fn pbna_scheme1_on_example2_is_feasible() {
    let r = report(&[
        "pbna-check",
        &fixture("ex2.json"),
        "--scheme",
        "1",
        "--nprime",
        "3",
        "--lecs",
        &fixture("ex2-lecs.json"),
    ]);
    assert_eq!(r["result"]["verdict"], "feasible");
    assert_eq!(r["inputs"].as_array().unwrap().len(), 2);
}

#[test]
fn pbna_scheme2_on_example4_with_published_schedule() {
    let r = report(&[
        "pbna-check",
        &fixture("ex4.json"),
        "--scheme",
        "2",
        "--n1",
        "5",
        "--n2",
        "3",
        "--n3",
        "3",
        "--n",
        "8",
        "--lecs",
        &fixture("ex4-lecs.json"),
    ]);
    assert_eq!(r["result"]["verdict"], "feasible");
    assert_eq!(r["result"]["g_residual_nonzero"], 0);
}

#[test]
fn pbna_infeasible_still_exits_zero() {
    let r = report(&["pbna-check", &fixture("ex3.json"), "--scheme", "1", "--nprime", "2", "--trials", "4"]);
    assert_eq!(r["result"]["verdict"], "infeasible");
}

#[test]
fn onoff_check_example5() {
    let r = report(&["onoff-check", &fixture("onoff5.json"), &fixture("onoff5-cancel.json")]);
    let slots: Vec<&str> = r["result"]["schedule"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["slots"].as_str().unwrap())
        .collect();
    assert_eq!(slots, ["odd", "even", "even"]);
}

#[test]
fn onoff_check_example6_certificate() {
    let r = report(&["onoff-check", &fixture("onoff6.json"), &fixture("onoff6-cancel.json")]);
    assert_eq!(r["result"]["feasible"], false);
    assert_eq!(r["result"]["certificate"]["kind"], "odd-cycle");
}

#[test]
fn repeated_runs_are_byte_identical() {
    let args = ["pbna-check", &fixture("ex2.json"), "--scheme", "1", "--nprime", "1", "--seed", "11"];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let seq = run(&[&args[..], &["--sequential"]].concat());
    assert_eq!(a.stdout, seq.stdout);
}

#[test]
fn empty_network_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("empty.json");
    std::fs::write(&p, "").unwrap();
    let out = run(&["compute-transfer", p.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("parse error"));
}

#[test]
fn report_goes_to_the_requested_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("r.json");
    let out = run(&["compute-transfer", &fixture("fig2.json"), "-o", p.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
    assert_eq!(r["seed"], 0);
}
