use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn resalg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_resalg")).args(args).output().expect("spawn resalg")
}

fn envelope(args: &[&str]) -> Value {
    let out = resalg(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("resalg-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn strip_timestamps(mut v: Value) -> Value {
    let m = v.as_object_mut().unwrap();
    m.remove("started");
    m.remove("finished");
    v
}

#[test]
fn decompose_reduces_to_prime_system() {
    let e = envelope(&["decompose", "--freqs", "3,6"]);
    assert_eq!(e["schema_version"], 1);
    let c = &e["payload"]["components"][0];
    assert_eq!(c["n"], serde_json::json!([1, 2]));
    assert_eq!(c["characteristic"], "3");
    assert_eq!(e["residuals"]["passed"], true);
}

#[test]
fn hilbert_basis_of_one_two() {
    let e = envelope(&["hilbert-basis", "--n", "1,2"]);
    let gammas = e["payload"]["gammas"].as_array().unwrap();
    assert_eq!(gammas.len(), 2);
    assert!(gammas.contains(&serde_json::json!([2, -1])));
    assert!(gammas.contains(&serde_json::json!([-2, 1])));
}

#[test]
fn bad_input_exits_with_usage_code() {
    assert_eq!(resalg(&["decompose", "--freqs", "3,abc"]).status.code(), Some(2));
    assert_eq!(resalg(&["hilbert-basis", "--n", "2,4"]).status.code(), Some(2));
    assert_eq!(resalg(&["magneto", "--ratio-sq", "0.8", "--tol", "-1"]).status.code(), Some(2));
    assert_eq!(resalg(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn same_seed_same_envelope() {
    let args = ["verify-jacobi", "--n", "1,2", "--samples", "50", "--seed", "7"];
    let a = strip_timestamps(envelope(&args));
    let b = strip_timestamps(envelope(&args));
    assert_eq!(a, b);
    assert_eq!(a["config"]["seed"], 7);
}

#[test]
fn csv_output_with_envelope_sidecar() {
    let dir = scratch("csv");
    let out = dir.join("basis.csv");
    let o = resalg(&["hilbert-basis", "--n", "1,2", "--format", "csv", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(rdr.headers().unwrap().iter().collect::<Vec<_>>(), ["kind", "vector"]);
    assert_eq!(rdr.records().count(), 4);
    let side: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("basis.csv.envelope.json")).unwrap()).unwrap();
    assert_eq!(side["config"]["format"], "csv");
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn precess_writes_trajectory() {
    let dir = scratch("precess");
    let traj = dir.join("traj.csv");
    let e = envelope(&["precess", "--n", "1,2", "--f", "A3", "--t-max", "20", "--steps", "40", "--csv", traj.to_str().unwrap()]);
    assert_eq!(e["residuals"]["passed"], true);
    let rows = std::fs::read_to_string(&traj).unwrap().lines().count();
    assert_eq!(rows, 42);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn tampered_acceptance_fails() {
    let ok = resalg(&["accept", "--only", "A2"]);
    assert!(ok.status.success());
    let bad = resalg(&["accept", "--only", "A2", "--tamper-nu", "1e-6"]);
    assert_eq!(bad.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&bad.stdout).unwrap();
    assert_eq!(v["residuals"]["passed"], false);
}
