//! Golden-file tests for every subcommand. `QLC_UPDATE_GOLDEN=1` rewrites
//! the files under tests/golden.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn qlc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qlc"))
        .args(args)
        .env_remove("QLC_THREADS")
        .output()
        .expect("run qlc")
}

fn ok_stdout(args: &[&str]) -> String {
    let out = qlc(args);
    assert!(
        out.status.success(),
        "qlc {args:?} exited {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn golden(name: &str, actual: &str) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("QLC_UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert!(expected == actual, "{name} differs from the golden file");
}

fn validate(schema: &str, doc: &str) -> Value {
    let schema_path = repo().join("schemas").join(schema);
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(&schema_path).unwrap()).unwrap();
    let value: Value = serde_json::from_str(doc).unwrap_or_else(|e| panic!("not JSON ({e}): {doc}"));
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(&value).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{schema_path:?}: {errors:?}");
    value
}

#[test]
fn singular() {
    let out = ok_stdout(&["singular", "--c", "2", "--gamma", "1"]);
    let v = validate("singular.schema.json", &out);
    assert_eq!(v.as_array().unwrap().len(), 2);
    golden("singular.json", &out);
}

#[test]
fn check_conditions() {
    let out = ok_stdout(&["check-conditions", "--c", "2", "--gamma", "1", "--beta", "-1.05", "--lambda", "0.1"]);
    assert_eq!(out, "{\"c3_3\":true,\"c3_6\":true}\n");
    validate("check-conditions.schema.json", &out);
    golden("check_conditions.json", &out);
}

#[test]
fn isoclines() {
    let out = ok_stdout(&["isoclines", "--nu", "1"]);
    let v = validate("isoclines.schema.json", &out);
    assert_eq!(v["vertical"]["tag"], "TwoParallelLines");
    let offsets: Vec<f64> = v["vertical"]["lines"]
        .as_array()
        .unwrap()
        .iter()
        .map(|l| {
            assert_eq!(l["normal"]["x"].as_f64(), Some(0.0));
            assert_eq!(l["normal"]["y"].as_f64(), Some(1.0));
            l["offset"].as_f64().unwrap()
        })
        .collect();
    // y = 0 and y = -1
    assert_eq!(offsets, [0.0, 1.0]);
    golden("isoclines.json", &out);
}

#[test]
fn rotation() {
    let out = ok_stdout(&["rotation", "--c", "2", "--gamma", "1", "--nx", "3", "--ny", "3"]);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("x,y,delta_lambda,delta_beta,delta_gamma"));
    assert_eq!(lines.count(), 9);
    golden("rotation.csv", &out);
}

#[test]
fn portrait() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("p.csv");
    let svg = dir.path().join("p.svg");
    let args = [
        "portrait", "--c", "2", "--gamma", "1", "--nx", "2", "--ny", "2", "--duration", "3", "--csv",
        csv.to_str().unwrap(), "--svg", svg.to_str().unwrap(),
    ];
    assert_eq!(ok_stdout(&args), "");
    let csv = std::fs::read_to_string(csv).unwrap();
    let svg = std::fs::read_to_string(svg).unwrap();
    assert!(csv.starts_with("t,x,y,orbit_id\n"));
    assert_eq!(svg.matches("<circle").count(), 2);
    assert_eq!(svg.matches("<polyline").count(), 8);
    assert!(svg.contains("stroke-dasharray"));
    golden("portrait.csv", &csv);
    golden("portrait.svg", &svg);
}

#[test]
fn cycles() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("d.csv");
    let out = ok_stdout(&[
        "cycles", "--c", "2", "--gamma", "1", "--beta", "-1.8", "--lambda", "0.824067924398929", "--samples", "64",
        "--csv", csv.to_str().unwrap(),
    ]);
    let v = validate("cycles.schema.json", &out);
    let st: Vec<&str> = v["records"].as_array().unwrap().iter().map(|r| r["stability"].as_str().unwrap()).collect();
    assert_eq!(st, ["Stable", "Unstable"]);
    let csv = std::fs::read_to_string(csv).unwrap();
    assert!(csv.starts_with("x,Px,dx\n"));
    golden("cycles.json", &out);
    golden("cycles.csv", &csv);
}

#[test]
fn separatrix_loop() {
    let out = ok_stdout(&["loop", "--param", "beta", "--lo", "-3", "--hi", "0", "--c", "2", "--gamma", "1"]);
    let v = validate("loop.schema.json", &out);
    assert_eq!(v["param"], "beta");
    assert_ne!(v["lo_outcome"], v["hi_outcome"]);
    golden("loop.json", &out);
}

#[test]
fn scenario_matches_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    assert_eq!(ok_stdout(&["scenario", "--c", "2", "--out", out.to_str().unwrap()]), "");
    let text = std::fs::read_to_string(&out).unwrap();
    validate("scenario.schema.json", &text);
    let fixture = std::fs::read_to_string(repo().join("crates/core/tests/fixtures/scenario_c2.json")).unwrap();
    assert!(text == fixture, "scenario report differs from the frozen c=2 fixture");
    // only the report is left behind
    let names: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names, ["r.json"]);
}

#[test]
fn scenario_orders() {
    let out = ok_stdout(&["scenario", "--c", "2", "--order", "beta-first"]);
    let v = validate("scenario.schema.json", &out);
    assert_eq!(v["verdict"]["count"], 2);
    assert_eq!(v["order"], "beta-first");
}

const GRID: &str = r#"{
  "kind": "composite",
  "parts": [
    {"kind": "explicit", "points": [
      {"c": 2.0, "gamma": 1.0, "beta": -1.8, "lambda": 0.824067924398929},
      {"c": 2.0, "gamma": 1.0, "beta": -0.95, "lambda": 0.0},
      {"c": 2.0, "gamma": 0.1, "beta": 0.0, "lambda": 0.0}
    ]},
    {"kind": "latin_hypercube", "n": 3, "seed": 5, "c": [1.5, 3.0], "lambda": [0.0, 0.5], "trace": [-0.1, 0.2]}
  ]
}"#;

#[test]
fn sweep() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("grid.json");
    std::fs::write(&grid, GRID).unwrap();
    validate("grid.schema.json", GRID);
    let out = dir.path().join("s.jsonl");
    let summary = ok_stdout(&["sweep", "--grid", grid.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let s = validate("sweep-summary.schema.json", &summary);
    assert_eq!(s["evaluated"], 5);
    assert_eq!(s["rejected"], 1);
    assert_eq!(s["max_count"], 2);
    let lines = std::fs::read_to_string(&out).unwrap();
    for l in lines.lines() {
        validate("sweep-point.schema.json", l);
    }
    assert_eq!(lines.lines().count(), 5);
    golden("sweep.jsonl", &lines);
    golden("sweep_summary.json", &summary);

    // a single worker gives the same bytes
    let out1 = dir.path().join("s1.jsonl");
    let st = Command::new(env!("CARGO_BIN_EXE_qlc"))
        .args(["sweep", "--grid", grid.to_str().unwrap(), "--out", out1.to_str().unwrap()])
        .env("QLC_THREADS", "1")
        .output()
        .unwrap();
    assert!(st.status.success());
    assert_eq!(std::fs::read_to_string(out1).unwrap(), lines);
}

#[test]
fn config_schemas_accept_defaults() {
    let cfg = serde_json::to_string(&qlc_core::scenario::ScenarioConfig::default()).unwrap();
    validate("scenario-config.schema.json", &cfg);
    let cfg = serde_json::to_string(&qlc_core::cycles::CycleConfig::default()).unwrap();
    validate("cycle-config.schema.json", &cfg);
    let grid = serde_json::to_string(&qlc_core::scenario::GridSpec::default()).unwrap();
    validate("grid.schema.json", &grid);
}

#[test]
fn exit_codes() {
    let code = |args: &[&str]| qlc(args).status.code();
    assert_eq!(code(&["bogus"]), Some(2));
    assert_eq!(code(&[]), Some(2));
    assert_eq!(code(&["check-conditions", "--c", "2"]), Some(2));
    assert_eq!(code(&["loop", "--param", "delta", "--lo", "0", "--hi", "1"]), Some(2));
    assert_eq!(code(&["singular", "--coeffs", "0,0,-1,0,0,-1,0,1,0,1,0,0"]), Some(2));
    assert_eq!(code(&["singular", "--coeffs", "1,2"]), Some(2));
    assert_eq!(code(&["--help"]), Some(0));
    // domain errors
    assert_eq!(code(&["check-conditions", "--c", "0.5", "--gamma", "1"]), Some(1));
    assert_eq!(code(&["loop", "--param", "beta", "--lo", "-1", "--hi", "-1", "--c", "2", "--gamma", "1"]), Some(1));
    assert_eq!(code(&["scenario", "--c", "1"]), Some(1));
    assert_eq!(code(&["cycles", "--c", "2", "--gamma", "3"]), Some(1));
    let bad = Command::new(env!("CARGO_BIN_EXE_qlc"))
        .args(["isoclines"])
        .env("QLC_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn raw_coefficients() {
    // the Hamiltonian fixture written out coefficient by coefficient
    let out = ok_stdout(&["isoclines", "--coeffs", "0,0,-1,0,0,-1,0,1,0,1,0,0"]);
    let v = validate("isoclines.schema.json", &out);
    assert_eq!(v["vertical"]["tag"], "TwoParallelLines");
    assert_eq!(v["horizontal"]["tag"], "TwoParallelLines");
    let cyc = ok_stdout(&["cycles", "--coeffs", "0,0,-1,0,0,-1,0,1,0,1,0,0", "--samples", "32"]);
    let v = validate("cycles.schema.json", &cyc);
    assert!(v["records"].as_array().unwrap().is_empty());
    assert!(v["center_annulus"].is_array());
}

#[test]
fn unknown_config_field_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"loop_tol": 1e-8, "loop_toll": 1}"#).unwrap();
    assert_eq!(qlc(&["scenario", "--c", "2", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}
