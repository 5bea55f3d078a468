use std::process::{Command, Output};

use serde_json::Value;

fn tp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tracephase"))
        .args(args)
        .env_remove("TRACEPHASE_SEED")
        .env_remove("TRACEPHASE_THREADS")
        .env_remove("TRACEPHASE_OUT")
        .env_remove("TRACEPHASE_PINS")
        .env_remove("TRACEPHASE_TOL")
        .output()
        .unwrap()
}

fn json_out(args: &[&str]) -> Value {
    let o = tp(args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn field_info() {
    let v = json_out(&["field", "info", "--field", "Q(i)"]);
    assert_eq!(v["degree"], 2);
    assert_eq!(v["trace_form"], serde_json::json!([["2", "0"], ["0", "-2"]]));
    let v = json_out(&["field", "info", "--field", r#"{"minpoly": ["-2", "0", "1"]}"#]);
    assert_eq!(v["trace_form"], serde_json::json!([["2", "0"], ["0", "4"]]));
}

#[test]
fn phase_and_functionals() {
    let cube = r#"{"n":1,"coeffs":{"(3)":["1"]}}"#;
    let v = json_out(&["phase", "eval", "--field", "Q", "--poly", cube, "--x", "2"]);
    assert_eq!(v["phase"], 8.0);
    let v = json_out(&["phase", "grad", "--field", "Q", "--poly", cube, "--x", "-1"]);
    assert_eq!(v["gradient"], serde_json::json!([3.0]));
    let v = json_out(&["hfunc", "point", "--field", "Q", "--poly", cube, "--sigma", "0", "--x", "0"]);
    assert!((v["value"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    let v = json_out(&["jfunc", "point", "--field", "Q", "--poly", cube, "--sigma", "0", "--x", "2"]);
    assert!((v["value"].as_f64().unwrap() - 6f64.sqrt()).abs() < 1e-12);
    let v = json_out(&["integrate", "--field", "Q", "--poly", r#"{"n":1,"coeffs":{}}"#]);
    // symmetric transition: the mass of the 1D cutoff is ρ1 + ρ2
    assert!((v["value"][0].as_f64().unwrap() - 1.5).abs() < 1e-12);
    assert_eq!(v["value"][1].as_f64().unwrap(), 0.0);
    let v = json_out(&["tarry", "classify", "--field", "Q", "--eta", "0,256"]);
    assert_eq!(v["alpha"], serde_json::json!([4]));
}

#[test]
fn invalid_input_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.json");
    std::fs::write(&empty, "{}").unwrap();
    let o = tp(&["run", "--config", empty.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
    let o = tp(&["run", "--tol", "1e-12", "--config", empty.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = tp(&["no-such-verb"]);
    assert!(!o.status.success());
}

#[test]
fn drift_exits_nonzero_and_names_the_constant() {
    let dir = tempfile::tempdir().unwrap();
    let pins = dir.path().join("pins.json");
    std::fs::write(
        &pins,
        r#"{"entries": {"tarry-sfrak/[0,1]/2/2": {"ratio": {"value": 1000.0, "pinned_at": 0}}}}"#,
    )
    .unwrap();
    let o = tp(&["--pins", pins.to_str().unwrap(), "tarry", "sfrak", "--field", "Q", "--S", "0", "--alpha", "2", "--samples", "2000"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("ratio"));
}

#[test]
fn csv_is_byte_identical_across_threads() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (dir, threads) in [(&a, "1"), (&b, "3")] {
        let o = tp(&[
            "--threads", threads, "--seed", "5", "--out", dir.path().to_str().unwrap(),
            "tarry", "sfrak", "--field", "Q(i)", "--S", "0,1", "--alpha", "1,1", "--samples", "400",
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let read = |d: &tempfile::TempDir, f: &str| std::fs::read(d.path().join(f)).unwrap();
    assert_eq!(read(&a, "tarry-sfrak.csv"), read(&b, "tarry-sfrak.csv"));
    assert_eq!(read(&a, "tarry-sfrak.json"), read(&b, "tarry-sfrak.json"));
    let m: Value = serde_json::from_slice(&read(&a, "manifest.json")).unwrap();
    assert_eq!(m["seed"], 5);
    assert_eq!(m["outputs"].as_array().unwrap().len(), 2);
}

#[test]
fn seed_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_tracephase"))
        .args(["tarry", "sfrak", "--field", "Q", "--S", "0", "--alpha", "1", "--samples", "200"])
        .env("TRACEPHASE_SEED", "99")
        .env("TRACEPHASE_OUT", dir.path())
        .env_remove("TRACEPHASE_PINS")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m: Value = serde_json::from_slice(&std::fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["seed"], 99);
}

#[test]
fn pin_writes_the_requested_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("dz.json");
    std::fs::write(&cfg, r#"{"experiment": "derivative-zero", "params": {"count": 50}}"#).unwrap();
    let pins = dir.path().join("pins.json");
    let o = tp(&["--pins", pins.to_str().unwrap(), "pin", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&std::fs::read(&pins).unwrap()).unwrap();
    let first = v["entries"]["derivative-zero/any/6/1"]["C_cal"]["value"].as_f64().unwrap();
    let o = tp(&["--pins", pins.to_str().unwrap(), "pin", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success());
    let v: Value = serde_json::from_slice(&std::fs::read(&pins).unwrap()).unwrap();
    assert_eq!(v["entries"]["derivative-zero/any/6/1"]["C_cal"]["value"].as_f64().unwrap(), first);
}

#[test]
fn sharpness_config_file_is_checked() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"A": 2.0, "m_min": 2, "m_max": 3, "a": 10.0, "c1": 0.0005}"#).unwrap();
    let o = tp(&["tarry", "sharpness", "--field", "Q", "--config", bad.to_str().unwrap(), "--trials", "2"]);
    assert_eq!(o.status.code(), Some(2));
    let unknown = dir.path().join("unknown.json");
    std::fs::write(&unknown, r#"{"A": 2.0, "b": 1}"#).unwrap();
    let o = tp(&["tarry", "sharpness", "--field", "Q", "--config", unknown.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
