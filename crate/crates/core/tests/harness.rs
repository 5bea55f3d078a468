use std::path::Path;

use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use tracephase::harness::*;
use tracephase::numberfield::NumberField;
use tracephase::Error;

fn fixture(name: &str) -> ExperimentConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/configs").join(name);
    ExperimentConfig::load(&path).unwrap()
}

fn small_sublevel() -> ExperimentConfig {
    let mut cfg = fixture("sublevel_q.json");
    cfg.params.insert("samples".into(), json!(20_000));
    cfg
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

#[test]
fn empty_and_malformed_configs() {
    for text in ["", "{}", "[]", r#"{"experiment": ""}"#, r#"{"experiment": "nope"}"#, r#"{"experiment": "fourier", "extra": 1}"#] {
        assert!(matches!(ExperimentConfig::from_json(text), Err(Error::ConfigInvalid(_))), "{text}");
    }
    assert!(matches!(
        ExperimentConfig::from_json(r#"{"experiment": "fourier", "tol": 1e-12}"#),
        Err(Error::ConfigInvalid(_))
    ));
    let cfg = ExperimentConfig::from_json(r#"{"experiment": "fourier"}"#).unwrap();
    assert_eq!(cfg.seed, 42);
    let missing = ExperimentConfig::new("sublevel", "Q");
    assert!(matches!(execute(&missing), Err(Error::ConfigInvalid(s)) if s.contains("poly")));
    let bad = ExperimentConfig::new("tarry-sfrak", "Q(sqrt7)").with("S", json!([0])).with("alpha", json!([1]));
    assert!(matches!(execute(&bad), Err(Error::ConfigInvalid(_))));
}

#[test]
fn every_fixture_config_validates() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/configs");
    let mut count = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg = ExperimentConfig::load(&path).unwrap();
        assert!(EXPERIMENTS.contains(&cfg.experiment.as_str()));
        count += 1;
    }
    assert!(count >= 10);
}

#[test]
fn presets_resolve() {
    assert_eq!(preset_field("Q(i)").unwrap().degree(), 2);
    assert_eq!(preset_field("q(cbrt2)").unwrap().degree(), 3);
    assert!(preset_field("Q(sqrt7)").is_none());
    let inline: FieldRef = serde_json::from_value(json!({"minpoly": ["-3", "0", "1"]})).unwrap();
    assert_eq!(inline.resolve().unwrap().0.degree(), 2);
}

#[test]
fn pin_keys() {
    assert_eq!(pin_key("sublevel", &NumberField::rationals(), 3, 1), "sublevel/[0,1]/3/1");
    assert_eq!(pin_key("cover", &NumberField::gaussian(), 3, 1), "cover/[1,0,1]/3/1");
    let pins = PinnedConstants::bundled();
    for name in ["C_cal", "C_pin", "N_overlap", "C1_stability"] {
        assert!(pins.entries.values().any(|m| m.contains_key(name)), "{name} missing from the fixture");
    }
}

#[test]
fn drift_fails_naming_the_constant() {
    let cfg = small_sublevel();
    let key = pin_key("sublevel", &NumberField::rationals(), 3, 1);
    let mut pins = PinnedConstants::default();
    pins.entries.entry(key).or_default().insert("C_pin".into(), PinnedValue { value: 100.0, pinned_at: 0 });
    let dir = tempfile::tempdir().unwrap();
    let mut with_out = cfg.clone();
    with_out.output = Some(dir.path().to_path_buf());
    match run(&with_out, Some(&pins)) {
        Err(Error::ExperimentFailed(s)) => assert!(s.contains("C_pin"), "{s}"),
        other => panic!("expected drift failure, got {other:?}"),
    }
    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["passed"], json!(false));
    // the bundled pin accepts the same run
    assert!(run(&cfg, Some(&PinnedConstants::bundled())).is_ok());
}

#[test]
fn repinning_with_the_same_seed_is_identical() {
    let cfg = ExperimentConfig::new("derivative-zero", "Q").with("count", json!(100));
    let a = execute(&cfg).unwrap();
    let b = execute(&cfg).unwrap();
    let mut p1 = PinnedConstants::default();
    pin_constants(&mut p1, &a.measured, &b.measured).unwrap();
    let mut p2 = PinnedConstants::default();
    pin_constants(&mut p2, &b.measured, &a.measured).unwrap();
    let v1 = p1.get("derivative-zero/any/6/1", "C_cal").unwrap();
    assert_eq!(v1.to_bits(), p2.get("derivative-zero/any/6/1", "C_cal").unwrap().to_bits());
    assert_eq!(a.table.to_csv().unwrap(), b.table.to_csv().unwrap());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pins.json");
    p1.save(&path).unwrap();
    assert_eq!(PinnedConstants::load(&path).unwrap(), p1);

    let moved = vec![Measured { value: v1 * 1.5, ..a.measured[0].clone() }];
    assert!(matches!(pin_constants(&mut p1, &a.measured, &moved), Err(Error::CalibrationUnstable(_))));
}

#[test]
fn artifacts_reference_seed_and_hashes() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_sublevel();
    cfg.seed = 7;
    cfg.output = Some(dir.path().to_path_buf());
    run(&cfg, None).unwrap();
    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], json!(7));
    assert_eq!(manifest["experiment"], json!("sublevel"));
    assert_eq!(manifest["passed"], json!(true));
    let hex = |b: &[u8]| Sha256::digest(b).iter().map(|x| format!("{x:02x}")).collect::<String>();
    assert_eq!(manifest["field_sha256"], json!(hex(b"Q")));
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    for o in manifest["outputs"].as_array().unwrap() {
        let bytes = std::fs::read(dir.path().join(o["file"].as_str().unwrap())).unwrap();
        assert_eq!(o["sha256"], json!(hex(&bytes)));
    }
    let csv = std::fs::read_to_string(dir.path().join("sublevel.csv")).unwrap();
    assert!(csv.starts_with("eps,hits,samples,estimate,ci_low,ci_high,bound,ratio\n"));
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn csv_is_identical_across_thread_counts() {
    let configs = [
        small_sublevel(),
        ExperimentConfig::new("tarry-sfrak", "Q")
            .with("S", json!([0]))
            .with("alpha", json!([2]))
            .with("samples", json!(3000)),
        ExperimentConfig::new("comparability", "Q(i)").with("trials", json!(10)),
    ];
    for cfg in configs {
        let a = in_pool(1, || execute(&cfg).unwrap().table.to_csv().unwrap());
        let b = in_pool(3, || execute(&cfg).unwrap().table.to_csv().unwrap());
        assert_eq!(a, b, "{}", cfg.experiment);
    }
}

#[test]
fn main_families() {
    for name in ["rationals", "sqrt2", "gaussian", "sqrt2-degenerate"] {
        let (family, _) = main_family(name).unwrap();
        assert_eq!(family.params, vec![16.0, 64.0, 256.0, 1024.0]);
    }
    assert!(main_family("nope").is_err());
}
