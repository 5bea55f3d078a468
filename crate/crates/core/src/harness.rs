//! Experiment configs, orchestration, CSV/JSON artifacts and pinned constants.
//!
//! An experiment reads a JSON config, produces a table, a JSON summary and a
//! list of named checks. Constants measured by an experiment are compared
//! with the pinned values in `fixtures/pinned_constants.json`.
//!
//! ```
//! use tracephase::harness::{run, ExperimentConfig};
//!
//! let cfg = ExperimentConfig::from_json(r#"{"experiment": "fourier", "field": "Q",
//!     "params": {"points": 3}}"#).unwrap();
//! let out = run(&cfg, None).unwrap();
//! assert!(out.passed());
//! assert_eq!(out.table.headers[0], "x");
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::cutoff::Cutoff;
use crate::error::{Error, Result};
use crate::functionals::{j_stability_ratio, vitali_cover, CoverConfig};
use crate::multiindex::MultiIndex;
use crate::numberfield::{FieldSpec, NumberField};
use crate::phases::{check_gradient_comparability, PolySpec, TracePolynomial};
use crate::quadrature::{kb_fourier, verify_main_bound, Family};
use crate::stats::loglog_slope;
use crate::sublevel::{calibrate_derivative_zero, sublevel_measure, SublevelCondition};
use crate::tarry::{lq_tail_experiment, sfrak_measure, sharpness_experiment, threshold, LqConfig, SharpnessConfig, Trend};

/// Pinned constants shipped with the crate.
pub const BUNDLED_PINS: &str = include_str!("../fixtures/pinned_constants.json");

/// A field given by preset name, path to a JSON spec, or inline spec.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum FieldRef {
    Named(String),
    Inline(FieldSpec),
}

impl FieldRef {
    pub fn resolve(&self) -> Result<(NumberField, String)> {
        match self {
            FieldRef::Inline(spec) => {
                let k = NumberField::from_spec(spec)?;
                Ok((k, serde_json::to_string(spec)?))
            }
            FieldRef::Named(name) => {
                if let Some(k) = preset_field(name) {
                    return Ok((k, name.clone()));
                }
                let text = std::fs::read_to_string(name)
                    .map_err(|e| Error::ConfigInvalid(format!("field `{name}` is neither a preset nor a readable file: {e}")))?;
                Ok((NumberField::from_json(&text)?, text))
            }
        }
    }
}

/// `Q`, `Q(sqrt2)`, `Q(i)` and `Q(cbrt2)`, with a few spellings.
pub fn preset_field(name: &str) -> Option<NumberField> {
    match name.to_ascii_lowercase().replace(' ', "").as_str() {
        "q" | "rationals" => Some(NumberField::rationals()),
        "q(sqrt2)" | "sqrt2" => Some(NumberField::sqrt2()),
        "q(i)" | "gaussian" | "i" => Some(NumberField::gaussian()),
        "q(cbrt2)" | "cbrt2" | "cube_root2" => Some(NumberField::cube_root2()),
        _ => None,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    #[serde(default)]
    pub field: Option<FieldRef>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub params: BTreeMap<String, Value>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_seed() -> u64 {
    42
}

fn default_tol() -> f64 {
    1e-7
}

impl ExperimentConfig {
    pub fn new(experiment: &str, field: &str) -> Self {
        ExperimentConfig {
            experiment: experiment.into(),
            field: Some(FieldRef::Named(field.into())),
            seed: 42,
            tol: default_tol(),
            params: BTreeMap::new(),
            output: None,
        }
    }

    pub fn with(mut self, key: &str, v: Value) -> Self {
        self.params.insert(key.into(), v);
        self
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(s).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.experiment.trim().is_empty() {
            return Err(Error::ConfigInvalid("experiment name is empty".into()));
        }
        if !EXPERIMENTS.contains(&self.experiment.as_str()) {
            return Err(Error::ConfigInvalid(format!("unknown experiment `{}`", self.experiment)));
        }
        if !(1e-9..=1e-3).contains(&self.tol) {
            return Err(Error::ConfigInvalid(format!("tolerance {:e} outside [1e-9, 1e-3]", self.tol)));
        }
        Ok(())
    }

    fn field(&self) -> Result<(NumberField, String)> {
        self.field.as_ref().unwrap_or(&FieldRef::Named("Q".into())).resolve()
    }

    fn get<T: serde::de::DeserializeOwned>(&self, key: &str, default: T) -> Result<T> {
        match self.params.get(key) {
            None => Ok(default),
            Some(v) => serde_json::from_value(v.clone()).map_err(|e| Error::ConfigInvalid(format!("parameter `{key}`: {e}"))),
        }
    }

    fn require<T: serde::de::DeserializeOwned>(&self, key: &str) -> Result<T> {
        let v = self.params.get(key).ok_or_else(|| Error::ConfigInvalid(format!("missing parameter `{key}`")))?;
        serde_json::from_value(v.clone()).map_err(|e| Error::ConfigInvalid(format!("parameter `{key}`: {e}")))
    }
}

pub const EXPERIMENTS: &[&str] = &[
    "verify-main",
    "comparability",
    "sublevel",
    "derivative-zero",
    "j-stability",
    "cover",
    "fourier",
    "tarry-lq",
    "tarry-sharpness",
    "tarry-sfrak",
];

/// Rows of formatted cells under fixed headers.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(headers: &[&str]) -> Self {
        Table { headers: headers.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.headers)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
    }
}

/// Shortest round-trip decimal form.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|a| fmt_f64(*a)).collect::<Vec<_>>().join(" ")
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Measured {
    pub key: String,
    pub name: String,
    pub value: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Outcome {
    pub experiment: String,
    pub table: Table,
    pub summary: Value,
    pub checks: Vec<Check>,
    pub measured: Vec<Measured>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn first_failure(&self) -> Option<&Check> {
        self.checks.iter().find(|c| !c.passed)
    }

    fn check(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(Check { name: name.into(), passed, detail });
    }
}

/// `experiment/field/d/n`.
pub fn pin_key(experiment: &str, field: &NumberField, d: u32, n: usize) -> String {
    let m: Vec<String> = field.minpoly().iter().map(|c| c.to_string()).collect();
    format!("{experiment}/[{}]/{d}/{n}", m.join(","))
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PinnedValue {
    pub value: f64,
    /// Seconds since the Unix epoch.
    pub pinned_at: u64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct PinnedConstants {
    pub entries: BTreeMap<String, BTreeMap<String, PinnedValue>>,
}

impl PinnedConstants {
    pub fn bundled() -> Self {
        serde_json::from_str(BUNDLED_PINS).expect("bundled pinned constants parse")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn get(&self, key: &str, name: &str) -> Option<f64> {
        self.entries.get(key)?.get(name).map(|p| p.value)
    }

    /// Fails when a pinned constant moved by more than 25%.
    pub fn verify(&self, m: &Measured) -> Result<Option<f64>> {
        match self.get(&m.key, &m.name) {
            None => Ok(None),
            Some(p) => {
                if (m.value - p).abs() > 0.25 * p.abs() {
                    Err(Error::ExperimentFailed(format!(
                        "pinned constant {} for {} drifted: measured {}, pinned {}",
                        m.name, m.key, m.value, p
                    )))
                } else {
                    Ok(Some(p))
                }
            }
        }
    }
}

/// Records constants from two calibration runs of the same experiment.
pub fn pin_constants(pins: &mut PinnedConstants, first: &[Measured], second: &[Measured]) -> Result<()> {
    if first.len() != second.len() {
        return Err(Error::CalibrationUnstable("runs measured different constants".into()));
    }
    let now = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    for (a, b) in first.iter().zip(second) {
        if a.key != b.key || a.name != b.name {
            return Err(Error::CalibrationUnstable(format!("{} vs {}", a.name, b.name)));
        }
        let scale = a.value.abs().max(b.value.abs());
        if (a.value - b.value).abs() > 0.1 * scale {
            return Err(Error::CalibrationUnstable(format!("{} for {}: {} vs {}", a.name, a.key, a.value, b.value)));
        }
    }
    for a in first {
        pins.entries
            .entry(a.key.clone())
            .or_default()
            .insert(a.name.clone(), PinnedValue { value: a.value, pinned_at: now });
    }
    Ok(())
}

fn parse_poly(cfg: &ExperimentConfig, key: &str, k: usize) -> Result<TracePolynomial> {
    let spec: PolySpec = cfg.require(key)?;
    TracePolynomial::from_spec(&spec, k)
}

fn random_univariate<R: Rng>(k: usize, deg: u32, rng: &mut R) -> TracePolynomial {
    let terms: Vec<(u32, Vec<f64>)> = (1..=deg).map(|d| (d, (0..k).map(|_| 2.0 * rng.gen::<f64>() - 1.0).collect())).collect();
    TracePolynomial::univariate(k, &terms)
}

/// Stock families for the main bound.
pub fn main_family(name: &str) -> Result<(Family, f64)> {
    let params = vec![16.0, 64.0, 256.0, 1024.0];
    let (field, base, psi, s, slope) = match name {
        "rationals" => {
            let k = NumberField::rationals();
            (k, TracePolynomial::monomial(1, 1, 2, vec![1.0]), Cutoff::centered(1, 0.15, 0.3)?, vec![0], -0.5)
        }
        "sqrt2" => {
            let k = NumberField::sqrt2();
            (k, TracePolynomial::monomial(2, 1, 2, vec![1.0, 0.0]), Cutoff::centered(2, 0.15, 0.3)?, vec![0, 1], -1.0)
        }
        "gaussian" => {
            let k = NumberField::gaussian();
            (k, TracePolynomial::monomial(2, 1, 2, vec![1.0, 0.0]), Cutoff::centered(2, 0.15, 0.3)?, vec![0, 1], -1.0)
        }
        "sqrt2-degenerate" => {
            // the coefficient -√2 + √2·1 vanishes under the first embedding
            let k = NumberField::sqrt2();
            let a = vec![-std::f64::consts::SQRT_2, 1.0];
            (k, TracePolynomial::monomial(2, 1, 2, a), Cutoff::centered(2, 0.1, 0.2)?, vec![1], -0.5)
        }
        other => return Err(Error::ConfigInvalid(format!("unknown family `{other}`"))),
    };
    Ok((Family { field, base, params, psi, s }, slope))
}

fn exp_verify_main(cfg: &ExperimentConfig) -> Result<Outcome> {
    let name: String = cfg.get("family", "sqrt2".to_string())?;
    let (mut family, expected) = main_family(&name)?;
    if let Some(p) = cfg.params.get("params") {
        family.params = serde_json::from_value(p.clone()).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
    }
    let rep = verify_main_bound(&family, cfg.tol, None)?;
    let mut table = Table::new(&["family", "lambda", "abs_i", "h_s", "product", "slope_i", "converged"]);
    for r in &rep.rows {
        table.push(vec![
            name.clone(),
            fmt_f64(r.param),
            fmt_f64(r.abs_i),
            fmt_f64(r.h),
            fmt_f64(r.product),
            fmt_f64(rep.slope_i),
            r.converged.to_string(),
        ]);
    }
    let mut out = Outcome {
        experiment: cfg.experiment.clone(),
        table,
        summary: serde_json::to_value(&rep)?,
        checks: vec![],
        measured: vec![],
    };
    out.check(
        "slope_i",
        (rep.slope_i - expected).abs() <= 0.10,
        format!("fitted {} expected {}", rep.slope_i, expected),
    );
    out.check("slope_sum", (rep.slope_i + rep.slope_h).abs() <= 0.15, format!("slope_i + slope_h = {}", rep.slope_i + rep.slope_h));
    out.check("max_over_median", rep.max_over_median <= 3.0, format!("{}", rep.max_over_median));
    out.check("converged", rep.rows.iter().all(|r| r.converged), String::new());
    Ok(out)
}

fn exp_comparability(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (field, _) = cfg.field()?;
    let trials: usize = cfg.get("trials", 100)?;
    let npts: usize = cfg.get("points", 20)?;
    let max_deg: u32 = cfg.get("max_degree", 4)?;
    let k = field.degree();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut table = Table::new(&["trial", "degree", "c_lower", "c_upper", "ratio_min", "ratio_max", "holds"]);
    let mut all = true;
    for t in 0..trials {
        let deg = rng.gen_range(1..=max_deg);
        let f = random_univariate(k, deg, &mut rng);
        let pts: Vec<Vec<f64>> = (0..npts).map(|_| (0..k).map(|_| 4.0 * rng.gen::<f64>() - 2.0).collect()).collect();
        let r = check_gradient_comparability(&field, &f, &pts)?;
        all &= r.holds;
        table.push(vec![
            t.to_string(),
            deg.to_string(),
            fmt_f64(r.c_lower),
            fmt_f64(r.c_upper),
            fmt_f64(r.ratio_min),
            fmt_f64(r.ratio_max),
            r.holds.to_string(),
        ]);
    }
    let mut out = Outcome { experiment: cfg.experiment.clone(), table, summary: json!({"trials": trials}), checks: vec![], measured: vec![] };
    out.check("comparability", all, "both inequalities at every point".into());
    Ok(out)
}

#[derive(Deserialize)]
struct CondSpec {
    sigma: usize,
    alpha: MultiIndex,
    mu: f64,
}

fn exp_sublevel(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (field, _) = cfg.field()?;
    let f = parse_poly(cfg, "poly", field.degree())?;
    let conds: Vec<CondSpec> = cfg.require("conditions")?;
    let eps_list: Vec<f64> = cfg.require("eps")?;
    let samples: u64 = cfg.get("samples", 1_000_000)?;
    if samples < 10_000 {
        return Err(Error::ConfigInvalid("at least 10^4 samples".into()));
    }
    let mut table = Table::new(&["eps", "hits", "samples", "estimate", "ci_low", "ci_high", "bound", "ratio"]);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut worst: f64 = 0.0;
    for &eps in &eps_list {
        let c: Vec<SublevelCondition> = conds
            .iter()
            .map(|c| SublevelCondition { sigma: c.sigma, alpha: c.alpha.clone(), eps, mu: c.mu })
            .collect();
        let r = sublevel_measure(&field, &f, &c, samples, cfg.seed)?;
        worst = worst.max(r.ratio);
        if r.hits > 0 {
            xs.push(eps);
            ys.push(r.estimate);
        }
        table.push(vec![
            fmt_f64(eps),
            r.hits.to_string(),
            r.samples.to_string(),
            fmt_f64(r.estimate),
            fmt_f64(r.ci_low),
            fmt_f64(r.ci_high),
            fmt_f64(r.bound),
            fmt_f64(r.ratio),
        ]);
    }
    let expected: f64 = conds.iter().map(|c| 1.0 / (c.alpha.degree() as f64 - 1.0)).sum();
    let slope = if xs.len() >= 2 { loglog_slope(&xs, &ys) } else { f64::NAN };
    let d = f.degree();
    let mut out = Outcome {
        experiment: cfg.experiment.clone(),
        table,
        summary: json!({"slope": slope, "expected_slope": expected, "max_ratio": worst}),
        checks: vec![],
        measured: vec![Measured { key: pin_key("sublevel", &field, d, f.nvars()), name: "C_pin".into(), value: worst }],
    };
    if xs.len() >= 2 {
        out.check("slope", (slope - expected).abs() <= 0.15, format!("fitted {slope} expected {expected}"));
    }
    Ok(out)
}

fn exp_derivative_zero(cfg: &ExperimentConfig) -> Result<Outcome> {
    let count: usize = cfg.get("count", 500)?;
    let eps_cal: f64 = cfg.get("eps_cal", 0.01)?;
    let c = calibrate_derivative_zero(count, eps_cal, cfg.seed)?;
    let mut table = Table::new(&["count", "eps_cal", "c_cal"]);
    table.push(vec![count.to_string(), fmt_f64(eps_cal), fmt_f64(c)]);
    Ok(Outcome {
        experiment: cfg.experiment.clone(),
        table,
        summary: json!({"C_cal": c}),
        checks: vec![],
        measured: vec![Measured { key: "derivative-zero/any/6/1".into(), name: "C_cal".into(), value: c }],
    })
}

fn exp_j_stability(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (field, _) = cfg.field()?;
    let k = field.degree();
    let trials: usize = cfg.get("trials", 100)?;
    let eps: f64 = cfg.get("eps", 0.05)?;
    let deg: u32 = cfg.get("degree", 3)?;
    let s: Vec<usize> = cfg.get("S", (0..k).collect())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut table = Table::new(&["trial", "x", "ratio"]);
    let mut worst: f64 = 1.0;
    for t in 0..trials {
        let f = random_univariate(k, deg, &mut rng);
        let x: Vec<f64> = (0..k).map(|_| 2.0 * rng.gen::<f64>() - 1.0).collect();
        let (r, _) = j_stability_ratio(&field, &f, &s, &x, eps, &mut rng)?;
        worst = worst.max(r);
        table.push(vec![t.to_string(), fmt_vec(&x), fmt_f64(r)]);
    }
    let mut out = Outcome {
        experiment: cfg.experiment.clone(),
        table,
        summary: json!({"max_ratio": worst}),
        checks: vec![],
        measured: vec![Measured { key: pin_key("j-stability", &field, deg, 1), name: "C1_stability".into(), value: worst }],
    };
    out.check("ratio", worst <= 10.0, format!("max two-sided ratio {worst}"));
    Ok(out)
}

fn exp_cover(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (field, _) = cfg.field()?;
    let k = field.degree();
    let f = parse_poly(cfg, "poly", k)?;
    let s: Vec<usize> = cfg.get("S", (0..k).collect())?;
    let eps: f64 = cfg.get("eps", 0.05)?;
    let rho: (f64, f64) = cfg.get("rho", (0.5, 1.0))?;
    let ppa: usize = cfg.get("points_per_axis", if k * f.nvars() == 1 { 401 } else { 41 })?;
    let psi = Cutoff::centered(k * f.nvars(), rho.0, rho.1)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let ccfg = CoverConfig { points_per_axis: ppa, ..Default::default() };
    let rep = vitali_cover(&field, &f, &s, &psi, eps, ccfg, &mut rng)?;
    let mut table = Table::new(&["center"]);
    for c in &rep.centers {
        table.push(vec![fmt_vec(c)]);
    }
    Ok(Outcome {
        experiment: cfg.experiment.clone(),
        table,
        summary: json!({"centers": rep.centers.len(), "candidates": rep.candidates, "overlap": rep.overlap,
                        "infinite_centers": rep.infinite_centers}),
        checks: vec![],
        measured: vec![Measured {
            key: pin_key("cover", &field, f.degree(), f.nvars()),
            name: "N_overlap".into(),
            value: rep.overlap as f64,
        }],
    })
}

fn exp_fourier(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (field, _) = cfg.field()?;
    let k = field.degree();
    let points: usize = cfg.get("points", 50)?;
    let rho: (f64, f64) = cfg.get("rho", (0.5, 1.0))?;
    let radius: f64 = cfg.get("radius", 3.0)?;
    let psi = Cutoff::centered(k, rho.0, rho.1)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut table = Table::new(&["x", "trace_re", "trace_im", "plain_re", "plain_im", "rel_diff"]);
    let mut worst: f64 = 0.0;
    for _ in 0..points {
        let x: Vec<f64> = (0..k).map(|_| radius * (2.0 * rng.gen::<f64>() - 1.0)).collect();
        let p = kb_fourier(&field, &psi, &x, cfg.tol.min(1e-8))?;
        let rel = (p.trace_side - p.plain_side).norm() / p.plain_side.norm().max(1e-300);
        worst = worst.max(rel);
        table.push(vec![
            fmt_vec(&x),
            fmt_f64(p.trace_side.re),
            fmt_f64(p.trace_side.im),
            fmt_f64(p.plain_side.re),
            fmt_f64(p.plain_side.im),
            fmt_f64(rel),
        ]);
    }
    let mut out = Outcome { experiment: cfg.experiment.clone(), table, summary: json!({"max_rel_diff": worst}), checks: vec![], measured: vec![] };
    out.check("fourier", worst <= 1e-6, format!("max relative difference {worst:e}"));
    Ok(out)
}

fn exp_tarry_lq(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (field, _) = cfg.field()?;
    let n: usize = cfg.get("n", 2)?;
    let qn = threshold(n) as f64;
    let q_list: Vec<f64> = cfg.get("q", vec![qn - 1.0, qn + 1.0])?;
    let shells: Vec<i32> = cfg.get("shells", (2..=7).collect())?;
    let mut lcfg = LqConfig::new(n, q_list, shells);
    lcfg.seed = cfg.seed;
    lcfg.tol = cfg.tol.min(1e-8);
    lcfg.directions = cfg.get("directions", 64)?;
    lcfg.aligned = cfg.get("aligned", 8)?;
    lcfg.radii = cfg.get("radii", 16)?;
    let rep = lq_tail_experiment(&field, &lcfg)?;
    let mut table = Table::new(&["shell", "q", "value", "cumulative", "ratio"]);
    for r in &rep.rows {
        table.push(vec![r.j.to_string(), fmt_f64(r.q), fmt_f64(r.value), fmt_f64(r.cumulative), fmt_f64(r.ratio)]);
    }
    let mut out = Outcome { experiment: cfg.experiment.clone(), table, summary: serde_json::to_value(&rep.trends)?, checks: vec![], measured: vec![] };
    for (q, t) in &rep.trends {
        if *q > qn {
            out.check(&format!("q={q}"), *t == Trend::Convergent, format!("{t:?}"));
        } else if *q < qn {
            out.check(&format!("q={q}"), *t == Trend::Divergent, format!("{t:?}"));
        }
    }
    Ok(out)
}

fn exp_tarry_sharpness(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (field, _) = cfg.field()?;
    let k = field.degree();
    let n: usize = cfg.get("n", 2)?;
    let trials: usize = cfg.get("trials", 24)?;
    let mut scfg = SharpnessConfig {
        base: cfg.get("A", 2.0)?,
        m_min: cfg.get("m_min", 2)?,
        m_max: cfg.get("m_max", 4)?,
        a: cfg.get("a", 4.0)?,
        c1: cfg.get("c1", 1e-4)?,
        seed: cfg.seed,
        e_constant: cfg.get("e_constant", None)?,
    };
    scfg.seed = cfg.seed;
    let rep = sharpness_experiment(&field, n, &scfg, trials, cfg.tol.min(1e-8))?;
    let mut table = Table::new(&["m", "q", "trial", "r", "abs_ii", "product"]);
    for r in &rep.rows {
        let rs: Vec<String> = r.r.iter().map(|v| v.to_string()).collect();
        table.push(vec![r.m.to_string(), fmt_f64(r.q), r.trial.to_string(), rs.join(" "), fmt_f64(r.abs_ii), fmt_f64(r.product)]);
    }
    let mut out = Outcome {
        experiment: cfg.experiment.clone(),
        table,
        summary: json!({"medians": rep.medians, "spread": rep.spread, "slope": rep.slope,
                        "min_product": rep.min_product, "e_constant": rep.e_constant}),
        checks: vec![],
        measured: vec![Measured { key: pin_key("tarry-sharpness", &field, n as u32, n), name: "c_pin".into(), value: rep.min_product }],
    };
    out.check("spread", rep.spread <= 20.0, format!("{}", rep.spread));
    out.check("slope", (rep.slope + k as f64).abs() <= 0.2, format!("fitted {} expected {}", rep.slope, -(k as f64)));
    out.check("converged", rep.rows.iter().all(|r| r.converged), String::new());
    Ok(out)
}

fn exp_tarry_sfrak(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (field, _) = cfg.field()?;
    let n: usize = cfg.get("n", 2)?;
    let s: Vec<usize> = cfg.require("S")?;
    let alpha: Vec<i32> = cfg.require("alpha")?;
    let samples: u64 = cfg.get("samples", 20_000)?;
    let box_half: Option<f64> = cfg.get("box_half", None)?;
    let r = sfrak_measure(&field, n, &s, &alpha, samples, box_half, cfg.seed, None)?;
    let mut table = Table::new(&["hits", "samples", "box_half", "estimate", "ci_low", "ci_high", "bound", "ratio"]);
    table.push(vec![
        r.hits.to_string(),
        r.samples.to_string(),
        fmt_f64(r.box_half),
        fmt_f64(r.estimate),
        fmt_f64(r.ci_low),
        fmt_f64(r.ci_high),
        fmt_f64(r.bound),
        fmt_f64(r.ratio),
    ]);
    let amax = alpha.iter().copied().max().unwrap_or(0).max(0) as u32;
    Ok(Outcome {
        experiment: cfg.experiment.clone(),
        table,
        summary: serde_json::to_value(&r)?,
        checks: vec![],
        measured: vec![Measured { key: pin_key("tarry-sfrak", &field, amax, n), name: "ratio".into(), value: r.ratio }],
    })
}

/// Runs the experiment without touching pins or files.
pub fn execute(cfg: &ExperimentConfig) -> Result<Outcome> {
    cfg.validate()?;
    match cfg.experiment.as_str() {
        "verify-main" => exp_verify_main(cfg),
        "comparability" => exp_comparability(cfg),
        "sublevel" => exp_sublevel(cfg),
        "derivative-zero" => exp_derivative_zero(cfg),
        "j-stability" => exp_j_stability(cfg),
        "cover" => exp_cover(cfg),
        "fourier" => exp_fourier(cfg),
        "tarry-lq" => exp_tarry_lq(cfg),
        "tarry-sharpness" => exp_tarry_sharpness(cfg),
        "tarry-sfrak" => exp_tarry_sfrak(cfg),
        other => Err(Error::ConfigInvalid(format!("unknown experiment `{other}`"))),
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Runs an experiment, checks pinned constants and writes
/// `<experiment>.csv`, `<experiment>.json` and `manifest.json` into the
/// output directory when one is set. Fails with the first failed check.
pub fn run(cfg: &ExperimentConfig, pins: Option<&PinnedConstants>) -> Result<Outcome> {
    let mut out = execute(cfg)?;
    let mut drift = None;
    if let Some(p) = pins {
        for m in &out.measured {
            match p.verify(m) {
                Ok(Some(v)) => out.checks.push(Check { name: m.name.clone(), passed: true, detail: format!("pinned {v}") }),
                Ok(None) => log::warn!("{} for {} is not pinned", m.name, m.key),
                Err(e) => {
                    out.checks.push(Check { name: m.name.clone(), passed: false, detail: e.to_string() });
                    drift.get_or_insert(e);
                }
            }
        }
    }
    if let Some(dir) = &cfg.output {
        write_artifacts(cfg, &out, dir)?;
    }
    if let Some(e) = drift {
        return Err(e);
    }
    if let Some(c) = out.first_failure() {
        return Err(Error::ExperimentFailed(format!("{}: {}", c.name, c.detail)));
    }
    Ok(out)
}

pub fn write_artifacts(cfg: &ExperimentConfig, out: &Outcome, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let csv = out.table.to_csv()?;
    let json_text = serde_json::to_string_pretty(&json!({
        "experiment": out.experiment,
        "summary": out.summary,
        "checks": out.checks,
        "measured": out.measured,
        "table": out.table,
    }))? + "\n";
    let csv_name = format!("{}.csv", cfg.experiment);
    let json_name = format!("{}.json", cfg.experiment);
    std::fs::write(dir.join(&csv_name), &csv)?;
    std::fs::write(dir.join(&json_name), &json_text)?;
    let field_text = match &cfg.field {
        Some(f) => f.resolve()?.1,
        None => "Q".into(),
    };
    let mut inputs = cfg.clone();
    inputs.output = None;
    let manifest = json!({
        "experiment": cfg.experiment,
        "seed": cfg.seed,
        "tol": cfg.tol,
        "config_sha256": sha256_hex(serde_json::to_string(&inputs)?.as_bytes()),
        "field_sha256": sha256_hex(field_text.as_bytes()),
        "version": env!("CARGO_PKG_VERSION"),
        "passed": out.passed(),
        "outputs": [
            {"file": csv_name, "sha256": sha256_hex(csv.as_bytes())},
            {"file": json_name, "sha256": sha256_hex(json_text.as_bytes())},
        ],
    });
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(())
}

/// Real and imaginary parts separated by a space.
pub fn fmt_complex(z: Complex64) -> String {
    format!("{} {}", fmt_f64(z.re), fmt_f64(z.im))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_rejected() {
        assert!(matches!(ExperimentConfig::from_json("{}"), Err(Error::ConfigInvalid(_))));
        assert!(matches!(ExperimentConfig::from_json(""), Err(Error::ConfigInvalid(_))));
        assert!(matches!(
            ExperimentConfig::from_json(r#"{"experiment": "fourier", "tol": 1e-2}"#),
            Err(Error::ConfigInvalid(_))
        ));
    }

    #[test]
    fn drift_detected() {
        let mut pins = PinnedConstants::default();
        let m = Measured { key: "x/[0,1]/1/1".into(), name: "C_pin".into(), value: 2.0 };
        pin_constants(&mut pins, &[m.clone()], &[m.clone()]).unwrap();
        assert_eq!(pins.verify(&m).unwrap(), Some(2.0));
        let moved = Measured { value: 2.6, ..m.clone() };
        let err = pins.verify(&moved).unwrap_err();
        assert!(matches!(&err, Error::ExperimentFailed(s) if s.contains("C_pin")));
    }

    #[test]
    fn unstable_calibration() {
        let mut pins = PinnedConstants::default();
        let a = Measured { key: "k".into(), name: "C_cal".into(), value: 1.0 };
        let b = Measured { value: 1.2, ..a.clone() };
        assert!(matches!(pin_constants(&mut pins, &[a], &[b]), Err(Error::CalibrationUnstable(_))));
        assert!(pins.entries.is_empty());
    }

    #[test]
    fn float_format_roundtrips() {
        for v in [0.1, 1e-300, 12345.678, -0.0] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }
}
