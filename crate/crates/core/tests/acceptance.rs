//! End-to-end acceptance run: one PASS/FAIL line per criterion, nonzero
//! exit status if any criterion fails.

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use tracephase::harness::{run, ExperimentConfig, Outcome, PinnedConstants};
use tracephase::multiindex::MultiIndex;
use tracephase::numberfield::NumberField;
use tracephase::phases::{eval_phase, eval_phase_embedded, TracePolynomial};

type Check = std::result::Result<String, String>;

fn fixture(name: &str) -> ExperimentConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/configs").join(name);
    ExperimentConfig::load(&path).expect("fixture config")
}

fn pool(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap()
}

/// Runs configs under the bundled pins in a 3-thread pool and keeps their
/// CSV for the determinism rerun.
struct Runs {
    pins: PinnedConstants,
    csv: Vec<(String, ExperimentConfig, String)>,
}

impl Runs {
    fn run(&mut self, label: &str, cfg: ExperimentConfig) -> Result<Outcome, String> {
        let out = pool(3).install(|| run(&cfg, Some(&self.pins))).map_err(|e| format!("{label}: {e}"))?;
        self.csv.push((label.into(), cfg, out.table.to_csv().map_err(|e| e.to_string())?));
        Ok(out)
    }
}

fn rat(rng: &mut ChaCha8Rng) -> BigRational {
    BigRational::new(BigInt::from(rng.gen_range(-50i64..=50)), BigInt::from(rng.gen_range(1i64..=12)))
}

fn int(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

fn criterion_1() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (field, d) in [(NumberField::sqrt2(), 2i64), (NumberField::gaussian(), -1)] {
        for _ in 0..50 {
            let (q1, q2) = (rat(&mut rng), rat(&mut rng));
            let m = field.mult_matrix(&[q1.clone(), q2.clone()]);
            // q·1 = q1 + q2 t and q·t = d q2 + q1 t
            let want = vec![vec![q1.clone(), q2.clone() * int(d)], vec![q2.clone(), q1.clone()]];
            if m != want {
                return Err(format!("mult_matrix for t² = {d} at ({q1}, {q2}): {m:?}"));
            }
        }
        let want = vec![vec![int(2), int(0)], vec![int(0), int(2 * d)]];
        if field.trace_form() != want {
            return Err(format!("trace form for t² = {d}: {:?}", field.trace_form()));
        }
    }
    Ok("ℚ(√2), ℚ(i): 100 exact matrices, trace forms [[2,0],[0,4]] and [[2,0],[0,-2]]".into())
}

fn random_poly(k: usize, n: usize, rng: &mut ChaCha8Rng) -> TracePolynomial {
    let mut f = TracePolynomial::new(k, n);
    for d in 0..=4 {
        for m in MultiIndex::of_degree(n, d) {
            if rng.gen_bool(0.6) {
                f.set(m, (0..k).map(|_| rng.gen_range(-2.0..2.0)).collect());
            }
        }
    }
    f
}

fn criterion_2() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for field in [NumberField::sqrt2(), NumberField::gaussian(), NumberField::cube_root2()] {
        let k = field.degree();
        for _ in 0..100 {
            let n = rng.gen_range(1..=2);
            let f = random_poly(k, n, &mut rng);
            let x: Vec<f64> = (0..k * n).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let a = eval_phase(&field, &f, &x);
            let b = eval_phase_embedded(&field, &f, &x).map_err(|e| e.to_string())?;
            let rel = (a - b).abs() / (1.0 + a.abs());
            worst = worst.max(rel);
            if rel > 1e-9 {
                return Err(format!("trace vs embedding sum differ by {rel:e}"));
            }
        }
    }
    let g = NumberField::gaussian();
    for _ in 0..100 {
        let n = rng.gen_range(1..=2);
        let f = random_poly(2, n, &mut rng);
        let x: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let z: Vec<Complex64> = x.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect();
        let mut direct = Complex64::new(0.0, 0.0);
        for (m, a) in f.coeffs() {
            let mut t = Complex64::new(a[0], a[1]);
            for (zl, &e) in z.iter().zip(&m.0) {
                t *= zl.powu(e);
            }
            direct += t;
        }
        let phi = eval_phase(&g, &f, &x);
        let rel = (phi - 2.0 * direct.re).abs() / (1.0 + phi.abs());
        worst = worst.max(rel);
        if rel > 1e-9 {
            return Err(format!("ℚ(i) phase vs 2 Re f differ by {rel:e}"));
        }
    }
    Ok(format!("400 polynomial/point pairs, worst relative difference {worst:.1e}"))
}

fn criterion_3(runs: &mut Runs) -> Check {
    let mut parts = Vec::new();
    for (name, expected) in [("rationals", -0.5), ("sqrt2", -1.0), ("gaussian", -1.0), ("sqrt2-degenerate", -0.5)] {
        let cfg = ExperimentConfig::new("verify-main", "Q").with("family", json!(name));
        let out = runs.run(name, cfg)?;
        let slope = out.summary["slope_i"].as_f64().unwrap_or(f64::NAN);
        let spread = out.summary["max_over_median"].as_f64().unwrap_or(f64::NAN);
        if (slope - expected).abs() > 0.10 || !(spread <= 3.0) {
            return Err(format!("{name}: slope {slope} (expected {expected}), max/median {spread}"));
        }
        parts.push(format!("{name} {slope:.3}/{spread:.2}"));
    }
    Ok(format!("slope/max-over-median: {}", parts.join(", ")))
}

fn criterion_4(runs: &mut Runs) -> Check {
    let mut parts = Vec::new();
    for field in ["Q", "Q(sqrt2)", "Q(i)", "Q(cbrt2)"] {
        let cfg = ExperimentConfig::new("comparability", field).with("trials", json!(100));
        let out = runs.run(&format!("comparability {field}"), cfg)?;
        parts.push(format!("{field} {} rows", out.table.rows.len()));
    }
    Ok(format!("both directions hold at every point: {}", parts.join(", ")))
}

fn criterion_5(runs: &mut Runs) -> Check {
    let mut parts = Vec::new();
    for name in ["sublevel_q.json", "sublevel_gaussian.json"] {
        let cfg = fixture(name);
        if cfg.params["samples"] != json!(1_000_000) {
            return Err(format!("{name} does not use 10^6 samples"));
        }
        let out = runs.run(name, cfg)?;
        parts.push(format!(
            "{name} slope {:.3} (expected {})",
            out.summary["slope"].as_f64().unwrap_or(f64::NAN),
            out.summary["expected_slope"]
        ));
    }
    Ok(parts.join(", "))
}

fn criterion_6(runs: &mut Runs) -> Check {
    let mut parts = Vec::new();
    for name in ["j_stability_sqrt2.json", "j_stability_gaussian.json"] {
        let out = runs.run(name, fixture(name))?;
        let m = &out.measured[0];
        parts.push(format!("{} {:.3}", m.name, m.value));
    }
    for name in ["cover_q.json", "cover_gaussian.json"] {
        let out = runs.run(name, fixture(name))?;
        let m = &out.measured[0];
        let pinned = runs.pins.get(&m.key, &m.name).ok_or_else(|| format!("{} not pinned", m.key))?;
        if m.value > pinned {
            return Err(format!("{name}: overlap {} above pinned {pinned}", m.value));
        }
        parts.push(format!("{} {} ≤ {pinned}", m.name, m.value));
    }
    Ok(parts.join(", "))
}

fn criterion_7(runs: &mut Runs) -> Check {
    let mut parts = Vec::new();
    for field in ["Q", "Q(sqrt2)", "Q(i)"] {
        let cfg = ExperimentConfig::new("fourier", field).with("points", json!(50));
        let out = runs.run(&format!("fourier {field}"), cfg)?;
        parts.push(format!("{field} {:.1e}", out.summary["max_rel_diff"].as_f64().unwrap_or(f64::NAN)));
    }
    Ok(format!("max relative difference: {}", parts.join(", ")))
}

fn criterion_8(runs: &mut Runs) -> Check {
    let mut parts = Vec::new();
    for name in ["lq_q.json", "lq_sqrt2.json"] {
        let out = runs.run(name, fixture(name))?;
        parts.push(format!("{name} {}", out.summary));
    }
    for name in ["sharpness_q.json", "sharpness_sqrt2.json"] {
        let cfg = fixture(name);
        let qs: Vec<u32> = (cfg.params["m_min"].as_u64().unwrap()..=cfg.params["m_max"].as_u64().unwrap())
            .map(|m| 2u32.pow(m as u32))
            .collect();
        if qs != [4, 8, 16] || cfg.params["A"] != json!(2.0) {
            return Err(format!("{name} does not sweep Q_m ∈ {{4, 8, 16}}"));
        }
        let out = runs.run(name, cfg)?;
        parts.push(format!(
            "{name} spread {:.3} slope {:.3}",
            out.summary["spread"].as_f64().unwrap_or(f64::NAN),
            out.summary["slope"].as_f64().unwrap_or(f64::NAN)
        ));
    }
    Ok(parts.join(", "))
}

fn criterion_9(runs: &Runs) -> Check {
    let single = pool(1);
    for (label, cfg, csv) in &runs.csv {
        let again = single
            .install(|| tracephase::harness::execute(cfg))
            .and_then(|o| o.table.to_csv())
            .map_err(|e| format!("{label}: {e}"))?;
        if &again != csv {
            return Err(format!("{label}: CSV differs between 3 threads and 1 thread"));
        }
    }
    Ok(format!("{} experiment runs byte-identical under 3 and 1 threads", runs.csv.len()))
}

fn main() -> ExitCode {
    let mut runs = Runs { pins: PinnedConstants::bundled(), csv: Vec::new() };
    let mut failed = 0;
    let mut report = |n: u32, what: &str, t: Instant, r: Check| {
        let secs = t.elapsed().as_secs_f64();
        match r {
            Ok(detail) => println!("PASS criterion {n} {what}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {n} {what}: {detail} [{secs:.1}s]");
            }
        }
    };
    let t = Instant::now();
    report(1, "structure exactness", t, criterion_1());
    let t = Instant::now();
    report(2, "trace phase identity", t, criterion_2());
    let t = Instant::now();
    report(3, "main-bound decay", t, criterion_3(&mut runs));
    let t = Instant::now();
    report(4, "gradient comparability", t, criterion_4(&mut runs));
    let t = Instant::now();
    report(5, "sublevel scaling", t, criterion_5(&mut runs));
    let t = Instant::now();
    report(6, "J-stability and overlap", t, criterion_6(&mut runs));
    let t = Instant::now();
    report(7, "trace Fourier identity", t, criterion_7(&mut runs));
    let t = Instant::now();
    report(8, "Tarry threshold", t, criterion_8(&mut runs));
    let t = Instant::now();
    report(9, "determinism", t, criterion_9(&runs));
    if failed == 0 {
        println!("acceptance: all 9 criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    }
}
