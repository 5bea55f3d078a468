use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tracephase::harness::{pin_key, PinnedConstants};
use tracephase::multiindex::{binomial, MultiIndex};
use tracephase::numberfield::NumberField;
use tracephase::phases::TracePolynomial;
use tracephase::sublevel::{
    calibrate_derivative_zero, directional_basis, expansion_row, nearest_derivative_zero, sublevel_measure,
    SublevelCondition,
};
use tracephase::Error;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn pinned_c_cal() -> f64 {
    PinnedConstants::bundled().get("derivative-zero/any/6/1", "C_cal").expect("C_cal pinned")
}

#[test]
fn basis_ranks() {
    for n in 1..=3usize {
        for r in 1..=5u32 {
            let b = directional_basis(n, r, 42).unwrap();
            let size = binomial(n as u32 + r - 1, r) as usize;
            assert_eq!(b.vectors.len(), size, "n = {n}, r = {r}");
            let m = DMatrix::from_fn(size, size, |i, j| expansion_row(&b.vectors[i], r)[j]);
            assert_eq!(m.rank(1e-10), size);
            assert!(b.condition <= 1e6);
            for v in &b.vectors {
                assert!((v.iter().map(|a| a * a).sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }
    assert_eq!(directional_basis(1, 4, 0).unwrap().vectors, vec![vec![1.0]]);
}

#[test]
fn derivative_zero_examples() {
    let eps = 0.01;
    let r = nearest_derivative_zero(&[c(-eps), c(0.0), c(1.0)], c(0.0), 2, 2.0, eps).unwrap();
    // Q' vanishes at z0 itself; the zeros of Q sit at ±√ε
    assert_eq!(r.distance, 0.0);
    assert_eq!(r.order, 1);
    assert!((r.per_order[0].unwrap() - 0.1).abs() < 1e-12);
    assert!((r.bound - (eps / 2.0).sqrt()).abs() < 1e-12);
    assert!(r.per_order[0].unwrap() <= 2f64.sqrt() * r.bound + 1e-12);
    assert!(r.holds(pinned_c_cal()));

    let r = nearest_derivative_zero(&[c(0.0), c(1.0)], c(0.0), 1, 1.0, 1e-3).unwrap();
    assert_eq!(r.distance, 0.0);

    let r = nearest_derivative_zero(&[c(0.0), c(0.0), c(0.0), c(1.0)], c(0.1), 3, 6.0, 0.001).unwrap();
    assert!((r.distance - 0.1).abs() < 1e-6);
    assert!((r.bound - (0.001f64 / 6.0).cbrt()).abs() < 1e-12);
    assert!(r.holds(pinned_c_cal()));
    assert!(!r.holds(1.0));

    assert!(matches!(nearest_derivative_zero(&[c(0.0), c(0.0)], c(0.0), 1, 1.0, 0.1), Err(Error::DegenerateQ)));
    assert!(matches!(nearest_derivative_zero(&[c(0.0), c(1.0)], c(2.0), 1, 1.0, 0.1), Err(Error::Precondition(_))));
}

#[test]
fn clustered_roots_attain_the_degree() {
    // Q = (z - a)^d with |z0 - a| = t: ε = t^d, μ = d t^{d-1}, every
    // derivative vanishes only at a, so distance / bound = d
    for d in 2..=6usize {
        let a = c(0.2);
        let t: f64 = 0.3;
        let mut q = vec![c(1.0)];
        for _ in 0..d {
            let mut next = vec![c(0.0); q.len() + 1];
            for (i, v) in q.iter().enumerate() {
                next[i + 1] += v;
                next[i] -= v * a;
            }
            q = next;
        }
        let eps = t.powi(d as i32);
        let mu = d as f64 * t.powi(d as i32 - 1);
        let r = nearest_derivative_zero(&q, c(0.5), 1, mu * (1.0 - 1e-9), eps * (1.0 + 1e-9)).unwrap();
        // a (d-1)-fold root is only located to about ε_mach^{1/(d-1)}
        let tol = 4.0 * 1e-12f64.powf(1.0 / (d - 1) as f64);
        assert!((r.distance - t).abs() < tol, "d = {d}: {}", r.distance);
        assert!((r.bound * d as f64 - t).abs() < 1e-8);
        assert!((r.ratio - d as f64).abs() < d as f64 * (tol / t + 1e-8), "d = {d}: {}", r.ratio);
    }
}

#[test]
fn pinned_constant_on_fresh_polynomials() {
    // polynomials drawn here, independently of the calibration stream
    let c_cal = pinned_c_cal();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checked = 0;
    while checked < 500 {
        let d = rng.gen_range(1..=6usize);
        let mut q: Vec<Complex64> = (0..=d).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let z0 = Complex64::from_polar(rng.gen::<f64>().sqrt(), rng.gen_range(0.0..2.0 * PI));
        // shift the constant term so that |Q(z0)| is small
        let val = q.iter().rev().fold(c(0.0), |acc, a| acc * z0 + a);
        let target = 0.01 * rng.gen::<f64>();
        q[0] += Complex64::from_polar(target, rng.gen_range(0.0..2.0 * PI)) - val;
        let eps = 0.01;
        for k in 1..=d {
            let mut der = q.clone();
            for _ in 0..k {
                der = der.iter().enumerate().skip(1).map(|(j, a)| a * j as f64).collect();
            }
            let mu = der.iter().rev().fold(c(0.0), |acc, a| acc * z0 + a).norm();
            if mu <= 0.0 {
                continue;
            }
            let r = nearest_derivative_zero(&q, z0, k, mu, eps).unwrap();
            assert!(r.holds(c_cal), "ratio {} exceeds {c_cal}", r.ratio);
        }
        checked += 1;
    }
}

#[test]
fn recalibration_is_reproducible() {
    let a = calibrate_derivative_zero(200, 0.01, 42).unwrap();
    let b = calibrate_derivative_zero(200, 0.01, 42).unwrap();
    assert_eq!(a, b);
    assert!(a <= pinned_c_cal() * 1.25);
}

fn x3() -> TracePolynomial {
    TracePolynomial::monomial(1, 1, 3, vec![1.0])
}

fn cond(sigma: usize, eps: f64) -> SublevelCondition {
    SublevelCondition { sigma, alpha: MultiIndex::univariate(3), eps, mu: 6.0 }
}

#[test]
fn cubic_sublevel_matches_the_interval() {
    // {x ∈ [0,1] : 3x² ≤ ε} = [0, √(ε/3)]
    let q = NumberField::rationals();
    for eps in [0.1, 0.01, 0.001] {
        let r = sublevel_measure(&q, &x3(), &[cond(0, eps)], 200_000, 1).unwrap();
        let exact = (eps / 3.0).sqrt();
        assert!(r.ci_low <= exact && exact <= r.ci_high, "ε = {eps}: [{}, {}] vs {exact}", r.ci_low, r.ci_high);
        assert!((r.bound - (eps / 6.0).sqrt()).abs() < 1e-15);
    }
}

#[test]
fn gaussian_cubic_matches_the_quarter_disc() {
    // {z ∈ [0,1]² : 3|z|² ≤ ε} is a quarter disc of area πε/12
    let g = NumberField::gaussian();
    let f = TracePolynomial::monomial(2, 1, 3, vec![1.0, 0.0]);
    for eps in [0.1, 0.01] {
        let r = sublevel_measure(&g, &f, &[cond(0, eps), cond(1, eps)], 400_000, 2).unwrap();
        let exact = PI * eps / 12.0;
        assert!(r.ci_low <= exact && exact <= r.ci_high, "ε = {eps}: [{}, {}] vs {exact}", r.ci_low, r.ci_high);
    }
}

#[test]
fn unreachable_sublevel_set_is_empty() {
    // f = x³ + x has derivative at least 1 on [0, 1]
    let q = NumberField::rationals();
    let f = TracePolynomial::univariate(1, &[(1, vec![1.0]), (3, vec![1.0])]);
    let r = sublevel_measure(&q, &f, &[cond(0, 0.5)], 20_000, 3).unwrap();
    assert_eq!(r.hits, 0);
    assert_eq!(r.estimate, 0.0);
}

#[test]
fn sublevel_preconditions() {
    let q = NumberField::rationals();
    let lin = SublevelCondition { sigma: 0, alpha: MultiIndex::univariate(1), eps: 0.1, mu: 1.0 };
    assert!(matches!(sublevel_measure(&q, &x3(), &[lin], 20_000, 0), Err(Error::Precondition(_))));
    assert!(matches!(sublevel_measure(&q, &x3(), &[cond(0, 7.0)], 20_000, 0), Err(Error::Precondition(_))));
    assert!(matches!(sublevel_measure(&q, &x3(), &[], 20_000, 0), Err(Error::EmptySet)));
}

#[test]
fn monte_carlo_is_deterministic() {
    let g = NumberField::gaussian();
    let f = TracePolynomial::monomial(2, 1, 3, vec![1.0, 0.5]);
    let conds = [cond(0, 0.05), cond(1, 0.05)];
    let run = |t: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .unwrap()
            .install(|| sublevel_measure(&g, &f, &conds, 300_000, 77).unwrap())
    };
    let (a, b) = (run(1), run(3));
    assert_eq!(a.hits, b.hits);
    assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
    assert_ne!(sublevel_measure(&g, &f, &conds, 300_000, 78).unwrap().hits, a.hits);
}

#[test]
fn pinned_sublevel_constants_cover_fresh_runs() {
    let pins = PinnedConstants::bundled();
    let q = NumberField::rationals();
    let pinned = pins.get(&pin_key("sublevel", &q, 3, 1), "C_pin").unwrap();
    let worst = [0.1, 0.01, 0.001]
        .iter()
        .map(|&e| sublevel_measure(&q, &x3(), &[cond(0, e)], 100_000, 5).unwrap().ratio)
        .fold(0.0, f64::max);
    assert!(worst <= pinned * 1.25, "{worst} vs {pinned}");
}
