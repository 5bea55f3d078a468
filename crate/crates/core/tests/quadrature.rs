use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tracephase::cutoff::{smooth_step, Cutoff, EmbeddingProductCutoff};
use tracephase::multiindex::MultiIndex;
use tracephase::numberfield::NumberField;
use tracephase::phases::{real_phase, TracePolynomial};
use tracephase::poly::CompiledPoly;
use tracephase::quadrature::{
    extension_operator, factorized_integral, integrate, kb_fourier, oscillatory_integral, QuadratureConfig,
};
use tracephase::Error;

fn random_poly<R: Rng>(k: usize, deg: u32, scale: f64, rng: &mut R) -> TracePolynomial {
    let terms: Vec<(u32, Vec<f64>)> = (1..=deg).map(|d| (d, (0..k).map(|_| scale * rng.gen_range(-1.0..1.0)).collect())).collect();
    TracePolynomial::univariate(k, &terms)
}

fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn profile(r: f64, rho1: f64, rho2: f64) -> f64 {
    smooth_step((rho2 - r) / (rho2 - rho1))
}

/// `J0(x) = (1/π) ∫_0^π cos(x sin t) dt` by the trapezoid rule, which is
/// spectrally accurate for this periodic integrand.
fn bessel_j0(x: f64) -> f64 {
    let m = 256;
    let s: f64 = (0..m).map(|i| (x * (PI * i as f64 / m as f64).sin()).cos()).sum();
    s / m as f64
}

/// Fourier transform of a radial cutoff on `ℝ²` at frequency radius `rho`.
fn hankel(rho: f64, rho1: f64, rho2: f64) -> f64 {
    2.0 * PI * simpson(|r| profile(r, rho1, rho2) * bessel_j0(2.0 * PI * rho * r) * r, 0.0, rho2, 4000)
}

/// Fourier transform of a symmetric cutoff on `ℝ`.
fn cosine_transform(xi: f64, rho1: f64, rho2: f64) -> f64 {
    2.0 * simpson(|r| profile(r, rho1, rho2) * (2.0 * PI * xi * r).cos(), 0.0, rho2, 20000)
}

#[test]
fn zero_phase_gives_the_mass() {
    let (r1, r2) = (0.5, 1.0);
    let mass1 = 2.0 * simpson(|r| profile(r, r1, r2), 0.0, r2, 20000);
    let mass2 = 2.0 * PI * simpson(|r| profile(r, r1, r2) * r, 0.0, r2, 20000);
    let q = NumberField::rationals();
    let i = oscillatory_integral(&q, &TracePolynomial::new(1, 1), &Cutoff::centered(1, r1, r2).unwrap(), 1e-9).unwrap();
    assert!((i.value.re - mass1).abs() < 1e-9 && i.value.im == 0.0);
    let k = NumberField::sqrt2();
    let i = oscillatory_integral(&k, &TracePolynomial::new(2, 1), &Cutoff::centered(2, r1, r2).unwrap(), 1e-9).unwrap();
    assert!((i.value.re - mass2).abs() < 1e-9 && i.value.im == 0.0);
}

#[test]
fn fresnel_asymptotics_over_q() {
    // ∫ e(λx²) ψ = e^{iπ/4} (2λ)^{-1/2} up to terms decaying faster than any power
    let q = NumberField::rationals();
    let psi = Cutoff::centered(1, 0.5, 1.0).unwrap();
    for (lam, rel) in [(16.0, 1e-4), (64.0, 1e-8), (256.0, 1e-10), (1024.0, 1e-10)] {
        let f = TracePolynomial::monomial(1, 1, 2, vec![lam]);
        let i = oscillatory_integral(&q, &f, &psi, 1e-9).unwrap();
        let want = Complex64::from_polar((2.0 * lam).powf(-0.5), PI / 4.0);
        assert!((i.value - want).norm() < rel * want.norm(), "λ = {lam}: {} vs {want}", i.value);
        assert!(i.converged);
    }
}

#[test]
fn sqrt2_square_stationary_phase() {
    // φ = 2λx1² + 4λx2²: the leading term is e^{iπ/2} / (λ √32)
    let k = NumberField::sqrt2();
    let psi = Cutoff::centered(2, 0.5, 1.0).unwrap();
    for lam in [64.0, 256.0] {
        let f = TracePolynomial::monomial(2, 1, 2, vec![lam, 0.0]);
        let i = oscillatory_integral(&k, &f, &psi, 1e-8).unwrap();
        let want = Complex64::new(0.0, 1.0 / (lam * 32f64.sqrt()));
        assert!((i.value - want).norm() < 1e-5 * want.norm(), "λ = {lam}: {} vs {want}", i.value);
    }
}

#[test]
fn bad_inputs() {
    let q = NumberField::rationals();
    let psi = Cutoff::centered(1, 0.5, 1.0).unwrap();
    let f = TracePolynomial::monomial(1, 1, 2, vec![1.0]);
    assert!(matches!(oscillatory_integral(&q, &f, &psi, 1e-2), Err(Error::ConfigInvalid(_))));
    let f5 = TracePolynomial::monomial(1, 5, 2, vec![1.0]);
    let psi5 = Cutoff::centered(5, 0.5, 1.0).unwrap();
    assert!(matches!(oscillatory_integral(&q, &f5, &psi5, 1e-6), Err(Error::DimensionTooLarge(5, 4))));
}

#[test]
fn depth_cap_is_reported() {
    let q = NumberField::rationals();
    let psi = Cutoff::centered(1, 0.5, 1.0).unwrap();
    let f = TracePolynomial::monomial(1, 1, 1, vec![1e6]);
    let phase = CompiledPoly::new(&real_phase(&q, &f).unwrap());
    let cfg = QuadratureConfig { max_depth: 6, ..QuadratureConfig::with_tol(1e-8) };
    let r = integrate(&phase, &psi, cfg).unwrap();
    assert!(!r.converged);
    assert!(r.depth_capped > 0);
}

#[test]
fn fourier_examples() {
    let (r1, r2) = (0.5, 1.0);
    for k in [NumberField::rationals(), NumberField::sqrt2(), NumberField::gaussian()] {
        let d = k.degree();
        let psi = Cutoff::centered(d, r1, r2).unwrap();
        let p = kb_fourier(&k, &psi, &vec![0.0; d], 1e-9).unwrap();
        let mass = oscillatory_integral(&k, &TracePolynomial::new(d, 1), &psi, 1e-9).unwrap().value;
        assert!((p.trace_side - mass).norm() < 1e-9);
    }
    let q = NumberField::rationals();
    let psi = Cutoff::centered(1, r1, r2).unwrap();
    for x in [0.3, -1.7, 2.5] {
        let p = kb_fourier(&q, &psi, &[x], 1e-9).unwrap();
        let want = cosine_transform(x, r1, r2);
        assert!((p.trace_side.re - want).abs() < 1e-8 && p.trace_side.im.abs() < 1e-8);
    }
}

#[test]
fn fourier_against_hankel_transform() {
    let (r1, r2) = (0.5, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for k in [NumberField::sqrt2(), NumberField::gaussian()] {
        let psi = Cutoff::centered(2, r1, r2).unwrap();
        let t = k.trace_form_f64();
        for _ in 0..12 {
            let x = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
            let tx = &t * nalgebra::DVector::from_column_slice(&x);
            let want = hankel(tx.norm(), r1, r2);
            let p = kb_fourier(&k, &psi, &x, 1e-9).unwrap();
            for v in [p.trace_side, p.plain_side] {
                assert!((v - want).norm() <= 1e-6 * (1.0 + want.abs()), "{x:?}: {v} vs {want}");
            }
        }
    }
}

#[test]
fn extension_operator_dual_route() {
    let k = NumberField::sqrt2();
    let psi = Cutoff::centered(2, 2.0, 3.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..50 {
        let mut xi: Vec<Vec<f64>> = (0..2).map(|_| (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let norm = xi.iter().flatten().map(|a| a * a).sum::<f64>().sqrt();
        let target = rng.gen_range(8.0..12.0);
        xi.iter_mut().flatten().for_each(|a| *a *= target / norm);
        let e = extension_operator(&k, &psi, &xi, 1e-8).unwrap();
        let scale = e.direct.norm().max(e.reduced.norm()).max(1e-3);
        assert!((e.direct - e.reduced).norm() <= 1e-6 * scale, "{xi:?}: {} vs {}", e.direct, e.reduced);
    }
}

#[test]
fn extension_operator_over_q() {
    let q = NumberField::rationals();
    let psi = Cutoff::centered(1, 2.0, 3.0).unwrap();
    let zero = extension_operator(&q, &psi, &[vec![0.0], vec![0.0]], 1e-9).unwrap();
    let mass = oscillatory_integral(&q, &TracePolynomial::new(1, 1), &psi, 1e-9).unwrap().value;
    assert!((zero.direct - mass).norm() < 1e-9);
    for lam in [50.0, 200.0] {
        let e = extension_operator(&q, &psi, &[vec![0.0], vec![lam]], 1e-9).unwrap();
        let want = (2.0 * lam).powf(-0.5);
        assert!((e.direct.norm() - want).abs() < 1e-6 * want);
        assert!((e.direct - e.reduced).norm() < 1e-9);
    }
}

#[test]
fn factorized_matches_full_quadrature() {
    let k = NumberField::sqrt2();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..6 {
        let f = random_poly(2, 3, 3.0, &mut rng);
        let shift = vec![rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3)];
        let psi = EmbeddingProductCutoff::new(&k, 0.5, 1.0, shift).unwrap();
        let fact = factorized_integral(&k, &f, &psi, 1e-9).unwrap();
        let full = integrate(&CompiledPoly::new(&real_phase(&k, &f).unwrap()), &psi, QuadratureConfig::with_tol(1e-9)).unwrap();
        assert!((fact.value - full.value).norm() < 1e-7 * (1.0 + full.value.norm()), "{} vs {}", fact.value, full.value);
    }
    assert!(matches!(
        EmbeddingProductCutoff::new(&NumberField::gaussian(), 0.5, 1.0, vec![0.0, 0.0]),
        Err(Error::NotTotallyReal)
    ));
}

fn pool(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap()
}

#[test]
fn bit_identical_across_thread_counts() {
    let k = NumberField::gaussian();
    let f = TracePolynomial::monomial(2, 1, 3, vec![20.0, -7.0]);
    let psi = Cutoff::centered(2, 0.5, 1.0).unwrap();
    let run = |t: usize| pool(t).install(|| oscillatory_integral(&k, &f, &psi, 1e-7).unwrap());
    let a = run(1);
    let b = run(3);
    assert_eq!(a.value.re.to_bits(), b.value.re.to_bits());
    assert_eq!(a.value.im.to_bits(), b.value.im.to_bits());
    assert_eq!(a.panels, b.panels);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn negated_phase_conjugates((fi, seed) in (0usize..3, any::<u64>())) {
        let k = [NumberField::rationals, NumberField::sqrt2, NumberField::gaussian][fi]();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_poly(k.degree(), 3, 4.0, &mut rng);
        let psi = Cutoff::centered(k.degree(), 0.5, 1.0).unwrap();
        let a = oscillatory_integral(&k, &f, &psi, 1e-9).unwrap();
        let b = oscillatory_integral(&k, &f.scaled(-1.0), &psi, 1e-9).unwrap();
        prop_assert!((a.value - b.value.conj()).norm() <= 1e-9 * (1.0 + a.value.norm()));
        prop_assert!(a.error_estimate >= 0.0);
        if a.converged {
            prop_assert!(a.error_estimate <= 1e-9 * (1.0 + a.value.norm()));
        }
    }

    #[test]
    fn bivariate_phases_integrate_consistently(seed in any::<u64>()) {
        // a phase depending on one coordinate only factors against a product weight
        let q = NumberField::rationals();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = rng.gen_range(-10.0..10.0);
        let mut f = TracePolynomial::new(1, 2);
        f.set(MultiIndex::new(vec![2, 0]), vec![a]);
        let psi = Cutoff::centered(2, 0.5, 1.0).unwrap();
        let two = oscillatory_integral(&q, &f, &psi, 1e-9).unwrap().value;
        // radial weight: integrate out the second variable along each line
        let line = |x: f64| 2.0 * simpson(|y| profile((x * x + y * y).sqrt(), 0.5, 1.0), 0.0, (1.0 - x * x).max(0.0).sqrt(), 400);
        let re = simpson(|x| line(x) * (2.0 * PI * a * x * x).cos(), -1.0, 1.0, 4000);
        let im = simpson(|x| line(x) * (2.0 * PI * a * x * x).sin(), -1.0, 1.0, 4000);
        prop_assert!((two - Complex64::new(re, im)).norm() < 1e-6);
    }
}
