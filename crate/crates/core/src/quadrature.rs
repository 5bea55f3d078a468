//! Adaptive tensor-product Gauss–Legendre quadrature for
//! `I = ∫ e(φ(x)) ψ(x) dx` with `e(t) = exp(2πi t)`.
//!
//! A panel is bisected along its longest axis when the phase changes by more
//! than `π/2` across it (estimated as `|∇φ(center)|·diameter`) or when the 7-
//! and 15-point tensor rules disagree by more than its share of the
//! tolerance. Panels are processed generation by generation and accepted
//! contributions are summed in creation order, so results do not depend on
//! the number of threads.
//!
//! ```
//! use tracephase::cutoff::Cutoff;
//! use tracephase::numberfield::NumberField;
//! use tracephase::phases::TracePolynomial;
//! use tracephase::quadrature::oscillatory_integral;
//!
//! let q = NumberField::rationals();
//! let psi = Cutoff::centered(1, 0.5, 1.0).unwrap();
//! // φ = 0: the integral is the mass of ψ
//! let f = TracePolynomial::new(1, 1);
//! let r = oscillatory_integral(&q, &f, &psi, 1e-9).unwrap();
//! assert!(r.converged);
//! assert!((r.value.re - 1.5).abs() < 1e-3);
//! ```

use std::f64::consts::{PI, TAU};
use std::sync::OnceLock;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::cutoff::{Amplitude, Cutoff, EmbeddingProductCutoff};
use crate::error::{Error, Result};
use crate::functionals::{combined_h, GridSpec};
use crate::numberfield::NumberField;
use crate::phases::{embed_polynomial, moment_curve_f64, real_phase, TracePolynomial};
use crate::poly::{CompiledPoly, MPoly};
use crate::stats::loglog_slope;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pnm1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

struct Rules {
    low: (Vec<f64>, Vec<f64>),
    high: (Vec<f64>, Vec<f64>),
}

fn rules() -> &'static Rules {
    static R: OnceLock<Rules> = OnceLock::new();
    R.get_or_init(|| Rules { low: gauss_legendre(7), high: gauss_legendre(15) })
}

/// Settings for [`integrate`].
#[derive(Clone, Copy, Debug, Serialize)]
pub struct QuadratureConfig {
    pub tol: f64,
    /// Maximal number of halvings along any single axis.
    pub max_depth: u32,
    pub max_panels: usize,
    /// Largest admissible change of `φ` across a panel.
    pub phase_limit: f64,
}

impl QuadratureConfig {
    pub fn with_tol(tol: f64) -> Self {
        QuadratureConfig { tol, max_depth: 14, max_panels: 2_000_000, phase_limit: PI / 2.0 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct QuadratureResult {
    pub value: Complex64,
    /// Sum over accepted panels of `|I_7 - I_15|`.
    pub error_estimate: f64,
    pub panels: usize,
    pub max_depth: u32,
    /// Panels at the depth cap that still fail the error test.
    pub depth_capped: usize,
    pub budget_exhausted: bool,
    pub converged: bool,
}

#[derive(Clone)]
struct Panel {
    lo: Vec<f64>,
    hi: Vec<f64>,
    depth: Vec<u32>,
}

fn tensor_rule<A: Amplitude + ?Sized>(
    phase: &CompiledPoly,
    amp: &A,
    p: &Panel,
    rule: &(Vec<f64>, Vec<f64>),
    x: &mut [f64],
) -> Complex64 {
    let d = p.lo.len();
    let m = rule.0.len();
    let half: Vec<f64> = p.lo.iter().zip(&p.hi).map(|(a, b)| 0.5 * (b - a)).collect();
    let mid: Vec<f64> = p.lo.iter().zip(&p.hi).map(|(a, b)| 0.5 * (a + b)).collect();
    let jac: f64 = half.iter().product();
    let total = m.pow(d as u32);
    let (mut re, mut im) = (0.0, 0.0);
    for idx in 0..total {
        let mut r = idx;
        let mut w = 1.0;
        for a in 0..d {
            let i = r % m;
            r /= m;
            x[a] = mid[a] + half[a] * rule.0[i];
            w *= rule.1[i];
        }
        let a = amp.eval(x);
        if a == 0.0 {
            continue;
        }
        let (s, c) = (TAU * phase.eval(x)).sin_cos();
        re += w * a * c;
        im += w * a * s;
    }
    Complex64::new(re, im) * jac
}

/// Longest side, lowest index on ties.
fn longest_axis(p: &Panel) -> usize {
    (0..p.lo.len())
        .max_by(|&a, &b| (p.hi[a] - p.lo[a]).total_cmp(&(p.hi[b] - p.lo[b])).then(b.cmp(&a)))
        .unwrap_or(0)
}

enum Outcome {
    Accept { value: Complex64, err: f64, capped: bool },
    Split,
}

/// `∫ e(φ(x)) ψ(x) dx` over `ℝ^d` for a real polynomial phase and a
/// compactly supported amplitude, `d ≤ 4`.
pub fn integrate<A: Amplitude + ?Sized>(phase: &CompiledPoly, amp: &A, cfg: QuadratureConfig) -> Result<QuadratureResult> {
    let d = amp.dim();
    if d > 4 {
        return Err(Error::DimensionTooLarge(d, 4));
    }
    if phase.nvars() != d {
        return Err(Error::DimensionMismatch { expected: d, got: phase.nvars() });
    }
    let (lo, hi) = amp.bounding_box();
    let volume: f64 = lo.iter().zip(&hi).map(|(a, b)| b - a).product();
    let rules = rules();
    let mut current = vec![Panel { lo, hi, depth: vec![0; d] }];
    let mut accepted: Vec<(Complex64, f64)> = Vec::new();
    let mut created = 1usize;
    let mut res = QuadratureResult {
        value: Complex64::new(0.0, 0.0),
        error_estimate: 0.0,
        panels: 0,
        max_depth: 0,
        depth_capped: 0,
        budget_exhausted: false,
        converged: true,
    };
    while !current.is_empty() {
        let out: Vec<Option<Outcome>> = current
            .par_iter()
            .map_init(
                || vec![0.0; d],
                |x, p| {
                    if amp.misses(&p.lo, &p.hi) {
                        return None;
                    }
                    let vol: f64 = p.lo.iter().zip(&p.hi).map(|(a, b)| b - a).product();
                    let diam = p.lo.iter().zip(&p.hi).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt();
                    let mid: Vec<f64> = p.lo.iter().zip(&p.hi).map(|(a, b)| 0.5 * (a + b)).collect();
                    let capped = p.depth.iter().any(|&l| l >= cfg.max_depth);
                    let oscillating = phase.grad_norm(&mid) * diam > cfg.phase_limit;
                    if oscillating && !capped {
                        return Some(Outcome::Split);
                    }
                    let high = tensor_rule(phase, amp, p, &rules.high, x);
                    let low = tensor_rule(phase, amp, p, &rules.low, x);
                    let err = (high - low).norm();
                    let allowed = cfg.tol * vol / volume;
                    if err <= allowed {
                        return Some(Outcome::Accept { value: high, err, capped: false });
                    }
                    if !capped {
                        return Some(Outcome::Split);
                    }
                    // at the cap the 7-point rule is the weak link: compare
                    // the 15-point value with its two-half composite instead
                    let axis = longest_axis(p);
                    let m = 0.5 * (p.lo[axis] + p.hi[axis]);
                    let (mut left, mut right) = (p.clone(), p.clone());
                    left.hi[axis] = m;
                    right.lo[axis] = m;
                    let halves = tensor_rule(phase, amp, &left, &rules.high, x) + tensor_rule(phase, amp, &right, &rules.high, x);
                    let err2 = (halves - high).norm();
                    Some(Outcome::Accept { value: halves, err: err2, capped: err2 > allowed })
                },
            )
            .collect();
        let mut next = Vec::new();
        for (p, o) in current.iter().zip(out) {
            res.panels += 1;
            res.max_depth = res.max_depth.max(*p.depth.iter().max().unwrap_or(&0));
            match o {
                None => {}
                Some(Outcome::Accept { value, err, capped }) => {
                    accepted.push((value, err));
                    if capped {
                        res.depth_capped += 1;
                    }
                }
                Some(Outcome::Split) => {
                    if created + 2 > cfg.max_panels {
                        res.budget_exhausted = true;
                        let mut x = vec![0.0; d];
                        let v = tensor_rule(phase, amp, p, &rules.high, &mut x);
                        let l = tensor_rule(phase, amp, p, &rules.low, &mut x);
                        accepted.push((v, (v - l).norm()));
                        continue;
                    }
                    let axis = longest_axis(p);
                    let m = 0.5 * (p.lo[axis] + p.hi[axis]);
                    let mut left = p.clone();
                    left.hi[axis] = m;
                    left.depth[axis] += 1;
                    let mut right = p.clone();
                    right.lo[axis] = m;
                    right.depth[axis] += 1;
                    next.push(left);
                    next.push(right);
                    created += 2;
                }
            }
        }
        current = next;
    }
    for (v, e) in &accepted {
        res.value += v;
        res.error_estimate += e;
    }
    res.converged = res.depth_capped == 0
        && !res.budget_exhausted
        && res.error_estimate <= cfg.tol * (1.0 + res.value.norm());
    Ok(res)
}

fn check_tol(tol: f64) -> Result<()> {
    if !(1e-9..=1e-3).contains(&tol) {
        return Err(Error::ConfigInvalid(format!("tolerance {tol:e} outside [1e-9, 1e-3]")));
    }
    Ok(())
}

/// `I = ∫ e(φ_f(x)) ψ(x) dx` over `ℝ^{kn}`, `kn ≤ 4`.
pub fn oscillatory_integral(field: &NumberField, f: &TracePolynomial, psi: &Cutoff, tol: f64) -> Result<QuadratureResult> {
    check_tol(tol)?;
    let d = field.degree() * f.nvars();
    if d > 4 {
        return Err(Error::DimensionTooLarge(d, 4));
    }
    if psi.center.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: psi.center.len() });
    }
    let phase = CompiledPoly::new(&real_phase(field, f)?);
    integrate(&phase, psi, QuadratureConfig::with_tol(tol))
}

/// Depth cap for the one-dimensional factors of [`factorized_integral`].
pub const FACTOR_MAX_DEPTH: u32 = 20;

/// `∫ e(φ_f(x)) Ψ(x) dx` for a univariate `f` over a totally real field and a
/// cutoff that factors over the embeddings. The integral splits as
/// `|det W|^{-1} ∏_σ ∫ e(P_{f,σ}(u)) g(u + σ**(s)) du`.
pub fn factorized_integral(
    field: &NumberField,
    f: &TracePolynomial,
    psi: &EmbeddingProductCutoff,
    tol: f64,
) -> Result<QuadratureResult> {
    if f.nvars() != 1 {
        return Err(Error::NotUnivariate(f.nvars()));
    }
    if !field.is_totally_real() {
        return Err(Error::NotTotallyReal);
    }
    let k = field.degree();
    let shifts = psi.shift_images();
    let det = field.embedding_matrix().map(|z| z.re).determinant().abs();
    let mut value = Complex64::new(1.0 / det, 0.0);
    let mut total = QuadratureResult {
        value,
        error_estimate: 0.0,
        panels: 0,
        max_depth: 0,
        depth_capped: 0,
        budget_exhausted: false,
        converged: true,
    };
    let mut rel_err = 0.0;
    for sigma in 0..k {
        let p = embed_polynomial(field, f, sigma)?;
        let real = p.map(|c| c.re);
        let phase = CompiledPoly::new(&real);
        let amp = Cutoff::new(vec![-shifts[sigma]], psi.rho1, psi.rho2)?;
        // one-dimensional factors can afford a deeper cap within the budget
        let cfg = QuadratureConfig { max_depth: FACTOR_MAX_DEPTH, ..QuadratureConfig::with_tol(tol / k as f64) };
        let r = integrate(&phase, &amp, cfg)?;
        value *= r.value;
        rel_err += r.error_estimate / r.value.norm().max(1e-300);
        total.panels += r.panels;
        total.max_depth = total.max_depth.max(r.max_depth);
        total.depth_capped += r.depth_capped;
        total.budget_exhausted |= r.budget_exhausted;
        total.converged &= r.converged;
    }
    total.value = value;
    total.error_estimate = rel_err * value.norm();
    Ok(total)
}

/// Both sides of `F_{K,B}ψ(x) = ψ̂(Tx)`.
#[derive(Clone, Debug, Serialize)]
pub struct FourierPair {
    /// `∫ e(tr(A(x)A(y))) ψ(y) dy`, phase built from the algebra.
    pub trace_side: Complex64,
    /// `∫ e(Tx·y) ψ(y) dy`, phase built from the trace form.
    pub plain_side: Complex64,
}

/// Trace-form Fourier transform of `ψ` at `x`, computed two ways.
pub fn kb_fourier(field: &NumberField, psi: &Cutoff, x: &[f64], tol: f64) -> Result<FourierPair> {
    check_tol(tol)?;
    let k = field.degree();
    if x.len() != k || psi.center.len() != k {
        return Err(Error::DimensionMismatch { expected: k, got: x.len() });
    }
    let mut trace_phase = MPoly::zero(k);
    for j in 0..k {
        let mut e = vec![0.0; k];
        e[j] = 1.0;
        trace_phase.add_term(crate::multiindex::MultiIndex::unit(k, j), field.trace(&field.mul(x, &e)));
    }
    let t = field.trace_form_f64();
    let tx = t * nalgebra::DVector::from_column_slice(x);
    let mut plain = MPoly::zero(k);
    for j in 0..k {
        plain.add_term(crate::multiindex::MultiIndex::unit(k, j), tx[j]);
    }
    let cfg = QuadratureConfig::with_tol(tol);
    let a = integrate(&CompiledPoly::new(&trace_phase), psi, cfg)?;
    let b = integrate(&CompiledPoly::new(&plain), psi, cfg)?;
    Ok(FourierPair { trace_side: a.value, plain_side: b.value })
}

/// Both evaluations of the extension operator
/// `E(ξ) = ∫ e(Σ_l ξ_l · Q_l(x)) ψ(x) dx` on `ℝ^k`.
#[derive(Clone, Debug, Serialize)]
pub struct ExtensionValue {
    /// Direct quadrature with the moment-curve phase.
    pub direct: Complex64,
    /// Quadrature of `φ_{f_η}` with `η_l = T^{-1} ξ_l`.
    pub reduced: Complex64,
    pub eta: Vec<Vec<f64>>,
}

/// `η_l = T^{-1} ξ_l` for each degree `l`.
pub fn reduce_frequencies(field: &NumberField, xi: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let k = field.degree();
    let tinv: DMatrix<f64> = field.trace_form_f64().try_inverse().ok_or(Error::SingularBasis)?;
    xi.iter()
        .map(|v| {
            if v.len() != k {
                return Err(Error::DimensionMismatch { expected: k, got: v.len() });
            }
            let e = &tinv * nalgebra::DVector::from_column_slice(v);
            Ok(e.iter().copied().collect())
        })
        .collect()
}

/// `f_η(x) = Σ_l A*(η_l) x^l`.
pub fn eta_polynomial(k: usize, eta: &[Vec<f64>]) -> TracePolynomial {
    let terms: Vec<(u32, Vec<f64>)> = eta.iter().enumerate().map(|(l, e)| (l as u32 + 1, e.clone())).collect();
    TracePolynomial::univariate(k, &terms)
}

pub fn extension_operator(field: &NumberField, psi: &Cutoff, xi: &[Vec<f64>], tol: f64) -> Result<ExtensionValue> {
    check_tol(tol)?;
    let k = field.degree();
    let n = xi.len();
    let curves = moment_curve_f64(field, n);
    let mut direct = MPoly::zero(k);
    for (l, row) in curves.iter().enumerate() {
        for (j, q) in row.iter().enumerate() {
            direct = direct.plus(&q.scaled(&xi[l][j]));
        }
    }
    let eta = reduce_frequencies(field, xi)?;
    let f = eta_polynomial(k, &eta);
    let cfg = QuadratureConfig::with_tol(tol);
    let a = integrate(&CompiledPoly::new(&direct), psi, cfg)?;
    let b = integrate(&CompiledPoly::new(&real_phase(field, &f)?), psi, cfg)?;
    Ok(ExtensionValue { direct: a.value, reduced: b.value, eta })
}

/// A one-parameter family `λ ↦ λ f` together with the data needed to test
/// `|I(λ f)| · H_{λf,S} ≲ 1`.
#[derive(Clone, Debug)]
pub struct Family {
    pub field: NumberField,
    pub base: TracePolynomial,
    pub params: Vec<f64>,
    pub psi: Cutoff,
    pub s: Vec<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct MainBoundRow {
    pub param: f64,
    pub abs_i: f64,
    pub h: f64,
    pub product: f64,
    pub converged: bool,
    /// `H = 0`: the bound says nothing.
    pub vacuous: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct MainBoundReport {
    pub rows: Vec<MainBoundRow>,
    /// Fitted slope of `log|I|` against `log λ`.
    pub slope_i: f64,
    /// Fitted slope of `log H` against `log λ`.
    pub slope_h: f64,
    pub max_over_median: f64,
    pub passes: bool,
}

pub fn verify_main_bound(family: &Family, tol: f64, grid: Option<GridSpec>) -> Result<MainBoundReport> {
    let mut rows = Vec::new();
    for &lam in &family.params {
        let f = family.base.scaled(lam);
        let r = oscillatory_integral(&family.field, &f, &family.psi, tol)?;
        let h = combined_h(&family.field, &f, &family.s, &family.psi, grid)?.value;
        let abs_i = r.value.norm();
        rows.push(MainBoundRow { param: lam, abs_i, h, product: abs_i * h, converged: r.converged, vacuous: h == 0.0 });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.param).collect();
    let slope_i = loglog_slope(&xs, &rows.iter().map(|r| r.abs_i).collect::<Vec<_>>());
    let live: Vec<&MainBoundRow> = rows.iter().filter(|r| !r.vacuous).collect();
    let slope_h = if live.len() >= 2 {
        loglog_slope(&live.iter().map(|r| r.param).collect::<Vec<_>>(), &live.iter().map(|r| r.h).collect::<Vec<_>>())
    } else {
        f64::NAN
    };
    let mut prods: Vec<f64> = live.iter().map(|r| r.product).collect();
    prods.sort_by(f64::total_cmp);
    let max_over_median = if prods.is_empty() {
        f64::NAN
    } else {
        prods[prods.len() - 1] / crate::stats::median_sorted(&prods)
    };
    let passes = max_over_median <= 3.0 && (slope_i + slope_h).abs() <= 0.15;
    Ok(MainBoundReport { rows, slope_i, slope_h, max_over_median, passes })
}
