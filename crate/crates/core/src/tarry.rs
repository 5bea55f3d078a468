//! Experiments around the integrability threshold `q_n = n(n+1)/2 + 1` of
//! the extension operator of the moment curve.
//!
//! ```
//! use tracephase::tarry::{coefficient_box_membership, BoxMode};
//! use num_complex::Complex64;
//!
//! let a = [Complex64::new(3.0, 0.0)];
//! assert!(coefficient_box_membership(BoxMode::Real, 1, 4.0, &a).unwrap().in_cover);
//! let a = [Complex64::new(5.0, 0.0)];
//! assert!(!coefficient_box_membership(BoxMode::Real, 1, 4.0, &a).unwrap().in_cover);
//! ```

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cutoff::{Cutoff, EmbeddingProductCutoff};
use crate::error::{Error, Result};
use crate::functionals::{uniform_h, GridSpec};
use crate::multiindex::binomial;
use crate::numberfield::NumberField;
use crate::quadrature::{eta_polynomial, factorized_integral, gauss_legendre, oscillatory_integral, reduce_frequencies};
use crate::stats::{loglog_slope, median, wilson_interval};

/// `q_n = n(n+1)/2 + 1`.
pub fn threshold(n: usize) -> usize {
    n * (n + 1) / 2 + 1
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoxMode {
    Real,
    Complex,
}

#[derive(Clone, Debug, Serialize)]
pub struct BoxMembership {
    pub in_cover: bool,
    /// Every grid cell `b` (with `b2 = 0` in real mode) whose test passes.
    pub cells: Vec<(i64, i64)>,
    pub constant: f64,
}

/// Constant in `|P^{(l)}(z_b)/l!| ≤ C Q^l`: if `H_P(z) ≤ Q` at a point within
/// `δ/Q` of the grid point `z_b`, Taylor expansion gives the inequality with
/// `C = max_l Σ_{l'} binom(l+l', l) δ^{l'}`.
pub fn box_constant(mode: BoxMode, n: usize) -> f64 {
    let delta = match mode {
        BoxMode::Real => 1.0,
        BoxMode::Complex => 2f64.sqrt(),
    };
    (1..=n)
        .map(|l| (0..=n - l).map(|lp| binomial((l + lp) as u32, l as u32) * delta.powi(lp as i32)).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Grid test for `a = (a_1, …, a_n)`, `P_a(z) = Σ a_m z^m`: `a` lies in the
/// cover iff some grid point `z_b = b/Q` (`b = b1 + i b2` in complex mode,
/// `|b_i| ≤ Q`) satisfies `|P_a^{(l)}(z_b)/l!| ≤ C Q^l` for `1 ≤ l ≤ n`.
pub fn coefficient_box_membership(mode: BoxMode, n: usize, q: f64, a: &[Complex64]) -> Result<BoxMembership> {
    if !(q > 1.0) {
        return Err(Error::Precondition(format!("Q = {q} must exceed 1")));
    }
    if a.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: a.len() });
    }
    if mode == BoxMode::Real && a.iter().any(|c| c.im != 0.0) {
        return Err(Error::Precondition("real mode needs real coefficients".into()));
    }
    let c = box_constant(mode, n);
    let m = q.floor() as i64;
    let b2_range = match mode {
        BoxMode::Real => 0..=0,
        BoxMode::Complex => -m..=m,
    };
    let mut cells = Vec::new();
    for b1 in -m..=m {
        for b2 in b2_range.clone() {
            let z = Complex64::new(b1 as f64 / q, b2 as f64 / q);
            let ok = (1..=n).all(|l| {
                let t: Complex64 = (l..=n)
                    .map(|mm| a[mm - 1] * binomial(mm as u32, l as u32) * z.powu((mm - l) as u32))
                    .sum();
                t.norm() <= c * q.powi(l as i32)
            });
            if ok {
                cells.push((b1, b2));
            }
        }
    }
    Ok(BoxMembership { in_cover: !cells.is_empty(), cells, constant: c })
}

/// The cutoff used for classification: plateau radius 2, support radius 3.
pub fn standard_cutoff(dim: usize) -> Cutoff {
    Cutoff { center: vec![0.0; dim], rho1: 2.0, rho2: 3.0 }
}

#[derive(Clone, Debug, Serialize)]
pub struct Classification {
    /// Uniform `H_{f_η,σ}` for each embedding.
    pub h: Vec<f64>,
    /// Embeddings with `H ≥ 1`.
    pub s: Vec<usize>,
    /// `floor(log2 H_σ)` for `σ ∈ S`.
    pub alpha: Vec<Option<i32>>,
    /// `S = ∅`: outside every class with nonempty `S`.
    pub outside: bool,
}

/// Splits `η = (η_1, …, η_n) ∈ ℝ^{kn}` by the dyadic size of `H_{f_η,σ}`.
pub fn classify_eta(field: &NumberField, eta: &[Vec<f64>], psi: &Cutoff, grid: Option<GridSpec>) -> Result<Classification> {
    let k = field.degree();
    if psi.center.len() != k {
        return Err(Error::DimensionMismatch { expected: k, got: psi.center.len() });
    }
    for e in eta {
        if e.len() != k {
            return Err(Error::DimensionMismatch { expected: k, got: e.len() });
        }
    }
    let f = eta_polynomial(k, eta);
    let mut h = vec![0.0; k];
    for class in field.classes() {
        // H is conjugation invariant, so one member decides the class
        let v = uniform_h(field, &f, class[0], psi, grid)?.value;
        for &s in class {
            h[s] = v;
        }
    }
    let s: Vec<usize> = (0..k).filter(|&i| h[i] >= 1.0).collect();
    let alpha = h.iter().map(|&v| (v >= 1.0).then(|| v.log2().floor() as i32)).collect();
    Ok(Classification { outside: s.is_empty(), h, s, alpha })
}

#[derive(Clone, Debug, Serialize)]
pub struct SfrakEstimate {
    pub samples: u64,
    pub hits: u64,
    pub box_half: f64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// `∏_{σ∈S} 2^{q_n α_σ}`.
    pub bound: f64,
    pub ratio: f64,
}

/// Monte Carlo measure of the set of `η` whose classification is exactly
/// `(S, α)`; `alpha[i]` belongs to `s[i]`.
pub fn sfrak_measure(
    field: &NumberField,
    n: usize,
    s: &[usize],
    alpha: &[i32],
    samples: u64,
    box_half: Option<f64>,
    seed: u64,
    grid: Option<GridSpec>,
) -> Result<SfrakEstimate> {
    if s.len() != alpha.len() {
        return Err(Error::DimensionMismatch { expected: s.len(), got: alpha.len() });
    }
    let k = field.degree();
    let mut target: Vec<Option<i32>> = vec![None; k];
    for (&sig, &a) in s.iter().zip(alpha) {
        field.check_embedding(sig)?;
        target[sig] = Some(a);
    }
    let amax = alpha.iter().copied().max().unwrap_or(0);
    let half = box_half.unwrap_or_else(|| 2f64.powi(amax + 2));
    let psi = standard_cutoff(k);
    let grid = match grid {
        Some(g) => g,
        None => GridSpec { points_per_axis: 17, refinements: 2 },
    };
    let hits: Result<Vec<bool>> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i);
            let eta: Vec<Vec<f64>> = (0..n).map(|_| (0..k).map(|_| half * (2.0 * rng.gen::<f64>() - 1.0)).collect()).collect();
            let c = classify_eta(field, &eta, &psi, Some(grid))?;
            Ok(c.alpha == target)
        })
        .collect();
    let hits = hits?.iter().filter(|&&b| b).count() as u64;
    let vol = (2.0 * half).powi((k * n) as i32);
    let (lo, hi) = wilson_interval(hits, samples);
    let qn = threshold(n) as i32;
    let bound: f64 = alpha.iter().map(|&a| 2f64.powi(qn * a)).product();
    let estimate = vol * hits as f64 / samples as f64;
    Ok(SfrakEstimate {
        samples,
        hits,
        box_half: half,
        estimate,
        ci_low: vol * lo,
        ci_high: vol * hi,
        bound,
        ratio: estimate / bound,
    })
}

/// `E_1(ξ) = ∫ e(Σ_l ξ_l · Q_l(x)) ψ(x) dx` on `ℝ^k`, computed as `I(η)` with
/// `η_l = T^{-1} ξ_l`. Totally real fields use the product cutoff with
/// plateau radius 2 and the integral factors over embeddings; other fields
/// use the radial cutoff.
pub fn extension_value(field: &NumberField, xi: &[Vec<f64>], tol: f64) -> Result<Complex64> {
    let k = field.degree();
    let eta = reduce_frequencies(field, xi)?;
    let f = eta_polynomial(k, &eta);
    let r = if field.is_totally_real() {
        let rho1 = EmbeddingProductCutoff::plateau_for(field, 2.0);
        let psi = EmbeddingProductCutoff::new(field, rho1, rho1 + 1.0, vec![0.0; k])?;
        factorized_integral(field, &f, &psi, tol)?
    } else {
        oscillatory_integral(field, &f, &standard_cutoff(k), tol)?
    };
    Ok(r.value)
}

/// `x ↦ x^p` in the algebra.
fn algebra_pow(field: &NumberField, x: &[f64], p: usize) -> Vec<f64> {
    let mut r = field.one();
    for _ in 0..p {
        r = field.mul(&r, x);
    }
    r
}

/// The recentering map: returns `η = (η_1, …, η_n)` with
/// `Σ_l η_l z^l = η_n (z - x_r)^n + Σ_{l<n} θ_l (z - x_r)^l` up to a constant.
/// `theta` holds `θ_1, …, θ_{n-1}`.
pub fn recenter(field: &NumberField, theta: &[Vec<f64>], eta_n: &[f64], x_r: &[f64]) -> Vec<Vec<f64>> {
    let k = field.degree();
    let n = theta.len() + 1;
    let neg: Vec<f64> = x_r.iter().map(|v| -v).collect();
    let powers: Vec<Vec<f64>> = (0..=n).map(|p| algebra_pow(field, &neg, p)).collect();
    let mut eta = vec![vec![0.0; k]; n];
    for l in 1..=n {
        let coef = if l == n { eta_n } else { &theta[l - 1][..] };
        for i in 1..=l {
            let t = field.mul(coef, &powers[l - i]);
            let b = binomial(l as u32, i as u32);
            for j in 0..k {
                eta[i - 1][j] += b * t[j];
            }
        }
    }
    eta
}

/// Jacobian determinant of `θ' ↦ η'` for fixed `η_n` and `x_r`, by finite
/// differences of the affine map.
pub fn recenter_determinant(field: &NumberField, n: usize, eta_n: &[f64], x_r: &[f64]) -> f64 {
    let k = field.degree();
    let dim = k * (n - 1);
    if dim == 0 {
        return 1.0;
    }
    let zero = vec![vec![0.0; k]; n - 1];
    let base = recenter(field, &zero, eta_n, x_r);
    let m = nalgebra::DMatrix::from_fn(dim, dim, |row, col| {
        let mut th = zero.clone();
        th[col / k][col % k] = 1.0;
        let e = recenter(field, &th, eta_n, x_r);
        e[row / k][row % k] - base[row / k][row % k]
    });
    m.determinant()
}

/// `(ν, u)` with `ν` a normalized top coefficient in `{1 ≤ |ν| ≤ 2^n,
/// |σ**(ν)| ≥ c ∀σ}` and `u` uniform in the unit ball of `ℝ^{k(n-1)}`.
fn sample_normalized<R: Rng>(field: &NumberField, n: usize, c: f64, rng: &mut R) -> Option<(Vec<f64>, Vec<Vec<f64>>)> {
    let k = field.degree();
    let top = 2f64.powi(n as i32);
    let mut nu = None;
    for _ in 0..10_000 {
        let v: Vec<f64> = (0..k).map(|_| top * (2.0 * rng.gen::<f64>() - 1.0)).collect();
        let r = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if r < 1.0 || r > top {
            continue;
        }
        if (0..k).all(|s| field.sigma_star(s, &v).norm() >= c) {
            nu = Some(v);
            break;
        }
    }
    let nu = nu?;
    let u = (0..n - 1)
        .map(|_| loop {
            let v: Vec<f64> = (0..k).map(|_| 2.0 * rng.gen::<f64>() - 1.0).collect();
            if v.iter().map(|a| a * a).sum::<f64>() <= 1.0 {
                break v;
            }
        })
        .collect();
    Some((nu, u))
}

/// Default lower threshold on `|σ**(ν)|` for the normalized top coefficient:
/// a tenth of the smallest `max_{|x|=1} |σ**(x)| = |w_σ|`.
pub fn default_e_constant(field: &NumberField) -> f64 {
    0.1 * (0..field.degree())
        .map(|s| field.w(s).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
        .fold(f64::INFINITY, f64::min)
}

#[derive(Clone, Debug, Serialize)]
pub struct ShellRow {
    pub j: i32,
    pub q: f64,
    pub value: f64,
    pub cumulative: f64,
    /// `value / previous value` (NaN for the first shell).
    pub ratio: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Trend {
    Convergent,
    Divergent,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct LqReport {
    pub rows: Vec<ShellRow>,
    pub trends: Vec<(f64, Trend)>,
    pub directions: usize,
    pub aligned_directions: usize,
}

#[derive(Clone, Debug)]
pub struct LqConfig {
    pub n: usize,
    pub q_list: Vec<f64>,
    /// Shell `j` is `2^j ≤ |ξ| ≤ 2^{j+1}`.
    pub shells: Vec<i32>,
    pub directions: usize,
    pub aligned: usize,
    pub radii: usize,
    pub seed: u64,
    pub tol: f64,
}

impl LqConfig {
    pub fn new(n: usize, q_list: Vec<f64>, shells: Vec<i32>) -> Self {
        LqConfig { n, q_list, shells, directions: 64, aligned: 8, radii: 16, seed: 42, tol: 1e-8 }
    }
}

/// Area of the unit sphere in `ℝ^d`.
pub fn sphere_area(d: usize) -> f64 {
    2.0 * PI.powf(d as f64 / 2.0) / statrs::function::gamma::gamma(d as f64 / 2.0)
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let r = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    v.into_iter().map(|a| a / r).collect()
}

/// Frequency directions: `aligned` directions `T η / |T η|` with `η` built
/// by the recentering map from a random lacunary scale, lattice point and
/// normalized coefficients, the rest uniform on the sphere.
pub fn lq_directions(field: &NumberField, cfg: &LqConfig) -> Result<Vec<Vec<f64>>> {
    let k = field.degree();
    let n = cfg.n;
    let dim = k * n;
    let t = field.trace_form_f64();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let c = default_e_constant(field);
    let mut dirs = Vec::new();
    for _ in 0..cfg.aligned.min(cfg.directions) {
        let q = 4f64 * 2f64.powi(rng.gen_range(0..4));
        let (nu, u) = sample_normalized(field, n, c, &mut rng).ok_or_else(|| Error::EmptyRegion("E_m".into()))?;
        let rmax = ((q / 10.0).floor() as i64).max(1);
        let x_r: Vec<f64> = (0..k).map(|_| rng.gen_range(1..=rmax) as f64 / q).collect();
        let eta_n: Vec<f64> = nu.iter().map(|v| v * q.powi(n as i32)).collect();
        let theta: Vec<Vec<f64>> = u
            .iter()
            .enumerate()
            .map(|(l, v)| v.iter().map(|a| a * (1e-4 * q).powi(l as i32 + 1)).collect())
            .collect();
        let eta = recenter(field, &theta, &eta_n, &x_r);
        let mut xi = Vec::with_capacity(dim);
        for e in &eta {
            let v = &t * nalgebra::DVector::from_column_slice(e);
            xi.extend(v.iter());
        }
        dirs.push(unit(xi));
    }
    while dirs.len() < cfg.directions {
        let v: Vec<f64> = (0..dim)
            .map(|_| {
                // Box–Muller
                let (a, b): (f64, f64) = (rng.gen::<f64>().max(1e-300), rng.gen());
                (-2.0 * a.ln()).sqrt() * (2.0 * PI * b).cos()
            })
            .collect();
        dirs.push(unit(v));
    }
    Ok(dirs)
}

/// Shell integrals `∫_{2^j ≤ |ξ| ≤ 2^{j+1}} |E_1(ξ)|^q dξ` estimated by the
/// mean over directions of a Gauss–Legendre radial rule.
pub fn lq_tail_experiment(field: &NumberField, cfg: &LqConfig) -> Result<LqReport> {
    let k = field.degree();
    let dim = k * cfg.n;
    if k > 2 || cfg.n > 3 {
        return Err(Error::DimensionTooLarge(dim, 6));
    }
    let dirs = lq_directions(field, cfg)?;
    let (gx, gw) = gauss_legendre(cfg.radii);
    let area = sphere_area(dim);
    let mut rows = Vec::new();
    let mut cumulative = vec![0.0; cfg.q_list.len()];
    let mut prev = vec![f64::NAN; cfg.q_list.len()];
    for &j in &cfg.shells {
        let (a, b) = (2f64.powi(j), 2f64.powi(j + 1));
        let jobs: Vec<(usize, usize)> = (0..dirs.len()).flat_map(|d| (0..gx.len()).map(move |i| (d, i))).collect();
        let vals: Result<Vec<f64>> = jobs
            .par_iter()
            .map(|&(d, i)| {
                let r = 0.5 * (a + b) + 0.5 * (b - a) * gx[i];
                let xi: Vec<Vec<f64>> = (0..cfg.n).map(|l| (0..k).map(|c| r * dirs[d][l * k + c]).collect()).collect();
                Ok(extension_value(field, &xi, cfg.tol)?.norm())
            })
            .collect();
        let vals = vals?;
        for (qi, &q) in cfg.q_list.iter().enumerate() {
            let mut total = 0.0;
            for (idx, &(_, i)) in jobs.iter().enumerate() {
                let r = 0.5 * (a + b) + 0.5 * (b - a) * gx[i];
                total += 0.5 * (b - a) * gw[i] * vals[idx].powf(q) * r.powi(dim as i32 - 1);
            }
            let value = area * total / dirs.len() as f64;
            cumulative[qi] += value;
            rows.push(ShellRow { j, q, value, cumulative: cumulative[qi], ratio: value / prev[qi] });
            prev[qi] = value;
        }
    }
    let trends = cfg
        .q_list
        .iter()
        .map(|&q| {
            let ratios: Vec<f64> = rows.iter().filter(|r| r.q == q && r.ratio.is_finite()).map(|r| r.ratio).collect();
            let last = &ratios[ratios.len().saturating_sub(3)..];
            let t = if last.len() < 3 {
                Trend::Inconclusive
            } else if last.iter().all(|&r| r < 0.9) {
                Trend::Convergent
            } else if last.iter().all(|&r| r >= 1.0) {
                Trend::Divergent
            } else {
                Trend::Inconclusive
            };
            (q, t)
        })
        .collect();
    Ok(LqReport { rows, trends, directions: dirs.len(), aligned_directions: cfg.aligned.min(cfg.directions) })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SharpnessConfig {
    /// Lacunary base; `Q_m = A^m`.
    #[serde(rename = "A")]
    pub base: f64,
    pub m_min: u32,
    pub m_max: u32,
    pub a: f64,
    pub c1: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Lower threshold on `|σ**(ν)|`; defaults to [`default_e_constant`].
    #[serde(default)]
    pub e_constant: Option<f64>,
}

fn default_seed() -> u64 {
    42
}

impl SharpnessConfig {
    pub fn new(base: f64, m_min: u32, m_max: u32) -> Self {
        SharpnessConfig { base, m_min, m_max, a: 4.0, c1: 1e-4, seed: 42, e_constant: None }
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        if !(self.base >= 2.0) {
            return Err(Error::ConfigInvalid(format!("lacunary base {} must be at least 2", self.base)));
        }
        if self.m_min > self.m_max {
            return Err(Error::ConfigInvalid("m_min > m_max".into()));
        }
        if !(self.c1 > 0.0 && self.a > 0.0) {
            return Err(Error::ConfigInvalid("a and c1 must be positive".into()));
        }
        let v = self.c1 * self.a.powi(k as i32 + 1);
        if v > 0.01 {
            return Err(Error::ConfigInvalid(format!("c1·a^(k+1) = {v} exceeds 0.01")));
        }
        let qmax = self.base.powi(self.m_max as i32);
        if qmax > 32.0 {
            return Err(Error::ConfigInvalid(format!("Q = {qmax} exceeds 32")));
        }
        Ok(())
    }

    pub fn q(&self, m: u32) -> f64 {
        self.base.powi(m as i32)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SharpnessRow {
    pub m: u32,
    pub q: f64,
    pub trial: usize,
    pub r: Vec<i64>,
    pub abs_ii: f64,
    pub product: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SharpnessReport {
    pub rows: Vec<SharpnessRow>,
    /// Median of `|II_r| Q_m^k` for each `m`.
    pub medians: Vec<(u32, f64)>,
    pub min_product: f64,
    /// Largest over smallest per-`m` median.
    pub spread: f64,
    /// Fitted slope of `log median |II_r|` against `log Q_m`.
    pub slope: f64,
    pub e_constant: f64,
}

/// `II_r(θ) = ∫ e(φ_{f_θ}(x)) ψ(x + x_r) dx`.
pub fn shifted_integral(field: &NumberField, theta: &[Vec<f64>], x_r: &[f64], tol: f64) -> Result<(Complex64, bool)> {
    let k = field.degree();
    let f = eta_polynomial(k, theta);
    let r = if field.is_totally_real() {
        let rho1 = EmbeddingProductCutoff::plateau_for(field, 2.0);
        let psi = EmbeddingProductCutoff::new(field, rho1, rho1 + 1.0, x_r.to_vec())?;
        factorized_integral(field, &f, &psi, tol)?
    } else {
        let psi = standard_cutoff(k).recentered(x_r.iter().map(|v| -v).collect());
        oscillatory_integral(field, &f, &psi, tol)?
    };
    Ok((r.value, r.converged))
}

/// Samples `θ_n ∈ E_m`, `θ' ∈ ℬ` and `r ∈ 𝒫_m` and records `|II_r(θ)|`.
/// Trial `t` draws from stream `t` of the seed at every scale, so the
/// normalized coefficients are shared across `m`.
pub fn sharpness_experiment(
    field: &NumberField,
    n: usize,
    cfg: &SharpnessConfig,
    trials: usize,
    tol: f64,
) -> Result<SharpnessReport> {
    let k = field.degree();
    cfg.validate(k)?;
    if n < 1 {
        return Err(Error::Precondition("n ≥ 1".into()));
    }
    let mut c = cfg.e_constant.unwrap_or_else(|| default_e_constant(field));
    let mut normalized = Vec::new();
    for t in 0..trials {
        loop {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(t as u64);
            if let Some(s) = sample_normalized(field, n, c, &mut rng) {
                let rfrac: Vec<f64> = (0..k).map(|_| rng.gen()).collect();
                normalized.push((s, rfrac));
                break;
            }
            c *= 0.5;
            log::warn!("E_m empty, lowering its constant to {c:e}");
            if c < 1e-12 {
                return Err(Error::EmptyRegion("E_m".into()));
            }
            normalized.clear();
        }
    }
    let mut rows = Vec::new();
    let mut medians = Vec::new();
    for m in cfg.m_min..=cfg.m_max {
        let q = cfg.q(m);
        let rmax = ((q / 10.0).floor() as i64).max(1);
        let out: Result<Vec<SharpnessRow>> = normalized
            .par_iter()
            .enumerate()
            .map(|(t, ((nu, u), rfrac))| {
                let eta_n: Vec<f64> = nu.iter().map(|v| v * q.powi(n as i32)).collect();
                let mut theta: Vec<Vec<f64>> = u
                    .iter()
                    .enumerate()
                    .map(|(l, v)| v.iter().map(|a| a * (cfg.c1 * q).powi(l as i32 + 1)).collect())
                    .collect();
                theta.push(eta_n);
                let r: Vec<i64> = rfrac.iter().map(|f| 1 + ((f * rmax as f64) as i64).min(rmax - 1)).collect();
                let x_r: Vec<f64> = r.iter().map(|&v| v as f64 / q).collect();
                let (v, converged) = shifted_integral(field, &theta, &x_r, tol)?;
                let abs_ii = v.norm();
                Ok(SharpnessRow { m, q, trial: t, r, abs_ii, product: abs_ii * q.powi(k as i32), converged })
            })
            .collect();
        let out = out?;
        medians.push((m, median(&out.iter().map(|r| r.product).collect::<Vec<_>>())));
        rows.extend(out);
    }
    let min_product = rows.iter().map(|r| r.product).fold(f64::INFINITY, f64::min);
    let mx = medians.iter().map(|m| m.1).fold(0.0, f64::max);
    let mn = medians.iter().map(|m| m.1).fold(f64::INFINITY, f64::min);
    let qs: Vec<f64> = medians.iter().map(|(m, _)| cfg.q(*m)).collect();
    let med_ii: Vec<f64> = medians.iter().map(|(m, p)| p / cfg.q(*m).powi(k as i32)).collect();
    let slope = if qs.len() >= 2 { loglog_slope(&qs, &med_ii) } else { f64::NAN };
    Ok(SharpnessReport { rows, medians, min_product, spread: mx / mn, slope, e_constant: c })
}

/// `∫_0^∞ cos(s^d) ds`, summed piecewise between the zeros of `cos(s^d)`
/// with repeated averaging of the alternating partial sums.
pub fn cosine_power_integral(d: u32) -> f64 {
    assert!(d >= 2);
    let (x, w) = gauss_legendre(15);
    let dd = d as f64;
    let piece = |a: f64, b: f64| -> f64 {
        (0..x.len())
            .map(|i| {
                let s = 0.5 * (a + b) + 0.5 * (b - a) * x[i];
                0.5 * (b - a) * w[i] * s.powf(dd).cos()
            })
            .sum()
    };
    let zero = |j: usize| ((j as f64 + 0.5) * PI).powf(1.0 / dd);
    let mut partial = Vec::new();
    let mut acc = piece(0.0, zero(0));
    let mut prev = zero(0);
    for j in 1..=60 {
        let next = zero(j);
        // refine each half period so the rule stays accurate
        let sub = 4;
        for i in 0..sub {
            let a = prev + (next - prev) * i as f64 / sub as f64;
            let b = prev + (next - prev) * (i + 1) as f64 / sub as f64;
            acc += piece(a, b);
        }
        prev = next;
        partial.push(acc);
    }
    while partial.len() > 1 {
        partial = partial.windows(2).map(|p| 0.5 * (p[0] + p[1])).collect();
    }
    partial[0]
}

/// `Γ(1 + 1/d) cos(π/(2d))`.
pub fn cosine_power_closed_form(d: u32) -> f64 {
    let dd = d as f64;
    statrs::function::gamma::gamma(1.0 + 1.0 / dd) * (PI / (2.0 * dd)).cos()
}
