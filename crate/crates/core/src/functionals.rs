//! The `H` and `J` functionals, polydiscs and Vitali-type covers.
//!
//! For an embedded polynomial `P` and a point `z`,
//! `H(z) = max_{1 ≤ |α| ≤ d} |∂^α P(z)/α!|^{1/|α|}`; `J` is the same maximum
//! restricted to `|α| ≥ 2`. Uniform values are infima over the support of a
//! cutoff, found by a grid search and therefore reported as upper bounds.
//!
//! ```
//! use tracephase::functionals::pointwise_h;
//! use tracephase::numberfield::NumberField;
//! use tracephase::phases::TracePolynomial;
//!
//! let q = NumberField::rationals();
//! let f = TracePolynomial::monomial(1, 1, 3, vec![1.0]);
//! let h = pointwise_h(&q, &f, 0, &[2.0]).unwrap();
//! assert!((h.value - 12.0).abs() < 1e-12);
//! assert_eq!(h.argmax.unwrap().to_string(), "(1)");
//! ```

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cutoff::{Amplitude, Cutoff};
use crate::error::{Error, Result};
use crate::multiindex::MultiIndex;
use crate::numberfield::{Decomposition, NumberField};
use crate::phases::{embed_polynomial, sigma_vec, EmbeddedPolynomial, TracePolynomial};

/// A pointwise functional value with the multi-index attaining the maximum.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HValue {
    pub value: f64,
    pub argmax: Option<MultiIndex>,
}

/// `max_{|α| ≥ lo} |T_α|^{e/|α|}` over the Taylor coefficients of `p` at `z`.
/// Ties go to the first index in graded order.
pub fn taylor_functional(p: &EmbeddedPolynomial, z: &[Complex64], lo: u32, e: f64) -> HValue {
    let mut best = HValue { value: 0.0, argmax: None };
    for (beta, t) in p.taylor(z, lo) {
        let v = t.norm().powf(e / beta.degree() as f64);
        if v > best.value {
            best = HValue { value: v, argmax: Some(beta) };
        }
    }
    best
}

/// `H_{f,σ}(x)`.
pub fn pointwise_h(field: &NumberField, f: &TracePolynomial, sigma: usize, x: &[f64]) -> Result<HValue> {
    let p = embed_polynomial(field, f, sigma)?;
    check_len(field, f, x)?;
    Ok(taylor_functional(&p, &sigma_vec(field, sigma, x), 1, 1.0))
}

/// `J_{f,σ}(x)`: as `H` but over `|α| ≥ 2`.
pub fn pointwise_j(field: &NumberField, f: &TracePolynomial, sigma: usize, x: &[f64]) -> Result<HValue> {
    let p = embed_polynomial(field, f, sigma)?;
    check_len(field, f, x)?;
    Ok(taylor_functional(&p, &sigma_vec(field, sigma, x), 2, 1.0))
}

fn check_len(field: &NumberField, f: &TracePolynomial, x: &[f64]) -> Result<()> {
    let d = field.degree() * f.nvars();
    if x.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: x.len() });
    }
    Ok(())
}

/// Resolution of the grid search behind uniform functionals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GridSpec {
    pub points_per_axis: usize,
    pub refinements: usize,
}

impl GridSpec {
    /// 33 points per axis up to dimension 3, 17 in dimension 4; three
    /// refinement passes.
    pub fn default_for(dim: usize) -> Result<Self> {
        match dim {
            0 => Err(Error::InvalidGrid("dimension 0".into())),
            1..=3 => Ok(GridSpec { points_per_axis: 33, refinements: 3 }),
            4 => Ok(GridSpec { points_per_axis: 17, refinements: 3 }),
            d => Err(Error::DimensionTooLarge(d, 4)),
        }
    }
}

/// Result of a grid infimum.
#[derive(Clone, Debug, Serialize)]
pub struct GridMin {
    /// Smallest value found; an upper bound for the true infimum.
    pub value: f64,
    pub argmin: Vec<f64>,
    pub evaluations: usize,
    pub grid: GridSpec,
}

/// Infimum of `g` over the support ball of `psi` by a grid search followed
/// by refinement passes that shrink the grid by 1/8 around the incumbent.
pub fn grid_infimum<G>(psi: &Cutoff, grid: GridSpec, g: G) -> Result<GridMin>
where
    G: Fn(&[f64]) -> f64 + Sync,
{
    let d = psi.dim();
    if d > 4 {
        return Err(Error::DimensionTooLarge(d, 4));
    }
    if grid.points_per_axis < 9 {
        return Err(Error::InvalidGrid(format!("{} points per axis (minimum 9)", grid.points_per_axis)));
    }
    let m = grid.points_per_axis;
    let mut center = psi.center.clone();
    let mut half = psi.rho2;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut evals = 0;
    for _pass in 0..=grid.refinements {
        let total = m.pow(d as u32);
        let step = 2.0 * half / (m - 1) as f64;
        let point = |idx: usize| -> Vec<f64> {
            let mut r = idx;
            (0..d)
                .map(|a| {
                    let i = r % m;
                    r /= m;
                    center[a] - half + step * i as f64
                })
                .collect()
        };
        let vals: Vec<Option<(f64, usize)>> = (0..total)
            .into_par_iter()
            .map(|idx| {
                let x = point(idx);
                if psi.in_support(&x) {
                    Some((g(&x), idx))
                } else {
                    None
                }
            })
            .collect();
        for (v, idx) in vals.into_iter().flatten() {
            evals += 1;
            if best.as_ref().is_none_or(|(b, _)| v < *b) {
                best = Some((v, point(idx)));
            }
        }
        if let Some((_, x)) = &best {
            center = x.clone();
        }
        half /= 8.0;
    }
    let (value, argmin) = best.ok_or_else(|| Error::InvalidGrid("no grid point in the support".into()))?;
    Ok(GridMin { value, argmin, evaluations: evals, grid })
}

/// `H_{f,σ}` minimised over the support of `ψ`.
#[derive(Clone, Debug, Serialize)]
pub struct UniformH {
    pub value: f64,
    pub argmin: Vec<f64>,
    pub argmax: Option<MultiIndex>,
    pub evaluations: usize,
    pub grid: GridSpec,
    /// Always true: grid infima bound the true infimum from above.
    pub upper_bound: bool,
}

pub fn uniform_h(
    field: &NumberField,
    f: &TracePolynomial,
    sigma: usize,
    psi: &Cutoff,
    grid: Option<GridSpec>,
) -> Result<UniformH> {
    uniform_functional(field, f, sigma, psi, grid, 1)
}

/// `J_{f,σ}` minimised over the support of `ψ`.
pub fn uniform_j(
    field: &NumberField,
    f: &TracePolynomial,
    sigma: usize,
    psi: &Cutoff,
    grid: Option<GridSpec>,
) -> Result<UniformH> {
    uniform_functional(field, f, sigma, psi, grid, 2)
}

fn uniform_functional(
    field: &NumberField,
    f: &TracePolynomial,
    sigma: usize,
    psi: &Cutoff,
    grid: Option<GridSpec>,
    lo: u32,
) -> Result<UniformH> {
    let d = field.degree() * f.nvars();
    if d > 4 {
        return Err(Error::DimensionTooLarge(d, 4));
    }
    if psi.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: psi.dim() });
    }
    let grid = match grid {
        Some(g) => g,
        None => GridSpec::default_for(d)?,
    };
    let p = embed_polynomial(field, f, sigma)?;
    let eval = |x: &[f64]| taylor_functional(&p, &sigma_vec(field, sigma, x), lo, 1.0).value;
    let gm = grid_infimum(psi, grid, eval)?;
    let argmax = taylor_functional(&p, &sigma_vec(field, sigma, &gm.argmin), lo, 1.0).argmax;
    Ok(UniformH {
        value: gm.value,
        argmin: gm.argmin,
        argmax,
        evaluations: gm.evaluations,
        grid,
        upper_bound: true,
    })
}

/// Checks that `S` is a nonempty, conjugation-closed set of embeddings.
pub fn check_embedding_set(field: &NumberField, s: &[usize]) -> Result<()> {
    if s.is_empty() {
        return Err(Error::EmptySet);
    }
    for &sigma in s {
        field.check_embedding(sigma)?;
        let c = field.conjugate(sigma);
        if !s.contains(&c) {
            return Err(Error::NotConjugationClosed(c));
        }
    }
    Ok(())
}

/// `H_{f,S} = ∏_{σ ∈ S} H_{f,σ}` with conjugate embeddings counted separately.
#[derive(Clone, Debug, Serialize)]
pub struct CombinedH {
    pub value: f64,
    pub factors: Vec<(usize, f64)>,
}

pub fn combined_h(
    field: &NumberField,
    f: &TracePolynomial,
    s: &[usize],
    psi: &Cutoff,
    grid: Option<GridSpec>,
) -> Result<CombinedH> {
    check_embedding_set(field, s)?;
    let mut sorted = s.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut factors = Vec::new();
    for sigma in sorted {
        factors.push((sigma, uniform_h(field, f, sigma, psi, grid)?.value));
    }
    Ok(CombinedH { value: factors.iter().map(|(_, v)| v).product(), factors })
}

/// Real or complex variables for the classical `H` functional.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum HMode {
    /// Exponent `1/|α|`.
    Real,
    /// Exponent `2/|α|`.
    Complex,
}

/// The classical functional of a polynomial with real or complex
/// coefficients at a point.
pub fn classical_h(mode: HMode, p: &EmbeddedPolynomial, z: &[Complex64]) -> f64 {
    let e = match mode {
        HMode::Real => 1.0,
        HMode::Complex => 2.0,
    };
    taylor_functional(p, z, 1, e).value
}

/// Classical functional minimised over the support of `ψ`; in complex mode
/// `ψ` lives on `ℝ^{2n}` with `z_l = x_{2l} + i x_{2l+1}`.
pub fn classical_h_uniform(mode: HMode, p: &EmbeddedPolynomial, psi: &Cutoff, grid: Option<GridSpec>) -> Result<f64> {
    let n = p.nvars;
    let d = match mode {
        HMode::Real => n,
        HMode::Complex => 2 * n,
    };
    if psi.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: psi.dim() });
    }
    let grid = match grid {
        Some(g) => g,
        None => GridSpec::default_for(d)?,
    };
    let to_z = |x: &[f64]| -> Vec<Complex64> {
        match mode {
            HMode::Real => x.iter().map(|&a| Complex64::new(a, 0.0)).collect(),
            HMode::Complex => x.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect(),
        }
    };
    Ok(grid_infimum(psi, grid, |x| classical_h(mode, p, &to_z(x)))?.value)
}

/// The polydisc `P_{S,C}(x)`: the set of `x + Σ_σ̃ u_σ̃` with `u_σ̃ ∈ V^n_{σ̃,ℝ}`
/// and `|u_σ̃| ≤ r_σ̃`, where `r_σ̃ = C / J_{f,σ}(x)` for classes in `S`
/// (infinite when `J` vanishes) and `r_σ̃ = 1` otherwise.
#[derive(Clone, Debug, Serialize)]
pub struct Polydisc {
    pub center: Vec<f64>,
    /// Per class: `1/J_{f,σ}(x)` (possibly infinite), or `None` outside `S`.
    pub inverse_j: Vec<Option<f64>>,
    pub constant: f64,
}

impl Polydisc {
    pub fn radii(&self) -> Vec<f64> {
        self.radii_with(self.constant)
    }

    /// Radii for another constant `C`.
    pub fn radii_with(&self, c: f64) -> Vec<f64> {
        self.inverse_j
            .iter()
            .map(|ij| match ij {
                Some(v) if v.is_infinite() => f64::INFINITY,
                Some(v) => c * v,
                None => 1.0,
            })
            .collect()
    }

    pub fn has_infinite_radius(&self) -> bool {
        self.radii().iter().any(|r| r.is_infinite())
    }

    pub fn contains(&self, dec: &Decomposition, y: &[f64]) -> bool {
        self.contains_with(dec, y, self.constant)
    }

    pub fn contains_with(&self, dec: &Decomposition, y: &[f64], c: f64) -> bool {
        let diff: Vec<f64> = y.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        let norms = dec.component_norms(&diff);
        norms
            .iter()
            .zip(self.radii_with(c))
            .all(|(nv, r)| *nv <= r * (1.0 + 1e-12) + 1e-14)
    }

    /// A random member: each class component uniform in its ball.
    pub fn sample<R: Rng>(&self, field: &NumberField, dec: &Decomposition, rng: &mut R) -> Vec<f64> {
        let k = field.degree();
        let n = self.center.len() / k;
        let mut y = self.center.clone();
        for (ci, r) in self.radii().iter().enumerate() {
            let r = if r.is_infinite() { 1.0 } else { *r };
            let basis = dec.real_basis(ci);
            let dim = basis.len() * n;
            let mut g: Vec<f64> = (0..dim).map(|_| gaussian(rng)).collect();
            let norm = g.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-300);
            let rad = r * rng.gen::<f64>().powf(1.0 / dim as f64);
            g.iter_mut().for_each(|a| *a *= rad / norm);
            for l in 0..n {
                for (b, v) in basis.iter().enumerate() {
                    let a = g[l * basis.len() + b];
                    for j in 0..k {
                        y[l * k + j] += a * v[j];
                    }
                }
            }
        }
        y
    }
}

fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen::<f64>().max(1e-300);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

pub fn polydisc(field: &NumberField, f: &TracePolynomial, s: &[usize], x: &[f64], c: f64) -> Result<Polydisc> {
    check_embedding_set(field, s)?;
    check_len(field, f, x)?;
    let inverse_j = field
        .classes()
        .iter()
        .map(|cls| {
            if s.contains(&cls[0]) {
                let j = pointwise_j(field, f, cls[0], x).map(|h| h.value)?;
                Ok(Some(if j == 0.0 { f64::INFINITY } else { 1.0 / j }))
            } else {
                Ok(None)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Polydisc { center: x.to_vec(), inverse_j, constant: c })
}

/// Settings for [`vitali_cover`].
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CoverConfig {
    pub points_per_axis: usize,
    pub overlap_samples: usize,
    pub max_centers: usize,
}

impl Default for CoverConfig {
    fn default() -> Self {
        CoverConfig { points_per_axis: 41, overlap_samples: 1000, max_centers: 1_000_000 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CoverReport {
    pub centers: Vec<Vec<f64>>,
    pub candidates: usize,
    /// Centers whose polydisc has an infinite radius.
    pub infinite_centers: usize,
    /// Maximal number of `6ε`-polydiscs containing a sampled point.
    pub overlap: usize,
}

struct Candidate {
    x: Vec<f64>,
    coords: Vec<f64>,
    inverse_j: Vec<Option<f64>>,
}

/// Greedy cover of the grid points in `supp ψ` by `ε`-polydiscs.
///
/// Candidates are taken in decreasing order of their smallest radius and kept
/// when their `ε`-polydisc misses all kept ones. Two polydiscs meet exactly
/// when every class component of the difference of centers is at most the
/// sum of the radii, since the class subspaces form a direct sum.
pub fn vitali_cover<R: Rng>(
    field: &NumberField,
    f: &TracePolynomial,
    s: &[usize],
    psi: &Cutoff,
    eps: f64,
    cfg: CoverConfig,
    rng: &mut R,
) -> Result<CoverReport> {
    check_embedding_set(field, s)?;
    let k = field.degree();
    let d = k * f.nvars();
    if psi.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: psi.dim() });
    }
    if d > 4 {
        return Err(Error::DimensionTooLarge(d, 4));
    }
    let dec = field.decompose();
    let classes = field.classes().to_vec();
    let offsets: Vec<usize> = {
        let mut o = Vec::new();
        let mut acc = 0;
        for ci in 0..classes.len() {
            o.push(acc);
            acc += dec.real_basis(ci).len();
        }
        o
    };
    let class_norms = |coords: &[f64]| -> Vec<f64> {
        let mut acc = vec![0.0; classes.len()];
        for block in coords.chunks(k) {
            for (ci, o) in offsets.iter().enumerate() {
                for j in 0..dec.real_basis(ci).len() {
                    acc[ci] += block[o + j] * block[o + j];
                }
            }
        }
        acc.iter().map(|v| v.sqrt()).collect()
    };
    let m = cfg.points_per_axis.max(2);
    let total = m.pow(d as u32);
    let step = 2.0 * psi.rho2 / (m - 1) as f64;
    let mut cands: Vec<Candidate> = (0..total)
        .into_par_iter()
        .filter_map(|idx| {
            let mut r = idx;
            let x: Vec<f64> = (0..d)
                .map(|a| {
                    let i = r % m;
                    r /= m;
                    psi.center[a] - psi.rho2 + step * i as f64
                })
                .collect();
            if !psi.in_support(&x) {
                return None;
            }
            let pd = polydisc(field, f, s, &x, eps).ok()?;
            let coords: Vec<f64> = x.chunks(k).flat_map(|b| dec.coordinates(b)).collect();
            Some(Candidate { x, coords, inverse_j: pd.inverse_j })
        })
        .collect();
    let radii = |c: &Candidate, scale: f64| -> Vec<f64> {
        c.inverse_j
            .iter()
            .map(|ij| match ij {
                Some(v) if v.is_infinite() => f64::INFINITY,
                Some(v) => scale * v,
                None => 1.0,
            })
            .collect()
    };
    let size = |c: &Candidate| radii(c, 1.0).into_iter().fold(f64::INFINITY, f64::min);
    let mut order: Vec<usize> = (0..cands.len()).collect();
    order.sort_by(|&a, &b| size(&cands[b]).total_cmp(&size(&cands[a])).then(a.cmp(&b)));

    let mut chosen: Vec<usize> = Vec::new();
    for &i in &order {
        let ri = radii(&cands[i], eps);
        let disjoint = chosen.iter().all(|&j| {
            let rj = radii(&cands[j], eps);
            let diff: Vec<f64> = cands[i].coords.iter().zip(&cands[j].coords).map(|(a, b)| a - b).collect();
            class_norms(&diff)
                .iter()
                .zip(ri.iter().zip(&rj))
                .any(|(nv, (a, b))| *nv > a + b)
        });
        if disjoint {
            chosen.push(i);
            if chosen.len() > cfg.max_centers {
                return Err(Error::BudgetExceeded(format!("more than {} centers", cfg.max_centers)));
            }
        }
    }
    let inside = |y_coords: &[f64], c: &Candidate, scale: f64| -> bool {
        let diff: Vec<f64> = y_coords.iter().zip(&c.coords).map(|(a, b)| a - b).collect();
        class_norms(&diff)
            .iter()
            .zip(radii(c, scale))
            .all(|(nv, r)| *nv <= r * (1.0 + 1e-12) + 1e-14)
    };
    let uncovered = cands
        .par_iter()
        .filter(|p| !chosen.iter().any(|&j| inside(&p.coords, &cands[j], 3.0 * eps)))
        .count();
    if uncovered > 0 {
        return Err(Error::CoverIncomplete(uncovered));
    }
    let samples: Vec<Vec<f64>> = (0..cfg.overlap_samples)
        .map(|_| loop {
            let y: Vec<f64> = psi.center.iter().map(|c| c + psi.rho2 * (2.0 * rng.gen::<f64>() - 1.0)).collect();
            if psi.in_support(&y) {
                break y;
            }
        })
        .collect();
    let overlap = samples
        .par_iter()
        .map(|y| {
            let yc: Vec<f64> = y.chunks(k).flat_map(|b| dec.coordinates(b)).collect();
            chosen.iter().filter(|&&j| inside(&yc, &cands[j], 6.0 * eps)).count()
        })
        .max()
        .unwrap_or(0);
    let infinite_centers = chosen.iter().filter(|&&j| cands[j].inverse_j.iter().any(|v| v.is_some_and(f64::is_infinite))).count();
    let centers = chosen.iter().map(|&j| std::mem::take(&mut cands[j].x)).collect();
    Ok(CoverReport { centers, candidates: cands.len(), infinite_centers, overlap })
}

/// Two-sided ratio `max(J(x')/J(x), J(x)/J(x'))` over `σ ∈ S` for a random
/// `x' ∈ P_{S,ε}(x)`. Embeddings with `J = 0` at either point are skipped.
pub fn j_stability_ratio<R: Rng>(
    field: &NumberField,
    f: &TracePolynomial,
    s: &[usize],
    x: &[f64],
    eps: f64,
    rng: &mut R,
) -> Result<(f64, Vec<f64>)> {
    let pd = polydisc(field, f, s, x, eps)?;
    let dec = field.decompose();
    let y = pd.sample(field, &dec, rng);
    let mut worst: f64 = 1.0;
    for &sigma in s {
        let a = pointwise_j(field, f, sigma, x)?.value;
        let b = pointwise_j(field, f, sigma, &y)?.value;
        if a > 0.0 && b > 0.0 {
            worst = worst.max(a / b).max(b / a);
        }
    }
    Ok((worst, y))
}

/// `max_σ |∇P_σ(σ⃗(x')) - ∇P_σ(σ⃗(x))| / (ε J_σ(x'))` over `σ ∈ S`.
pub fn gradient_stability_constant(
    field: &NumberField,
    f: &TracePolynomial,
    s: &[usize],
    x: &[f64],
    y: &[f64],
    eps: f64,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &sigma in s {
        let p = embed_polynomial(field, f, sigma)?;
        let ga = p.gradient(&sigma_vec(field, sigma, x));
        let gb = p.gradient(&sigma_vec(field, sigma, y));
        let diff = ga.iter().zip(&gb).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        let j = pointwise_j(field, f, sigma, y)?.value;
        if j > 0.0 {
            worst = worst.max(diff / (eps * j));
        }
    }
    Ok(worst)
}
