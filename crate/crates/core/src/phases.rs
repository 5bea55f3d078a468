//! Polynomials with coefficients in `ℝ ⊗ K`, their trace phases and
//! embedded components.
//!
//! A [`TracePolynomial`] in `n` variables has, for each multi-index `α`, a
//! coefficient `a_α ∈ ℝ^k` read in the basis `B`. Its phase is
//! `φ_f(x) = tr(f(x))` for `x = (x_1, …, x_n)` with `x_l ∈ ℝ^k`, laid out
//! block by block: entry `l·k + j` of the flat vector is coordinate `j` of `x_l`.
//!
//! ```
//! use tracephase::numberfield::NumberField;
//! use tracephase::phases::{eval_phase, TracePolynomial};
//!
//! let k = NumberField::gaussian();
//! // f(z) = z^2 over ℚ(i): the phase is 2(x^2 - y^2)
//! let f = TracePolynomial::monomial(2, 1, 2, vec![1.0, 0.0]);
//! let v = eval_phase(&k, &f, &[3.0, 1.0]);
//! assert!((v - 16.0).abs() < 1e-12);
//! ```

use std::collections::BTreeMap;

use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multiindex::MultiIndex;
use crate::numberfield::{Decomposition, NumberField};
use crate::poly::MPoly;
use crate::rational;

/// The `P_{f,σ}` component: complex coefficients `σ**(a_α)`.
pub type EmbeddedPolynomial = MPoly<Complex64>;

/// JSON form: `{"n": 1, "coeffs": {"(2)": ["0", "1"]}}`. Entries may be
/// rational strings, decimal strings or JSON numbers.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PolySpec {
    pub n: usize,
    pub coeffs: BTreeMap<String, Vec<serde_json::Value>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TracePolynomial {
    k: usize,
    n: usize,
    coeffs: BTreeMap<MultiIndex, Vec<f64>>,
}

impl TracePolynomial {
    pub fn new(k: usize, n: usize) -> Self {
        TracePolynomial { k, n, coeffs: BTreeMap::new() }
    }

    /// `a · x^α` with `α = (d)` in one variable, or `x_1^d` when `n > 1`.
    pub fn monomial(k: usize, n: usize, d: u32, a: Vec<f64>) -> Self {
        let mut f = Self::new(k, n);
        let mut m = MultiIndex::zero(n);
        m.0[0] = d;
        f.set(m, a);
        f
    }

    /// Univariate polynomial `Σ a_l x^l` from `(l, a_l)` pairs.
    pub fn univariate(k: usize, terms: &[(u32, Vec<f64>)]) -> Self {
        let mut f = Self::new(k, 1);
        for (d, a) in terms {
            f.set(MultiIndex::univariate(*d), a.clone());
        }
        f
    }

    pub fn set(&mut self, alpha: MultiIndex, a: Vec<f64>) {
        assert_eq!(alpha.len(), self.n, "multi-index length");
        assert_eq!(a.len(), self.k, "coefficient length");
        if a.iter().all(|c| *c == 0.0) {
            self.coeffs.remove(&alpha);
        } else {
            self.coeffs.insert(alpha, a);
        }
    }

    pub fn from_spec(spec: &PolySpec, k: usize) -> Result<Self> {
        let mut f = Self::new(k, spec.n);
        for (key, vals) in &spec.coeffs {
            let alpha: MultiIndex = key.parse()?;
            if alpha.len() != spec.n {
                return Err(Error::DimensionMismatch { expected: spec.n, got: alpha.len() });
            }
            if vals.len() != k {
                return Err(Error::DimensionMismatch { expected: k, got: vals.len() });
            }
            let a = vals.iter().map(json_number).collect::<Result<Vec<f64>>>()?;
            f.set(alpha, a);
        }
        Ok(f)
    }

    pub fn from_json(s: &str, k: usize) -> Result<Self> {
        let spec: PolySpec = serde_json::from_str(s)?;
        Self::from_spec(&spec, k)
    }

    pub fn to_spec(&self) -> PolySpec {
        PolySpec {
            n: self.n,
            coeffs: self
                .coeffs
                .iter()
                .map(|(m, a)| (m.to_string(), a.iter().map(|&c| serde_json::json!(c)).collect()))
                .collect(),
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn nvars(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> u32 {
        self.coeffs.keys().map(|m| m.degree()).max().unwrap_or(0)
    }

    pub fn coeffs(&self) -> &BTreeMap<MultiIndex, Vec<f64>> {
        &self.coeffs
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        TracePolynomial {
            k: self.k,
            n: self.n,
            coeffs: self.coeffs.iter().map(|(m, a)| (m.clone(), a.iter().map(|c| c * lambda).collect())).collect(),
        }
    }

    fn check(&self, field: &NumberField) -> Result<()> {
        if field.degree() != self.k {
            return Err(Error::DimensionMismatch { expected: field.degree(), got: self.k });
        }
        Ok(())
    }
}

fn json_number(v: &serde_json::Value) -> Result<f64> {
    match v {
        serde_json::Value::Number(n) => n.as_f64().ok_or_else(|| Error::Parse(format!("bad number {n}"))),
        serde_json::Value::String(s) => match rational::parse_rational(s) {
            Ok(r) => Ok(rational::to_f64(&r)),
            Err(_) => s.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad coefficient `{s}`"))),
        },
        other => Err(Error::Parse(format!("bad coefficient {other}"))),
    }
}

/// `P_{f,σ}`: the polynomial with coefficients `σ**(a_α)`.
pub fn embed_polynomial(field: &NumberField, f: &TracePolynomial, sigma: usize) -> Result<EmbeddedPolynomial> {
    f.check(field)?;
    field.check_embedding(sigma)?;
    let mut p = MPoly::zero(f.n);
    for (m, a) in &f.coeffs {
        p.add_term(m.clone(), field.sigma_star(sigma, a));
    }
    Ok(p)
}

/// `σ⃗(x) = (σ**(x_1), …, σ**(x_n))`.
pub fn sigma_vec(field: &NumberField, sigma: usize, x: &[f64]) -> Vec<Complex64> {
    x.chunks(field.degree()).map(|b| field.sigma_star(sigma, b)).collect()
}

fn check_point(field: &NumberField, f: &TracePolynomial, x: &[f64]) -> Result<()> {
    f.check(field)?;
    if x.len() != f.k * f.n {
        return Err(Error::DimensionMismatch { expected: f.k * f.n, got: x.len() });
    }
    Ok(())
}

/// `φ_f(x) = tr(f(x))`, computed through multiplication in `ℝ ⊗ K`.
pub fn eval_phase(field: &NumberField, f: &TracePolynomial, x: &[f64]) -> f64 {
    let k = field.degree();
    let mut total = vec![0.0; k];
    for (m, a) in &f.coeffs {
        let mut term = a.clone();
        for (l, &e) in m.0.iter().enumerate() {
            let xl = &x[l * k..(l + 1) * k];
            for _ in 0..e {
                term = field.mul(&term, xl);
            }
        }
        for (t, v) in total.iter_mut().zip(&term) {
            *t += v;
        }
    }
    field.trace(&total)
}

/// `φ_f(x) = Σ_σ P_{f,σ}(σ⃗(x))`, computed through the embeddings.
pub fn eval_phase_embedded(field: &NumberField, f: &TracePolynomial, x: &[f64]) -> Result<f64> {
    check_point(field, f, x)?;
    let mut s = Complex64::zero();
    for sigma in 0..field.degree() {
        let p = embed_polynomial(field, f, sigma)?;
        s += p.eval(&sigma_vec(field, sigma, x));
    }
    Ok(s.re)
}

/// `∇φ_f(x)`: block `l` is `Re Σ_σ ∂_l P_{f,σ}(σ⃗(x)) w_σ`.
pub fn grad_phase(field: &NumberField, f: &TracePolynomial, x: &[f64]) -> Result<Vec<f64>> {
    check_point(field, f, x)?;
    let k = field.degree();
    let mut g = vec![0.0; k * f.n];
    for sigma in 0..k {
        let p = embed_polynomial(field, f, sigma)?;
        let grad = p.gradient(&sigma_vec(field, sigma, x));
        let w = field.w(sigma);
        for (l, dl) in grad.iter().enumerate() {
            for (j, wj) in w.iter().enumerate() {
                g[l * k + j] += (dl * wj).re;
            }
        }
    }
    Ok(g)
}

/// The phase expanded as a real polynomial in the `kn` coordinates.
pub fn real_phase(field: &NumberField, f: &TracePolynomial) -> Result<MPoly<f64>> {
    f.check(field)?;
    let k = field.degree();
    let nv = k * f.n;
    let mul = |a: &[MPoly<f64>], b: &[MPoly<f64>]| -> Vec<MPoly<f64>> {
        let mut out = vec![MPoly::zero(nv); k];
        for (i, ai) in a.iter().enumerate() {
            if ai.is_zero() {
                continue;
            }
            for (j, bj) in b.iter().enumerate() {
                if bj.is_zero() {
                    continue;
                }
                let prod = ai.times(bj);
                for (l, o) in out.iter_mut().enumerate() {
                    let c = field.structure_f64(i, j, l);
                    if c != 0.0 {
                        *o = o.plus(&prod.scaled(&c));
                    }
                }
            }
        }
        out
    };
    let vars: Vec<Vec<MPoly<f64>>> = (0..f.n)
        .map(|l| (0..k).map(|j| MPoly::var(nv, l * k + j, 1.0)).collect())
        .collect();
    let mut phase = MPoly::zero(nv);
    let mut cache: BTreeMap<(usize, u32), Vec<MPoly<f64>>> = BTreeMap::new();
    for (m, a) in &f.coeffs {
        let mut term: Vec<MPoly<f64>> = a.iter().map(|&c| MPoly::constant(nv, c)).collect();
        for (l, &e) in m.0.iter().enumerate() {
            if e == 0 {
                continue;
            }
            if !cache.contains_key(&(l, e)) {
                let mut p = vars[l].clone();
                for _ in 1..e {
                    p = mul(&p, &vars[l]);
                }
                cache.insert((l, e), p);
            }
            term = mul(&term, &cache[&(l, e)]);
        }
        for (j, t) in term.iter().enumerate() {
            let tr = field.trace(&unit(k, j));
            if tr != 0.0 {
                phase = phase.plus(&t.scaled(&tr));
            }
        }
    }
    Ok(phase)
}

fn unit(k: usize, j: usize) -> Vec<f64> {
    let mut v = vec![0.0; k];
    v[j] = 1.0;
    v
}

/// Outcome of a two-sided gradient comparison
/// `c · max_σ |P'_σ| ≤ |∇φ| ≤ C · max_σ |P'_σ|`.
#[derive(Clone, Debug, Serialize)]
pub struct ComparabilityReport {
    pub c_lower: f64,
    pub c_upper: f64,
    pub ratio_min: f64,
    pub ratio_max: f64,
    /// `min (|∇φ| - c M)` over the points.
    pub lower_margin: f64,
    /// `min (C M - |∇φ|)` over the points.
    pub upper_margin: f64,
    pub holds: bool,
}

/// Explicit constants for the univariate comparison: `C = k · max_σ |w_σ|`
/// and `c = min_σ |w_σ · v_σ|` with `v_σ` the unit vector of `V_{σ,ℂ}`.
pub fn comparability_constants(field: &NumberField, dec: &Decomposition) -> (f64, f64) {
    let k = field.degree();
    let upper = k as f64
        * (0..k)
            .map(|s| field.w(s).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
    let lower = (0..k)
        .map(|s| {
            field
                .w(s)
                .iter()
                .zip(dec.complex_line(s))
                .map(|(a, b)| a * b)
                .sum::<Complex64>()
                .norm()
        })
        .fold(f64::INFINITY, f64::min);
    (lower, upper)
}

/// Checks `|∇φ_f(x)| ≍ max_σ |P'_{f,σ}(σ**(x))|` at the given points.
pub fn check_gradient_comparability(
    field: &NumberField,
    f: &TracePolynomial,
    points: &[Vec<f64>],
) -> Result<ComparabilityReport> {
    if f.n != 1 {
        return Err(Error::NotUnivariate(f.n));
    }
    f.check(field)?;
    let dec = field.decompose();
    let (c, cu) = comparability_constants(field, &dec);
    let embedded: Vec<EmbeddedPolynomial> =
        (0..field.degree()).map(|s| embed_polynomial(field, f, s)).collect::<Result<_>>()?;
    let mut rep = ComparabilityReport {
        c_lower: c,
        c_upper: cu,
        ratio_min: f64::INFINITY,
        ratio_max: 0.0,
        lower_margin: f64::INFINITY,
        upper_margin: f64::INFINITY,
        holds: true,
    };
    for x in points {
        let g = grad_phase(field, f, x)?.iter().map(|v| v * v).sum::<f64>().sqrt();
        let m = embedded
            .iter()
            .enumerate()
            .map(|(s, p)| p.gradient(&[field.sigma_star(s, x)])[0].norm())
            .fold(0.0, f64::max);
        let noise = 1e-9 * (g + m) + 1e-12;
        if m > 0.0 {
            rep.ratio_min = rep.ratio_min.min(g / m);
            rep.ratio_max = rep.ratio_max.max(g / m);
        }
        rep.lower_margin = rep.lower_margin.min(g - c * m);
        rep.upper_margin = rep.upper_margin.min(cu * m - g);
        if g < c * m - noise || g > cu * m + noise {
            rep.holds = false;
        }
    }
    Ok(rep)
}

/// Coordinates of `(Σ_j q_j ω_j)^l` as exact polynomials in `q_1, …, q_k`:
/// entry `[l-1][j]` is `Q_{l,j}`.
pub fn moment_curve_polynomials(field: &NumberField, n: usize) -> Vec<Vec<MPoly<BigRational>>> {
    let k = field.degree();
    let c = field.structure_constants();
    let q: Vec<MPoly<BigRational>> = (0..k).map(|j| MPoly::var(k, j, BigRational::one())).collect();
    let mut out = Vec::with_capacity(n);
    let mut cur = q.clone();
    for _ in 0..n {
        out.push(cur.clone());
        let mut next = vec![MPoly::zero(k); k];
        for (i, ci) in cur.iter().enumerate() {
            for (j, qj) in q.iter().enumerate() {
                let prod = ci.times(qj);
                for (l, nl) in next.iter_mut().enumerate() {
                    if !c[i][j][l].is_zero() {
                        *nl = nl.plus(&prod.scaled(&c[i][j][l]));
                    }
                }
            }
        }
        cur = next;
    }
    out
}

/// Moment-curve polynomials converted to floating point.
pub fn moment_curve_f64(field: &NumberField, n: usize) -> Vec<Vec<MPoly<f64>>> {
    moment_curve_polynomials(field, n)
        .iter()
        .map(|row| row.iter().map(|p| p.map(rational::to_f64)).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::from_int;

    #[test]
    fn sqrt2_square_phase() {
        let k = NumberField::sqrt2();
        let f = TracePolynomial::monomial(2, 1, 2, vec![1.0, 0.0]);
        assert!((eval_phase(&k, &f, &[1.0, 0.0]) - 2.0).abs() < 1e-14);
        assert!((eval_phase(&k, &f, &[0.0, 1.0]) - 4.0).abs() < 1e-14);
        let g = grad_phase(&k, &f, &[1.0, 0.0]).unwrap();
        assert!((g[0] - 4.0).abs() < 1e-12 && g[1].abs() < 1e-12);
        let rp = real_phase(&k, &f).unwrap();
        assert!((rp.eval(&[0.3, -0.7]) - (2.0 * 0.09 + 4.0 * 0.49)).abs() < 1e-14);
    }

    #[test]
    fn degenerate_component_vanishes() {
        let k = NumberField::sqrt2();
        let f = TracePolynomial::monomial(2, 1, 2, vec![-2f64.sqrt(), 1.0]);
        let p = embed_polynomial(&k, &f, 0).unwrap();
        assert!(p.terms.values().all(|c| c.norm() < 1e-15));
    }

    #[test]
    fn moment_curves() {
        let k = NumberField::sqrt2();
        let q = moment_curve_polynomials(&k, 2);
        let e = |a: u32, b: u32| MultiIndex::new(vec![a, b]);
        assert_eq!(q[1][0].terms.get(&e(2, 0)), Some(&from_int(1)));
        assert_eq!(q[1][0].terms.get(&e(0, 2)), Some(&from_int(2)));
        assert_eq!(q[1][1].terms.get(&e(1, 1)), Some(&from_int(2)));
        assert_eq!(q[1][0].terms.len(), 2);
        let g = moment_curve_polynomials(&NumberField::gaussian(), 2);
        assert_eq!(g[1][0].terms.get(&e(0, 2)), Some(&from_int(-1)));
    }

    #[test]
    fn comparability_rejects_bivariate() {
        let k = NumberField::sqrt2();
        let f = TracePolynomial::monomial(2, 2, 2, vec![1.0, 0.0]);
        assert_eq!(check_gradient_comparability(&k, &f, &[]).unwrap_err(), Error::NotUnivariate(2));
    }

    #[test]
    fn spec_json() {
        let f = TracePolynomial::from_json(r#"{"n":1,"coeffs":{"(2)":["0","1"], "(1)":[0.5, "1/4"]}}"#, 2).unwrap();
        assert_eq!(f.coeffs()[&MultiIndex::univariate(1)], vec![0.5, 0.25]);
        let back = TracePolynomial::from_spec(&f.to_spec(), 2).unwrap();
        assert_eq!(back, f);
        assert!(TracePolynomial::from_json(r#"{"n":1,"coeffs":{"(2)":["0"]}}"#, 2).is_err());
    }
}
