//! Number fields `K = ℚ[t]/(m)` with a chosen ℚ-basis, their embeddings and
//! the real decomposition of `ℝ^k` attached to the embedding classes.
//!
//! ```
//! use tracephase::numberfield::NumberField;
//!
//! let k = NumberField::from_strs(&["-2", "0", "1"], None).unwrap();
//! assert_eq!(k.degree(), 2);
//! assert_eq!(k.signature(), (2, 0));
//! // σ1(1 + √2 · 1) with σ1 the positive root
//! let z = k.sigma_star(0, &[1.0, 1.0]);
//! assert!((z.re - (1.0 + 2f64.sqrt())).abs() < 1e-12);
//! ```

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{self, to_f64};
use crate::roots;

/// JSON description of a field: minimal polynomial (constant term first) and
/// an optional basis, one row per basis element in power-basis coordinates.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct FieldSpec {
    pub minpoly: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<Vec<Vec<String>>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EmbeddingKind {
    Real,
    /// Complex embedding; `conjugate` is the index of its conjugate.
    Complex { conjugate: usize },
}

#[derive(Clone, Debug)]
pub struct NumberField {
    k: usize,
    minpoly: Vec<BigRational>,
    basis: Vec<Vec<BigRational>>,
    structure: Vec<Vec<Vec<BigRational>>>,
    structure_f: Vec<f64>,
    traces: Vec<BigRational>,
    traces_f: Vec<f64>,
    roots: Vec<Complex64>,
    kinds: Vec<EmbeddingKind>,
    w: Vec<Vec<Complex64>>,
    classes: Vec<Vec<usize>>,
    has_rational_root: bool,
}

impl NumberField {
    pub fn from_spec(spec: &FieldSpec) -> Result<Self> {
        let m = spec
            .minpoly
            .iter()
            .map(|s| rational::parse_rational(s))
            .collect::<Result<Vec<_>>>()?;
        let b = match &spec.basis {
            None => None,
            Some(rows) => Some(
                rows.iter()
                    .map(|r| r.iter().map(|s| rational::parse_rational(s)).collect::<Result<Vec<_>>>())
                    .collect::<Result<Vec<_>>>()?,
            ),
        };
        Self::new(m, b)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let spec: FieldSpec = serde_json::from_str(s)?;
        Self::from_spec(&spec)
    }

    pub fn from_strs(minpoly: &[&str], basis: Option<&[&[&str]]>) -> Result<Self> {
        Self::from_spec(&FieldSpec {
            minpoly: minpoly.iter().map(|s| s.to_string()).collect(),
            basis: basis.map(|rows| rows.iter().map(|r| r.iter().map(|s| s.to_string()).collect()).collect()),
        })
    }

    /// `ℚ` itself, as `ℚ[t]/(t)`.
    pub fn rationals() -> Self {
        Self::from_strs(&["0", "1"], None).expect("valid field")
    }

    /// `ℚ(√2)` with basis `{1, √2}`.
    pub fn sqrt2() -> Self {
        Self::from_strs(&["-2", "0", "1"], None).expect("valid field")
    }

    /// `ℚ(i)` with basis `{1, i}`.
    pub fn gaussian() -> Self {
        Self::from_strs(&["1", "0", "1"], None).expect("valid field")
    }

    /// `ℚ(2^{1/3})` with the power basis.
    pub fn cube_root2() -> Self {
        Self::from_strs(&["-2", "0", "0", "1"], None).expect("valid field")
    }

    pub fn new(minpoly: Vec<BigRational>, basis: Option<Vec<Vec<BigRational>>>) -> Result<Self> {
        let mut m = minpoly;
        rational::poly_trim(&mut m);
        if m.is_empty() {
            return Err(Error::EmptyPolynomial);
        }
        let k = m.len() - 1;
        if k == 0 {
            return Err(Error::EmptyPolynomial);
        }
        if !m[k].is_one() {
            return Err(Error::NonMonic(m[k].to_string()));
        }
        let g = rational::poly_gcd(&m, &rational::poly_derivative(&m));
        if g.len() > 1 {
            return Err(Error::RepeatedRoots(g.len() - 1));
        }
        let basis = match basis {
            None => (0..k)
                .map(|i| (0..k).map(|j| if i == j { BigRational::one() } else { BigRational::zero() }).collect())
                .collect::<Vec<Vec<_>>>(),
            Some(b) => {
                if b.len() != k || b.iter().any(|r| r.len() != k) {
                    return Err(Error::DimensionMismatch { expected: k, got: b.len() });
                }
                b
            }
        };
        let binv = rational::invert(&basis).ok_or(Error::SingularBasis)?;

        // θ^a reduced modulo m, for a < 2k - 1.
        let mut powers: Vec<Vec<BigRational>> = Vec::with_capacity(2 * k);
        let mut cur: Vec<BigRational> = vec![BigRational::zero(); k];
        cur[0] = BigRational::one();
        for _ in 0..(2 * k).max(2) {
            powers.push(cur.clone());
            let mut next = vec![BigRational::zero(); k];
            for j in 0..k - 1 {
                next[j + 1] = cur[j].clone();
            }
            let top = cur[k - 1].clone();
            for j in 0..k {
                next[j] = &next[j] - &top * &m[j];
            }
            cur = next;
        }
        let mul_power = |a: &[BigRational], b: &[BigRational]| -> Vec<BigRational> {
            let mut out = vec![BigRational::zero(); k];
            for (i, ai) in a.iter().enumerate() {
                if ai.is_zero() {
                    continue;
                }
                for (j, bj) in b.iter().enumerate() {
                    if bj.is_zero() {
                        continue;
                    }
                    let c = ai * bj;
                    for (l, p) in powers[i + j].iter().enumerate() {
                        if !p.is_zero() {
                            out[l] = &out[l] + &c * p;
                        }
                    }
                }
            }
            out
        };
        // power-basis vector p → B-coordinates c with Σ c_l basis[l] = p, i.e. c = p · B^{-1}
        let to_b = |p: &[BigRational]| -> Vec<BigRational> {
            (0..k)
                .map(|l| {
                    let mut s = BigRational::zero();
                    for (j, pj) in p.iter().enumerate() {
                        if !pj.is_zero() {
                            s += pj * &binv[j][l];
                        }
                    }
                    s
                })
                .collect()
        };
        let mut structure = vec![vec![vec![BigRational::zero(); k]; k]; k];
        for i in 0..k {
            for j in i..k {
                let c = to_b(&mul_power(&basis[i], &basis[j]));
                structure[i][j] = c.clone();
                structure[j][i] = c;
            }
        }
        let traces: Vec<BigRational> = (0..k)
            .map(|l| (0..k).fold(BigRational::zero(), |s, j| s + &structure[l][j][j]))
            .collect();
        let mut structure_f = vec![0.0; k * k * k];
        for i in 0..k {
            for j in 0..k {
                for l in 0..k {
                    structure_f[(i * k + j) * k + l] = to_f64(&structure[i][j][l]);
                }
            }
        }
        let traces_f = traces.iter().map(to_f64).collect();

        let (roots, kinds) = embed_roots(&m)?;
        let basis_f: Vec<Vec<f64>> = basis.iter().map(|r| r.iter().map(to_f64).collect()).collect();
        let w: Vec<Vec<Complex64>> = roots
            .iter()
            .zip(&kinds)
            .map(|(&r, kind)| {
                basis_f
                    .iter()
                    .map(|row| {
                        let v = row.iter().rev().fold(Complex64::zero(), |acc, &c| acc * r + c);
                        if *kind == EmbeddingKind::Real {
                            Complex64::new(v.re, 0.0)
                        } else {
                            v
                        }
                    })
                    .collect()
            })
            .collect();
        let mut classes = Vec::new();
        for (i, kind) in kinds.iter().enumerate() {
            match kind {
                EmbeddingKind::Real => classes.push(vec![i]),
                EmbeddingKind::Complex { conjugate } if *conjugate > i => classes.push(vec![i, *conjugate]),
                _ => {}
            }
        }
        let has_rational_root = roots.iter().zip(&kinds).any(|(r, kind)| {
            *kind == EmbeddingKind::Real && rational::small_rational_near(r.re, 1000, 1e-10).is_some()
        });
        if has_rational_root && k > 1 {
            log::warn!("minimal polynomial has a rational root; it is not irreducible");
        }

        let field = NumberField {
            k,
            minpoly: m,
            basis,
            structure,
            structure_f,
            traces,
            traces_f,
            roots,
            kinds,
            w,
            classes,
            has_rational_root,
        };
        let d = field.discriminant();
        let scale: f64 = field
            .w
            .iter()
            .map(|row| row.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
            .product();
        if !(d.norm() > 1e-10 * scale) {
            return Err(Error::DegenerateBasis(d.norm()));
        }
        Ok(field)
    }

    pub fn degree(&self) -> usize {
        self.k
    }

    /// `(k1, k2)`: numbers of real embeddings and of conjugate pairs.
    pub fn signature(&self) -> (usize, usize) {
        let k1 = self.kinds.iter().filter(|k| **k == EmbeddingKind::Real).count();
        (k1, (self.k - k1) / 2)
    }

    pub fn is_totally_real(&self) -> bool {
        self.signature().1 == 0
    }

    /// Embedding classes `σ̃` (a real embedding, or a conjugate pair).
    pub fn classes(&self) -> &[Vec<usize>] {
        &self.classes
    }

    pub fn class_of(&self, sigma: usize) -> usize {
        self.classes.iter().position(|c| c.contains(&sigma)).expect("embedding index in range")
    }

    pub fn kind(&self, sigma: usize) -> EmbeddingKind {
        self.kinds[sigma]
    }

    pub fn conjugate(&self, sigma: usize) -> usize {
        match self.kinds[sigma] {
            EmbeddingKind::Real => sigma,
            EmbeddingKind::Complex { conjugate } => conjugate,
        }
    }

    /// `σ(θ)` for every embedding, real roots first in decreasing order,
    /// then conjugate pairs with the upper-half-plane member first.
    pub fn roots(&self) -> &[Complex64] {
        &self.roots
    }

    pub fn minpoly(&self) -> &[BigRational] {
        &self.minpoly
    }

    pub fn basis(&self) -> &[Vec<BigRational>] {
        &self.basis
    }

    pub fn has_rational_root(&self) -> bool {
        self.has_rational_root
    }

    /// `w_σ = (σ(ω_1), …, σ(ω_k))`.
    pub fn w(&self, sigma: usize) -> &[Complex64] {
        &self.w[sigma]
    }

    pub fn check_embedding(&self, sigma: usize) -> Result<()> {
        if sigma < self.k {
            Ok(())
        } else {
            Err(Error::BadEmbedding(sigma))
        }
    }

    /// `σ**(x) = Σ_j x_j σ(ω_j)`.
    pub fn sigma_star(&self, sigma: usize, x: &[f64]) -> Complex64 {
        x.iter().zip(&self.w[sigma]).map(|(&xi, &wi)| wi * xi).sum()
    }

    /// Structure constants: `ω_i ω_j = Σ_l c[i][j][l] ω_l`.
    pub fn structure_constants(&self) -> &[Vec<Vec<BigRational>>] {
        &self.structure
    }

    #[inline]
    pub fn structure_f64(&self, i: usize, j: usize, l: usize) -> f64 {
        self.structure_f[(i * self.k + j) * self.k + l]
    }

    /// `tr(ω_l)` for each basis element.
    pub fn basis_traces(&self) -> &[BigRational] {
        &self.traces
    }

    /// `A_{K,B}(q)`: column `j` holds the coordinates of `q·ω_j`.
    pub fn mult_matrix(&self, q: &[BigRational]) -> Vec<Vec<BigRational>> {
        let k = self.k;
        let mut a = vec![vec![BigRational::zero(); k]; k];
        for (i, qi) in q.iter().enumerate() {
            if qi.is_zero() {
                continue;
            }
            for j in 0..k {
                for l in 0..k {
                    if !self.structure[i][j][l].is_zero() {
                        a[l][j] = &a[l][j] + qi * &self.structure[i][j][l];
                    }
                }
            }
        }
        a
    }

    pub fn mult_matrix_f64(&self, q: &[f64]) -> Vec<Vec<f64>> {
        let k = self.k;
        let mut a = vec![vec![0.0; k]; k];
        for (i, &qi) in q.iter().enumerate() {
            for j in 0..k {
                for l in 0..k {
                    a[l][j] += qi * self.structure_f64(i, j, l);
                }
            }
        }
        a
    }

    /// Product in `ℝ ⊗ K` in B-coordinates.
    pub fn mul(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let k = self.k;
        let mut out = vec![0.0; k];
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (j, &yj) in y.iter().enumerate() {
                let c = xi * yj;
                if c == 0.0 {
                    continue;
                }
                for (l, o) in out.iter_mut().enumerate() {
                    *o += c * self.structure_f64(i, j, l);
                }
            }
        }
        out
    }

    pub fn one(&self) -> Vec<f64> {
        // coordinates of 1 = θ^0 in the chosen basis
        let binv = rational::invert(&self.basis).expect("basis invertible");
        binv[0].iter().map(to_f64).collect()
    }

    /// Trace `tr(A(x))`.
    pub fn trace(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.traces_f).map(|(a, b)| a * b).sum()
    }

    /// `T_ij = tr(ω_i ω_j)`, exactly.
    pub fn trace_form(&self) -> Vec<Vec<BigRational>> {
        let k = self.k;
        (0..k)
            .map(|i| {
                (0..k)
                    .map(|j| {
                        (0..k).fold(BigRational::zero(), |s, l| s + &self.structure[i][j][l] * &self.traces[l])
                    })
                    .collect()
            })
            .collect()
    }

    pub fn trace_form_f64(&self) -> DMatrix<f64> {
        let t = self.trace_form();
        DMatrix::from_fn(self.k, self.k, |i, j| to_f64(&t[i][j]))
    }

    /// `det(σ_i(ω_j))` with rows indexed by embeddings.
    pub fn discriminant(&self) -> Complex64 {
        self.embedding_matrix().determinant()
    }

    /// Matrix `W` with `W[σ][j] = σ(ω_j)`.
    pub fn embedding_matrix(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.k, self.k, |s, j| self.w[s][j])
    }

    /// Real decomposition `ℝ^k = ⊕ V_{σ̃,ℝ}` and the complex lines `V_{σ,ℂ}`.
    pub fn decompose(&self) -> Decomposition {
        Decomposition::new(self)
    }
}

fn embed_roots(m: &[BigRational]) -> Result<(Vec<Complex64>, Vec<EmbeddingKind>)> {
    let k = m.len() - 1;
    let c: Vec<Complex64> = m.iter().map(|r| Complex64::new(to_f64(r), 0.0)).collect();
    let raw = roots::roots(&c)?;
    for r in &raw {
        let res = roots::horner(&c, *r).norm();
        let scale: f64 = c.iter().map(|a| a.norm()).sum::<f64>().max(1.0);
        if res > 1e-12 * scale * (1.0 + r.norm()).powi(k as i32) {
            return Err(Error::IllConditioned(format!("root {r} has residual {res:e}")));
        }
    }
    for i in 0..raw.len() {
        for j in 0..i {
            if (raw[i] - raw[j]).norm() < 1e-8 {
                return Err(Error::IllConditioned(format!("roots {} and {} nearly coincide", raw[i], raw[j])));
            }
        }
    }
    let mut reals = Vec::new();
    let mut upper = Vec::new();
    let mut lower = Vec::new();
    for r in raw {
        if r.im.abs() <= 1e-10 * (1.0 + r.norm()) {
            reals.push(r.re);
        } else if r.im > 0.0 {
            upper.push(r);
        } else {
            lower.push(r);
        }
    }
    if upper.len() != lower.len() {
        return Err(Error::IllConditioned("complex roots do not pair up".into()));
    }
    for u in &upper {
        let near = lower.iter().map(|l| (l - u.conj()).norm()).fold(f64::INFINITY, f64::min);
        if near > 1e-8 * (1.0 + u.norm()) {
            return Err(Error::IllConditioned(format!("root {u} has no conjugate partner")));
        }
    }
    reals.sort_by(|a, b| b.total_cmp(a));
    upper.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    let mut out = Vec::with_capacity(k);
    let mut kinds = Vec::with_capacity(k);
    for r in reals {
        out.push(Complex64::new(r, 0.0));
        kinds.push(EmbeddingKind::Real);
    }
    for u in upper {
        let i = out.len();
        out.push(u);
        out.push(u.conj());
        kinds.push(EmbeddingKind::Complex { conjugate: i + 1 });
        kinds.push(EmbeddingKind::Complex { conjugate: i });
    }
    Ok((out, kinds))
}

/// Orthonormal bases of the subspaces `V_{σ̃,ℝ}` and unit vectors spanning
/// the complex lines `V_{σ,ℂ}`.
///
/// `V_{σ̃,ℝ}` is the set of real vectors annihilated (under the bilinear dot
/// product) by every `w_σ'` with `σ'` outside the class `σ̃`. Bases are
/// orthonormal with the first nonzero coordinate of each vector positive.
#[derive(Clone, Debug)]
pub struct Decomposition {
    k: usize,
    classes: Vec<Vec<usize>>,
    real_bases: Vec<Vec<Vec<f64>>>,
    complex_lines: Vec<Vec<Complex64>>,
    coords: DMatrix<f64>,
    offsets: Vec<usize>,
}

impl Decomposition {
    fn new(field: &NumberField) -> Self {
        let k = field.degree();
        let classes = field.classes().to_vec();
        let mut real_bases = Vec::with_capacity(classes.len());
        for (ci, cls) in classes.iter().enumerate() {
            let mut others: Vec<Vec<f64>> = Vec::new();
            for (cj, other) in classes.iter().enumerate() {
                if cj == ci {
                    continue;
                }
                let w = field.w(other[0]);
                others.push(w.iter().map(|z| z.re).collect());
                if other.len() == 2 {
                    others.push(w.iter().map(|z| z.im).collect());
                }
            }
            real_bases.push(complement(k, &others, cls.len()));
        }
        let wm = field.embedding_matrix();
        let winv = wm.try_inverse().expect("embedding matrix invertible");
        let complex_lines = (0..k)
            .map(|s| {
                let col: Vec<Complex64> = (0..k).map(|j| winv[(j, s)]).collect();
                let norm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                let lead = col.iter().find(|z| z.norm() > 1e-12 * norm).copied().unwrap_or(Complex64::new(1.0, 0.0));
                let phase = lead.conj() / lead.norm();
                col.iter().map(|z| z * phase / norm).collect()
            })
            .collect();
        let mut all = DMatrix::<f64>::zeros(k, k);
        let mut offsets = Vec::new();
        let mut col = 0;
        for b in &real_bases {
            offsets.push(col);
            for v in b {
                for (r, x) in v.iter().enumerate() {
                    all[(r, col)] = *x;
                }
                col += 1;
            }
        }
        let coords = all.try_inverse().expect("subspaces span ℝ^k");
        Decomposition { k, classes, real_bases, complex_lines, coords, offsets }
    }

    pub fn classes(&self) -> &[Vec<usize>] {
        &self.classes
    }

    /// Orthonormal basis of `V_{σ̃,ℝ}` for class index `c`.
    pub fn real_basis(&self, c: usize) -> &[Vec<f64>] {
        &self.real_bases[c]
    }

    /// Unit vector spanning `V_{σ,ℂ}`.
    pub fn complex_line(&self, sigma: usize) -> &[Complex64] {
        &self.complex_lines[sigma]
    }

    /// Coordinates of `y ∈ ℝ^k` in the concatenated class bases.
    pub fn coordinates(&self, y: &[f64]) -> Vec<f64> {
        let v = self.coords.clone() * DVector::from_column_slice(y);
        v.iter().copied().collect()
    }

    /// Norm of the `V_{σ̃,ℝ}` component of each block of `y ∈ ℝ^{kn}`,
    /// combined over blocks: one entry per class.
    pub fn component_norms(&self, y: &[f64]) -> Vec<f64> {
        let mut acc = vec![0.0; self.classes.len()];
        for block in y.chunks(self.k) {
            let c = self.coordinates(block);
            for (ci, b) in self.real_bases.iter().enumerate() {
                let o = self.offsets[ci];
                for j in 0..b.len() {
                    acc[ci] += c[o + j] * c[o + j];
                }
            }
        }
        acc.iter().map(|s| s.sqrt()).collect()
    }

    /// The `V_{σ̃,ℝ}` component of `y ∈ ℝ^k`.
    pub fn project(&self, c: usize, y: &[f64]) -> Vec<f64> {
        let co = self.coordinates(y);
        let mut out = vec![0.0; self.k];
        for (j, v) in self.real_bases[c].iter().enumerate() {
            let a = co[self.offsets[c] + j];
            for (o, vi) in out.iter_mut().zip(v) {
                *o += a * vi;
            }
        }
        out
    }
}

/// Orthonormal basis (size `dim`) of the orthogonal complement of `span(rows)`.
fn complement(k: usize, rows: &[Vec<f64>], dim: usize) -> Vec<Vec<f64>> {
    let mut q: Vec<Vec<f64>> = Vec::new();
    for r in rows {
        let mut v = r.clone();
        for _ in 0..2 {
            for u in &q {
                let d: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                for (vi, ui) in v.iter_mut().zip(u) {
                    *vi -= d * ui;
                }
            }
        }
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n > 1e-12 {
            q.push(v.iter().map(|a| a / n).collect());
        }
    }
    let mut out = Vec::new();
    for _ in 0..dim {
        let mut best: Option<(f64, Vec<f64>)> = None;
        for i in 0..k {
            let mut v = vec![0.0; k];
            v[i] = 1.0;
            for _ in 0..2 {
                for u in q.iter().chain(out.iter()) {
                    let d: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                    for (vi, ui) in v.iter_mut().zip(u) {
                        *vi -= d * ui;
                    }
                }
            }
            let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if best.as_ref().is_none_or(|(bn, _)| n > *bn + 1e-12) {
                best = Some((n, v));
            }
        }
        let (n, v) = best.expect("k > 0");
        let mut v: Vec<f64> = v.iter().map(|a| a / n).collect();
        if let Some(first) = v.iter().find(|a| a.abs() > 1e-12).copied() {
            if first < 0.0 {
                v.iter_mut().for_each(|a| *a = -*a);
            }
        }
        out.push(v);
    }
    out
}

/// A unit direction in `V^n_{σ̃0,ℝ}` along which `Re(x · σ⃗0)` is bounded below.
#[derive(Clone, Debug)]
pub struct RealPartDirection {
    /// The direction, of length `kn`.
    pub z: Vec<f64>,
    /// `|Re(x · σ⃗0(z))| / |x|`.
    pub c: f64,
}

/// For a complex embedding `σ0` and `x ∈ ℂ^n`, picks per component the
/// `V_{σ̃0,ℝ}` basis vector maximising `|Re(x_l σ0(v))|`, signs and weights
/// the choices so that the contributions add up, and returns the normalised
/// direction together with the constant it achieves.
pub fn realpart_direction(field: &NumberField, sigma0: usize, x: &[Complex64]) -> Result<RealPartDirection> {
    field.check_embedding(sigma0)?;
    if field.kind(sigma0) == EmbeddingKind::Real {
        return Err(Error::RealEmbedding(sigma0));
    }
    let xnorm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if xnorm == 0.0 {
        return Err(Error::ZeroVector);
    }
    let k = field.degree();
    let dec = field.decompose();
    let basis = dec.real_basis(field.class_of(sigma0));
    let images: Vec<Complex64> = basis.iter().map(|v| field.sigma_star(sigma0, v)).collect();
    let mut z = vec![0.0; k * x.len()];
    for (l, &xl) in x.iter().enumerate() {
        if xl.norm() == 0.0 {
            continue;
        }
        let mut best = 0;
        let mut best_val = -1.0;
        for (i, img) in images.iter().enumerate() {
            let v = (xl * img).re.abs();
            if v > best_val + 1e-15 {
                best = i;
                best_val = v;
            }
        }
        let sign = if (xl * images[best]).re < 0.0 { -1.0 } else { 1.0 };
        let weight = sign * xl.norm() / xnorm;
        for (j, vj) in basis[best].iter().enumerate() {
            z[l * k + j] = weight * vj;
        }
    }
    let re: f64 = x
        .iter()
        .enumerate()
        .map(|(l, &xl)| (xl * field.sigma_star(sigma0, &z[l * k..(l + 1) * k])).re)
        .sum();
    Ok(RealPartDirection { z, c: re.abs() / xnorm })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::from_int;

    fn q(v: &[i64]) -> Vec<BigRational> {
        v.iter().map(|&a| from_int(a)).collect()
    }

    #[test]
    fn sqrt2_structure() {
        let k = NumberField::sqrt2();
        let a = k.mult_matrix(&q(&[3, 5]));
        assert_eq!(a, vec![q(&[3, 10]), q(&[5, 3])]);
        assert_eq!(k.trace_form(), vec![q(&[2, 0]), q(&[0, 4])]);
        assert!((k.roots()[0].re - 2f64.sqrt()).abs() < 1e-15);
        assert!((k.roots()[1].re + 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn gaussian_structure() {
        let k = NumberField::gaussian();
        assert_eq!(k.mult_matrix(&q(&[0, 1])), vec![q(&[0, -1]), q(&[1, 0])]);
        assert_eq!(k.trace_form(), vec![q(&[2, 0]), q(&[0, -2])]);
        assert_eq!(k.signature(), (0, 1));
        let z = k.sigma_star(0, &[3.0, 4.0]);
        assert!((z - Complex64::new(3.0, 4.0)).norm() < 1e-15);
        assert_eq!(k.conjugate(0), 1);
    }

    #[test]
    fn rationals_trivial() {
        let k = NumberField::rationals();
        assert_eq!(k.trace_form(), vec![q(&[1])]);
        assert_eq!(k.mult_matrix(&q(&[7])), vec![q(&[7])]);
    }

    #[test]
    fn cube_root_two() {
        let k = NumberField::cube_root2();
        assert_eq!(k.signature(), (1, 1));
        assert!((k.roots()[0].re - 1.259_921_049_894_873).abs() < 1e-14);
    }

    #[test]
    fn invalid_polynomials() {
        assert_eq!(NumberField::from_strs(&["-2", "0", "2"], None).unwrap_err(), Error::NonMonic("2".into()));
        assert_eq!(NumberField::from_strs(&["1", "-2", "1"], None).unwrap_err(), Error::RepeatedRoots(1));
        assert_eq!(NumberField::from_strs(&["0"], None).unwrap_err(), Error::EmptyPolynomial);
        assert_eq!(NumberField::from_strs(&["1", "1"], Some(&[&["0"]])).unwrap_err(), Error::SingularBasis);
    }

    #[test]
    fn nonstandard_basis() {
        // B = {1, 1 + √2}
        let k = NumberField::from_strs(&["-2", "0", "1"], Some(&[&["1", "0"], &["1", "1"]])).unwrap();
        // (1+√2)^2 = 3 + 2√2 = 1·1 + 2·(1+√2)
        assert_eq!(k.structure_constants()[1][1], q(&[1, 2]));
        assert_eq!(k.one(), vec![1.0, 0.0]);
    }

    #[test]
    fn sqrt2_decomposition() {
        let k = NumberField::sqrt2();
        let d = k.decompose();
        let v = &d.real_basis(0)[0];
        let s = 3f64.sqrt();
        assert!((v[0] - 2f64.sqrt() / s).abs() < 1e-14 && (v[1] - 1.0 / s).abs() < 1e-14);
        // V of σ̃1 is invisible to σ2
        assert!(k.sigma_star(1, v).norm() < 1e-14);
    }

    #[test]
    fn realpart_on_gaussian() {
        let k = NumberField::gaussian();
        let r = realpart_direction(&k, 0, &[Complex64::new(1.0, 0.0)]).unwrap();
        assert!((r.z[0] - 1.0).abs() < 1e-14 && r.z[1].abs() < 1e-14);
        assert!((r.c - 1.0).abs() < 1e-14);
        let r = realpart_direction(&k, 0, &[Complex64::new(0.0, 1.0)]).unwrap();
        assert!(r.z[0].abs() < 1e-14 && (r.c - 1.0).abs() < 1e-14);
        assert!(matches!(realpart_direction(&NumberField::sqrt2(), 0, &[Complex64::new(1.0, 0.0)]), Err(Error::RealEmbedding(0))));
        assert!(matches!(realpart_direction(&k, 0, &[Complex64::new(0.0, 0.0)]), Err(Error::ZeroVector)));
    }
}
