//! Sparse multivariate polynomials keyed by [`MultiIndex`].

use std::collections::BTreeMap;
use std::ops::{Add, Mul};

use num_complex::Complex64;
use num_traits::Zero;

use crate::multiindex::MultiIndex;

#[derive(Clone, Debug, PartialEq)]
pub struct MPoly<T> {
    pub nvars: usize,
    pub terms: BTreeMap<MultiIndex, T>,
}

impl<T> MPoly<T>
where
    T: Clone + Zero + Add<Output = T> + Mul<Output = T>,
{
    pub fn zero(nvars: usize) -> Self {
        MPoly { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: T) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(MultiIndex::zero(nvars), c);
        p
    }

    /// The coordinate function `x_i` scaled by `c`.
    pub fn var(nvars: usize, i: usize, c: T) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(MultiIndex::unit(nvars, i), c);
        p
    }

    pub fn add_term(&mut self, m: MultiIndex, c: T) {
        if c.is_zero() {
            return;
        }
        let e = self.terms.entry(m.clone()).or_insert_with(T::zero);
        *e = e.clone() + c;
        if e.is_zero() {
            self.terms.remove(&m);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|m| m.degree()).max().unwrap_or(0)
    }

    pub fn plus(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn times(&self, other: &Self) -> Self {
        let mut out = Self::zero(self.nvars);
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                out.add_term(a.add(b), ca.clone() * cb.clone());
            }
        }
        out
    }

    pub fn scaled(&self, c: &T) -> Self {
        let mut out = Self::zero(self.nvars);
        for (m, v) in &self.terms {
            out.add_term(m.clone(), c.clone() * v.clone());
        }
        out
    }

    pub fn map<U, F>(&self, f: F) -> MPoly<U>
    where
        U: Clone + Zero + Add<Output = U> + Mul<Output = U>,
        F: Fn(&T) -> U,
    {
        let mut out = MPoly::zero(self.nvars);
        for (m, c) in &self.terms {
            out.add_term(m.clone(), f(c));
        }
        out
    }
}

impl MPoly<f64> {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(m, c)| c * m.0.iter().zip(x).map(|(&a, &xi)| xi.powi(a as i32)).product::<f64>())
            .sum()
    }

    /// Partial derivative in variable `i`.
    pub fn partial(&self, i: usize) -> MPoly<f64> {
        let mut out = MPoly::zero(self.nvars);
        for (m, c) in &self.terms {
            if m.0[i] > 0 {
                let mut d = m.clone();
                d.0[i] -= 1;
                out.add_term(d, c * f64::from(m.0[i]));
            }
        }
        out
    }
}

impl MPoly<Complex64> {
    pub fn eval(&self, z: &[Complex64]) -> Complex64 {
        self.terms
            .iter()
            .map(|(m, c)| {
                c * m
                    .0
                    .iter()
                    .zip(z)
                    .map(|(&a, &zi)| zi.powu(a))
                    .product::<Complex64>()
            })
            .sum()
    }

    /// Taylor coefficients `(1/β!) ∂^β P(z)` for every `β` with
    /// `lo ≤ |β| ≤ deg P`, returned in graded order.
    pub fn taylor(&self, z: &[Complex64], lo: u32) -> Vec<(MultiIndex, Complex64)> {
        let d = self.degree();
        let betas = MultiIndex::up_to(self.nvars, lo, d.max(lo));
        let deg = d as usize;
        let pows: Vec<Vec<Complex64>> = z
            .iter()
            .map(|&zi| {
                let mut p = vec![Complex64::new(1.0, 0.0); deg + 1];
                for j in 1..=deg {
                    p[j] = p[j - 1] * zi;
                }
                p
            })
            .collect();
        betas
            .into_iter()
            .filter(|b| b.degree() <= d)
            .map(|b| {
                let mut s = Complex64::zero();
                for (a, c) in &self.terms {
                    if b.le(a) {
                        let mut t = *c * a.binomial(&b);
                        for (i, (&ai, &bi)) in a.0.iter().zip(&b.0).enumerate() {
                            t *= pows[i][(ai - bi) as usize];
                        }
                        s += t;
                    }
                }
                (b, s)
            })
            .collect()
    }

    /// Complex gradient `(∂_1 P, …, ∂_n P)(z)`.
    pub fn gradient(&self, z: &[Complex64]) -> Vec<Complex64> {
        (0..self.nvars)
            .map(|i| {
                let mut s = Complex64::zero();
                for (m, c) in &self.terms {
                    if m.0[i] > 0 {
                        let mut t = *c * f64::from(m.0[i]);
                        for (j, (&a, &zj)) in m.0.iter().zip(z).enumerate() {
                            let e = if j == i { a - 1 } else { a };
                            t *= zj.powu(e);
                        }
                        s += t;
                    }
                }
                s
            })
            .collect()
    }

    /// `∂^β P(z)` (without the `1/β!` factor).
    pub fn derivative_at(&self, beta: &MultiIndex, z: &[Complex64]) -> Complex64 {
        let mut s = Complex64::zero();
        for (a, c) in &self.terms {
            if beta.le(a) {
                let falling: f64 = a
                    .0
                    .iter()
                    .zip(&beta.0)
                    .map(|(&ai, &bi)| ((ai - bi + 1)..=ai).map(f64::from).product::<f64>())
                    .product();
                let mut t = *c * falling;
                for (i, (&ai, &bi)) in a.0.iter().zip(&beta.0).enumerate() {
                    t *= z[i].powu(ai - bi);
                }
                s += t;
            }
        }
        s
    }
}

/// A real polynomial flattened for fast repeated evaluation.
#[derive(Clone, Debug)]
pub struct CompiledPoly {
    nvars: usize,
    maxdeg: usize,
    exps: Vec<u32>,
    coeffs: Vec<f64>,
    grad: Vec<CompiledPartial>,
}

#[derive(Clone, Debug)]
struct CompiledPartial {
    exps: Vec<u32>,
    coeffs: Vec<f64>,
}

impl CompiledPoly {
    pub fn new(p: &MPoly<f64>) -> Self {
        let flat = |q: &MPoly<f64>| {
            let mut exps = Vec::new();
            let mut coeffs = Vec::new();
            for (m, c) in &q.terms {
                exps.extend_from_slice(&m.0);
                coeffs.push(*c);
            }
            (exps, coeffs)
        };
        let (exps, coeffs) = flat(p);
        let grad = (0..p.nvars)
            .map(|i| {
                let (exps, coeffs) = flat(&p.partial(i));
                CompiledPartial { exps, coeffs }
            })
            .collect();
        CompiledPoly { nvars: p.nvars, maxdeg: p.degree() as usize, exps, coeffs, grad }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    fn powers(&self, x: &[f64], buf: &mut [f64]) {
        let w = self.maxdeg + 1;
        for (i, &xi) in x.iter().enumerate() {
            let row = &mut buf[i * w..(i + 1) * w];
            row[0] = 1.0;
            for j in 1..w {
                row[j] = row[j - 1] * xi;
            }
        }
    }

    fn sum(exps: &[u32], coeffs: &[f64], n: usize, w: usize, pw: &[f64]) -> f64 {
        let mut s = 0.0;
        for (t, c) in coeffs.iter().enumerate() {
            let mut v = *c;
            for i in 0..n {
                v *= pw[i * w + exps[t * n + i] as usize];
            }
            s += v;
        }
        s
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let w = self.maxdeg + 1;
        let mut buf = [0.0f64; 64];
        let mut heap;
        let pw: &mut [f64] = if self.nvars * w <= 64 {
            &mut buf[..self.nvars * w]
        } else {
            heap = vec![0.0; self.nvars * w];
            &mut heap
        };
        self.powers(x, pw);
        Self::sum(&self.exps, &self.coeffs, self.nvars, w, pw)
    }

    /// Euclidean norm of the gradient at `x`.
    pub fn grad_norm(&self, x: &[f64]) -> f64 {
        let w = self.maxdeg + 1;
        let mut pw = vec![0.0; self.nvars * w];
        self.powers(x, &mut pw);
        self.grad
            .iter()
            .map(|g| Self::sum(&g.exps, &g.coeffs, self.nvars, w, &pw).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}
