//! Smooth compactly supported cutoffs.
//!
//! The radial cutoff is `ψ(x) = g((ρ2 - |x - c|)/(ρ2 - ρ1))` with the smooth
//! step `g(t) = h(t)/(h(t) + h(1 - t))`, `h(t) = exp(-1/t)` for `t > 0`. It
//! equals 1 on the ball of radius `ρ1` and vanishes outside radius `ρ2`.
//!
//! ```
//! use tracephase::cutoff::{Amplitude, Cutoff};
//!
//! let psi = Cutoff::new(vec![0.0, 0.0], 1.0, 2.0).unwrap();
//! assert_eq!(psi.eval(&[0.5, 0.5]), 1.0);
//! assert_eq!(psi.eval(&[2.0, 0.1]), 0.0);
//! assert!((psi.eval(&[1.5, 0.0]) - 0.5).abs() < 1e-15);
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numberfield::NumberField;

/// A bounded weight with compact support inside an axis-aligned box.
pub trait Amplitude: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> f64;
    /// Lower and upper corners of a box containing the support.
    fn bounding_box(&self) -> (Vec<f64>, Vec<f64>);
    /// True when the box `[lo, hi]` certainly misses the support.
    fn misses(&self, _lo: &[f64], _hi: &[f64]) -> bool {
        false
    }
}

fn h(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// Smooth step: 0 for `t ≤ 0`, 1 for `t ≥ 1`.
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = h(t);
        a / (a + h(1.0 - t))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cutoff {
    pub center: Vec<f64>,
    pub rho1: f64,
    pub rho2: f64,
}

impl Cutoff {
    pub fn new(center: Vec<f64>, rho1: f64, rho2: f64) -> Result<Self> {
        if !(rho1 > 0.0 && rho2 > rho1) || center.is_empty() {
            return Err(Error::ConfigInvalid(format!("cutoff needs 0 < ρ1 < ρ2, got {rho1}, {rho2}")));
        }
        Ok(Cutoff { center, rho1, rho2 })
    }

    /// Centered at the origin of `ℝ^dim`.
    pub fn centered(dim: usize, rho1: f64, rho2: f64) -> Result<Self> {
        Self::new(vec![0.0; dim], rho1, rho2)
    }

    /// The same profile with the center moved to `c`.
    pub fn recentered(&self, c: Vec<f64>) -> Self {
        Cutoff { center: c, rho1: self.rho1, rho2: self.rho2 }
    }

    pub fn radius(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }

    pub fn in_support(&self, x: &[f64]) -> bool {
        self.radius(x) <= self.rho2
    }
}

impl Amplitude for Cutoff {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn eval(&self, x: &[f64]) -> f64 {
        smooth_step((self.rho2 - self.radius(x)) / (self.rho2 - self.rho1))
    }

    fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.center.iter().map(|c| c - self.rho2).collect(),
            self.center.iter().map(|c| c + self.rho2).collect(),
        )
    }

    fn misses(&self, lo: &[f64], hi: &[f64]) -> bool {
        let d2: f64 = self
            .center
            .iter()
            .zip(lo.iter().zip(hi))
            .map(|(c, (a, b))| {
                let t = if c < a { a - c } else if c > b { c - b } else { 0.0 };
                t * t
            })
            .sum();
        d2 > self.rho2 * self.rho2
    }
}

/// A cutoff on `ℝ^k` for a totally real field that factors over the
/// embeddings: `Ψ(x) = ∏_σ g((ρ2 - |σ**(x + s)|)/(ρ2 - ρ1))` for a shift `s`.
///
/// With `ρ1 ≥ 2 max_σ |w_σ|` it equals 1 on `|x + s| ≤ 2`.
#[derive(Clone, Debug)]
pub struct EmbeddingProductCutoff {
    w: Vec<Vec<f64>>,
    winv_abs_rows: Vec<f64>,
    pub rho1: f64,
    pub rho2: f64,
    pub shift: Vec<f64>,
}

impl EmbeddingProductCutoff {
    pub fn new(field: &NumberField, rho1: f64, rho2: f64, shift: Vec<f64>) -> Result<Self> {
        if !field.is_totally_real() {
            return Err(Error::NotTotallyReal);
        }
        if !(rho1 > 0.0 && rho2 > rho1) {
            return Err(Error::ConfigInvalid(format!("cutoff needs 0 < ρ1 < ρ2, got {rho1}, {rho2}")));
        }
        let k = field.degree();
        if shift.len() != k {
            return Err(Error::DimensionMismatch { expected: k, got: shift.len() });
        }
        let w: Vec<Vec<f64>> = (0..k).map(|s| field.w(s).iter().map(|z| z.re).collect()).collect();
        let wm = nalgebra::DMatrix::from_fn(k, k, |s, j| w[s][j]);
        let inv = wm.try_inverse().ok_or(Error::SingularBasis)?;
        let winv_abs_rows = (0..k).map(|j| (0..k).map(|s| inv[(j, s)].abs()).sum()).collect();
        Ok(EmbeddingProductCutoff { w, winv_abs_rows, rho1, rho2, shift })
    }

    /// The smallest plateau radius making `Ψ = 1` on `|x + s| ≤ r`.
    pub fn plateau_for(field: &NumberField, r: f64) -> f64 {
        (0..field.degree())
            .map(|s| field.w(s).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
            * r
    }

    /// The one-dimensional profile shared by all factors.
    pub fn profile(&self, u: f64) -> f64 {
        smooth_step((self.rho2 - u.abs()) / (self.rho2 - self.rho1))
    }

    /// `σ**(s)` for each embedding.
    pub fn shift_images(&self) -> Vec<f64> {
        self.w.iter().map(|w| w.iter().zip(&self.shift).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn embedding_rows(&self) -> &[Vec<f64>] {
        &self.w
    }
}

impl Amplitude for EmbeddingProductCutoff {
    fn dim(&self) -> usize {
        self.shift.len()
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.w
            .iter()
            .map(|w| {
                let u: f64 = w.iter().zip(x.iter().zip(&self.shift)).map(|(a, (xi, si))| a * (xi + si)).sum();
                self.profile(u)
            })
            .product()
    }

    fn misses(&self, lo: &[f64], hi: &[f64]) -> bool {
        self.w.iter().any(|w| {
            let (mut a, mut b) = (0.0, 0.0);
            for (wi, ((l, h), s)) in w.iter().zip(lo.iter().zip(hi).zip(&self.shift)) {
                let (p, q) = (wi * (l + s), wi * (h + s));
                a += p.min(q);
                b += p.max(q);
            }
            a > self.rho2 || b < -self.rho2
        })
    }

    fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let lo = self.shift.iter().zip(&self.winv_abs_rows).map(|(s, r)| -s - self.rho2 * r).collect();
        let hi = self.shift.iter().zip(&self.winv_abs_rows).map(|(s, r)| -s + self.rho2 * r).collect();
        (lo, hi)
    }
}
