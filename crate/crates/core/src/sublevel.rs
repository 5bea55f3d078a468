//! Directional derivative bases, zeros of derivatives near small values and
//! Monte Carlo sublevel-set measures.
//!
//! ```
//! use num_complex::Complex64;
//! use tracephase::sublevel::nearest_derivative_zero;
//!
//! // Q(z) = z^3 at z0 = 0.1: every derivative below the third vanishes at 0
//! let q = [0.0, 0.0, 0.0, 1.0].map(|c| Complex64::new(c, 0.0));
//! let r = nearest_derivative_zero(&q, Complex64::new(0.1, 0.0), 3, 6.0, 1e-3).unwrap();
//! assert!((r.distance - 0.1).abs() < 1e-6);
//! ```

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::multiindex::{binomial, factorial, MultiIndex};
use crate::numberfield::NumberField;
use crate::phases::{embed_polynomial, sigma_vec, EmbeddedPolynomial, TracePolynomial};
use crate::roots;
use crate::stats::wilson_interval;

/// Unit vectors `u_i` whose powers `(u_i · ∇)^r` span all order-`r` derivatives.
#[derive(Clone, Debug, Serialize)]
pub struct DirectionalBasis {
    pub vectors: Vec<Vec<f64>>,
    pub condition: f64,
    pub attempts: usize,
}

/// Row of the expansion `(u·∇)^r = Σ_{|β|=r} (r!/β!) u^β ∂^β`.
pub fn expansion_row(u: &[f64], r: u32) -> Vec<f64> {
    let n = u.len();
    MultiIndex::of_degree(n, r)
        .iter()
        .map(|b| {
            factorial(r) / b.factorial() * b.0.iter().zip(u).map(|(&e, &x)| x.powi(e as i32)).product::<f64>()
        })
        .collect()
}

fn condition_number(rows: &[Vec<f64>]) -> f64 {
    let m = DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j]);
    let sv = m.singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Draws seeded unit vectors and keeps those that keep the expansion matrix
/// well conditioned, until it is square of size `binom(n+r-1, r)`.
pub fn directional_basis(n: usize, r: u32, seed: u64) -> Result<DirectionalBasis> {
    if n == 0 || r == 0 {
        return Err(Error::Precondition("need n ≥ 1 and r ≥ 1".into()));
    }
    let dim = binomial(n as u32 + r - 1, r) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vectors = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let limit = 100 * dim;
    let mut attempts = 0;
    while rows.len() < dim {
        if attempts >= limit {
            return Err(Error::RankDeficient(format!("rank {} of {dim} after {limit} draws", rows.len())));
        }
        attempts += 1;
        let mut u: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        let norm = u.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm < 1e-3 {
            continue;
        }
        u.iter_mut().for_each(|a| *a /= norm);
        if u.iter().find(|a| a.abs() > 1e-12).is_some_and(|a| *a < 0.0) {
            u.iter_mut().for_each(|a| *a = -*a);
        }
        let mut trial = rows.clone();
        trial.push(expansion_row(&u, r));
        if condition_number(&trial) <= 1e6 {
            rows = trial;
            vectors.push(u);
        }
    }
    Ok(DirectionalBasis { condition: condition_number(&rows), vectors, attempts })
}

/// Distance from `z0` to the nearest zero of `Q, Q', …`.
#[derive(Clone, Debug, Serialize)]
pub struct DerivativeZero {
    pub distance: f64,
    /// Order `j` of the derivative attaining the distance.
    pub order: usize,
    /// Nearest-zero distance for each order `j < deg Q` (`None` if no zeros).
    pub per_order: Vec<Option<f64>>,
    /// `(ε/μ)^{1/k}`.
    pub bound: f64,
    /// `distance / bound`.
    pub ratio: f64,
}

impl DerivativeZero {
    pub fn holds(&self, c_cal: f64) -> bool {
        self.distance <= c_cal * self.bound
    }
}

/// For `Q` (coefficients constant term first) with `|Q^{(k)}(z0)| ≥ μ` and
/// `|Q(z0)| ≤ ε`, finds the nearest zero of some derivative `Q^{(j)}`.
pub fn nearest_derivative_zero(q: &[Complex64], z0: Complex64, k: usize, mu: f64, eps: f64) -> Result<DerivativeZero> {
    let q = roots::trim(q);
    if q.is_empty() {
        return Err(Error::DegenerateQ);
    }
    let d = q.len() - 1;
    if z0.norm() > 1.0 + 1e-12 {
        return Err(Error::Precondition(format!("|z0| = {} exceeds 1", z0.norm())));
    }
    if !(eps > 0.0) {
        return Err(Error::Precondition("ε must be positive".into()));
    }
    if k == 0 || k > d {
        return Err(Error::Precondition(format!("order {k} outside 1..={d}")));
    }
    let mut der = q.clone();
    for _ in 0..k {
        der = roots::derivative(&der);
    }
    let dk = roots::horner(&der, z0).norm();
    if dk < mu * (1.0 - 1e-12) {
        return Err(Error::Precondition(format!("|Q^({k})(z0)| = {dk:e} < μ = {mu:e}")));
    }
    let q0 = roots::horner(&q, z0).norm();
    if q0 > eps * (1.0 + 1e-12) {
        return Err(Error::Precondition(format!("|Q(z0)| = {q0:e} > ε = {eps:e}")));
    }
    let mut per_order = Vec::new();
    let mut cur = q.clone();
    let mut best = (f64::INFINITY, 0);
    for j in 0..d {
        let zs = roots::roots(&cur)?;
        let dist = zs.iter().map(|z| (z - z0).norm()).fold(f64::INFINITY, f64::min);
        per_order.push(if zs.is_empty() { None } else { Some(dist) });
        if dist < best.0 {
            best = (dist, j);
        }
        cur = roots::derivative(&cur);
    }
    let bound = (eps / mu).powf(1.0 / k as f64);
    Ok(DerivativeZero { distance: best.0, order: best.1, per_order, bound, ratio: best.0 / bound })
}

/// One constraint `|∇P_σ| ≤ ε`, `|∂^α P_σ| ≥ μ`.
#[derive(Clone, Debug, Serialize)]
pub struct SublevelCondition {
    pub sigma: usize,
    pub alpha: MultiIndex,
    pub eps: f64,
    pub mu: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SublevelEstimate {
    pub samples: u64,
    pub hits: u64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// `∏ (ε_σ/μ_σ)^{1/(|α_σ|-1)}`.
    pub bound: f64,
    /// `ci_high / bound`.
    pub ratio: f64,
}

const SHARD: u64 = 1 << 16;

/// Monte Carlo measure of `{x ∈ [0,1]^{kn} : |∇P_σ(σ⃗x)| ≤ ε_σ, |∂^{α_σ}P_σ(σ⃗x)| ≥ μ_σ ∀σ}`.
///
/// Samples are split into fixed-size shards, each with its own stream of a
/// seeded generator, so the estimate does not depend on the thread count.
pub fn sublevel_measure(
    field: &NumberField,
    f: &TracePolynomial,
    conditions: &[SublevelCondition],
    samples: u64,
    seed: u64,
) -> Result<SublevelEstimate> {
    if conditions.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut bound = 1.0;
    let mut embedded: Vec<(EmbeddedPolynomial, &SublevelCondition)> = Vec::new();
    for c in conditions {
        if c.alpha.len() != f.nvars() {
            return Err(Error::DimensionMismatch { expected: f.nvars(), got: c.alpha.len() });
        }
        if c.alpha.degree() < 2 {
            return Err(Error::Precondition(format!("|α| = {} < 2", c.alpha.degree())));
        }
        if !(c.eps > 0.0 && c.eps < c.mu) {
            return Err(Error::Precondition(format!("need 0 < ε < μ, got ε = {}, μ = {}", c.eps, c.mu)));
        }
        bound *= (c.eps / c.mu).powf(1.0 / (c.alpha.degree() as f64 - 1.0));
        embedded.push((embed_polynomial(field, f, c.sigma)?, c));
    }
    let dim = field.degree() * f.nvars();
    let shards = samples.div_ceil(SHARD);
    let hits: u64 = (0..shards)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(s);
            let count = SHARD.min(samples - s * SHARD);
            let mut x = vec![0.0; dim];
            let mut h = 0;
            for _ in 0..count {
                x.iter_mut().for_each(|v| *v = rng.gen());
                let inside = embedded.iter().all(|(p, c)| {
                    let z = sigma_vec(field, c.sigma, &x);
                    let g = p.gradient(&z).iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
                    g <= c.eps && p.derivative_at(&c.alpha, &z).norm() >= c.mu
                });
                if inside {
                    h += 1;
                }
            }
            h
        })
        .sum();
    let (lo, hi) = wilson_interval(hits, samples);
    Ok(SublevelEstimate {
        samples,
        hits,
        estimate: hits as f64 / samples as f64,
        ci_low: lo,
        ci_high: hi,
        bound,
        ratio: hi / bound,
    })
}

/// Largest observed `distance / (ε/μ)^{1/k}` over random polynomials of
/// degree 2 to 6 with `|Q(z0)| ≤ ε_cal`, `|z0| ≤ 1`. Half of the draws have
/// generic coefficients, half have clustered roots, which is where the ratio
/// is largest: for `Q = (z - a)^d` and `k = 1` it equals `d`.
pub fn calibrate_derivative_zero(count: usize, eps_cal: f64, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let tau = std::f64::consts::TAU;
    let mut done = 0;
    while done < count {
        let d = rng.gen_range(2..=6usize);
        let z0 = Complex64::new(rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0);
        if z0.norm() > 1.0 {
            continue;
        }
        let mut q: Vec<Complex64> = if done % 2 == 0 {
            (0..=d).map(|_| Complex64::new(rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0)).collect()
        } else {
            let a = z0 + Complex64::from_polar(0.3 * rng.gen::<f64>(), tau * rng.gen::<f64>());
            let spread = [0.0, 0.01, 0.1][rng.gen_range(0..3)];
            let mut q = vec![Complex64::new(1.0, 0.0)];
            for _ in 0..d {
                let root = a + Complex64::from_polar(spread * rng.gen::<f64>(), tau * rng.gen::<f64>());
                let mut next = vec![Complex64::new(0.0, 0.0); q.len() + 1];
                for (i, c) in q.iter().enumerate() {
                    next[i + 1] += c;
                    next[i] -= c * root;
                }
                q = next;
            }
            q
        };
        let target = eps_cal * rng.gen::<f64>().max(1e-6);
        let v = roots::horner(&q, z0).norm();
        if done % 2 == 0 {
            let shift = Complex64::from_polar(target, tau * rng.gen::<f64>()) - roots::horner(&q, z0);
            q[0] += shift;
        } else if v > 0.0 {
            q.iter_mut().for_each(|c| *c *= target / v);
        }
        let k = rng.gen_range(1..=d);
        let mut der = q.clone();
        for _ in 0..k {
            der = roots::derivative(&der);
        }
        let mu = roots::horner(&der, z0).norm();
        let eps = roots::horner(&q, z0).norm();
        if mu == 0.0 || eps == 0.0 {
            continue;
        }
        let r = nearest_derivative_zero(&q, z0, k, mu, eps)?;
        worst = worst.max(r.ratio);
        done += 1;
    }
    Ok(worst)
}
