//! Roots of univariate complex polynomials.
//!
//! Eigenvalues of the companion matrix give starting values, which are then
//! polished by Newton's method on the original polynomial.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Evaluates `Σ c_j z^j` (coefficients constant term first) by Horner.
pub fn horner(c: &[Complex64], z: Complex64) -> Complex64 {
    c.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &a| acc * z + a)
}

/// Coefficients of the derivative.
pub fn derivative(c: &[Complex64]) -> Vec<Complex64> {
    c.iter().enumerate().skip(1).map(|(j, &a)| a * j as f64).collect()
}

/// Strips trailing zero coefficients.
pub fn trim(c: &[Complex64]) -> Vec<Complex64> {
    let mut v = c.to_vec();
    while v.last().is_some_and(|a| a.norm() == 0.0) {
        v.pop();
    }
    v
}

/// Newton refinement, keeping the iterate with the smallest residual.
pub fn newton_polish(c: &[Complex64], z0: Complex64, steps: usize) -> Complex64 {
    let dc = derivative(c);
    let mut z = z0;
    let mut best = z0;
    let mut best_r = horner(c, z0).norm();
    for _ in 0..steps {
        let f = horner(c, z);
        let df = horner(&dc, z);
        if df.norm() == 0.0 || best_r == 0.0 {
            break;
        }
        let step = f / df;
        z -= step;
        let r = horner(c, z).norm();
        if r < best_r {
            best_r = r;
            best = z;
        }
        if step.norm() <= 1e-16 * (1.0 + z.norm()) {
            break;
        }
    }
    best
}

/// All complex roots of `Σ c_j z^j`, with multiplicity.
pub fn roots(c: &[Complex64]) -> Result<Vec<Complex64>> {
    let c = trim(c);
    if c.is_empty() {
        return Err(Error::DegenerateQ);
    }
    let d = c.len() - 1;
    if d == 0 {
        return Ok(Vec::new());
    }
    // exact zeros at the origin
    let z = c.iter().take_while(|a| a.norm() == 0.0).count();
    let mut out = vec![Complex64::new(0.0, 0.0); z];
    let c = &c[z..];
    let d = d - z;
    if d == 0 {
        return Ok(out);
    }
    let lead = c[d];
    let monic: Vec<Complex64> = c.iter().map(|&a| a / lead).collect();
    if d == 1 {
        out.push(-monic[0]);
        return Ok(out);
    }
    let mut m = DMatrix::<Complex64>::zeros(d, d);
    for i in 1..d {
        m[(i, i - 1)] = Complex64::new(1.0, 0.0);
    }
    for i in 0..d {
        m[(i, d - 1)] = -monic[i];
    }
    let start = match nalgebra::linalg::Schur::try_new(m, f64::EPSILON, 10_000) {
        Some(schur) => {
            let (_, t) = schur.unpack();
            (0..d).map(|i| t[(i, i)]).collect()
        }
        None => durand_kerner(&monic),
    };
    out.extend(start.into_iter().map(|z| newton_polish(&monic, z, 50)));
    Ok(out)
}

/// Simultaneous iteration on a monic polynomial.
fn durand_kerner(monic: &[Complex64]) -> Vec<Complex64> {
    let d = monic.len() - 1;
    let radius = 1.0 + monic[..d].iter().map(|a| a.norm()).fold(0.0, f64::max);
    let mut z: Vec<Complex64> = (0..d)
        .map(|j| Complex64::from_polar(radius, 0.4 + std::f64::consts::TAU * j as f64 / d as f64))
        .collect();
    for _ in 0..2000 {
        let mut moved = 0.0f64;
        for i in 0..d {
            let den = (0..d).filter(|&j| j != i).fold(Complex64::new(1.0, 0.0), |acc, j| acc * (z[i] - z[j]));
            if den.norm() == 0.0 {
                continue;
            }
            let step = horner(monic, z[i]) / den;
            z[i] -= step;
            moved = moved.max(step.norm());
        }
        if moved <= 1e-15 * radius {
            break;
        }
    }
    z
}
