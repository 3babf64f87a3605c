//! Naive reference implementations shared by the integration tests.
//!
//! The estimator oracles in this file work on plain `Vec<Vec<f64>>` with
//! scalar loops and share no code with the library beyond the RNG.

#![allow(dead_code)]

pub mod extended;
pub mod fixtures;

use std::f64::consts::PI;

use itl_ae::{Rng, SampleBatch};

pub type Points = Vec<Vec<f64>>;

pub fn random_points(rng: &mut Rng, n: usize, d: usize, shift: f64, scale: f64) -> Points {
    (0..n)
        .map(|_| {
            (0..d)
                .map(|_| shift + scale * rng.standard_normal())
                .collect()
        })
        .collect()
}

pub fn batch(points: &Points) -> SampleBatch {
    SampleBatch::from_rows(points).unwrap()
}

pub fn log_uniform(rng: &mut Rng, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.uniform() * (hi.ln() - lo.ln())).exp()
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        let t = a[i] - b[i];
        s += t * t;
    }
    s
}

/// Normalised isotropic Gaussian density with std `width` at offset `a - b`.
pub fn gauss(a: &[f64], b: &[f64], width: f64) -> f64 {
    let d = a.len() as f64;
    (2.0 * PI * width * width).powf(-d / 2.0) * (-sq_dist(a, b) / (2.0 * width * width)).exp()
}

/// Double loop over all pairs, kernel width `sigma * sqrt(2)`. Kahan-compensated
/// so the oracle's own rounding stays below the tolerances it is held to.
pub fn naive_potential(x: &Points, y: &Points, sigma: f64) -> f64 {
    let w = sigma * 2f64.sqrt();
    let (mut total, mut c) = (0.0f64, 0.0f64);
    for a in x {
        for b in y {
            let v = gauss(a, b, w) - c;
            let t = total + v;
            c = (t - total) - v;
            total = t;
        }
    }
    total / (x.len() * y.len()) as f64
}

pub fn naive_euclidean(x: &Points, y: &Points, sigma: f64) -> f64 {
    naive_potential(x, x, sigma) + naive_potential(y, y, sigma) - 2.0 * naive_potential(x, y, sigma)
}

pub fn naive_cauchy_schwarz(x: &Points, y: &Points, sigma: f64) -> f64 {
    let vxy = naive_potential(x, y, sigma);
    (naive_potential(x, x, sigma) * naive_potential(y, y, sigma) / (vxy * vxy)).ln()
}

/// Biased squared MMD through the witness function
/// `f(t) = mean_i k(t, x_i) - mean_j k(t, y_j)`: `MMD^2 = E_x f - E_y f`.
/// `k` is the unnormalised RBF `exp(-|u|^2 / (2 h^2))`; the density
/// normalisation is applied once at the end.
pub fn mmd2_witness(x: &Points, y: &Points, h: f64) -> f64 {
    let k = |a: &[f64], b: &[f64]| (-sq_dist(a, b) / (2.0 * h * h)).exp();
    let witness = |t: &[f64]| {
        x.iter().map(|a| k(t, a)).sum::<f64>() / x.len() as f64
            - y.iter().map(|b| k(t, b)).sum::<f64>() / y.len() as f64
    };
    let ex = x.iter().map(|t| witness(t)).sum::<f64>() / x.len() as f64;
    let ey = y.iter().map(|t| witness(t)).sum::<f64>() / y.len() as f64;
    let d = x[0].len() as f64;
    (2.0 * PI * h * h).powf(-d / 2.0) * (ex - ey)
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    if got == want {
        0.0
    } else {
        (got - want).abs() / want.abs().max(f64::MIN_POSITIVE)
    }
}
