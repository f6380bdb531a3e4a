#![allow(dead_code)]

use fy_core::{loss_value, Domain, FyLossSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn scores(rng: &mut impl Rng, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-scale..scale)).collect()
}

/// Simplex point; about a third of the coordinates are zero.
pub fn simplex(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    let mut p: Vec<f64> = (0..d)
        .map(|_| {
            if rng.random_bool(0.3) {
                0.0
            } else {
                rng.random::<f64>()
            }
        })
        .collect();
    if p.iter().all(|&v| v == 0.0) {
        p[rng.random_range(0..d)] = 1.0;
    }
    let s: f64 = p.iter().sum();
    p.iter().map(|v| v / s).collect()
}

pub fn interior_simplex(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    let p: Vec<f64> = (0..d).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = p.iter().sum();
    p.iter().map(|v| v / s).collect()
}

pub fn one_hot(d: usize, k: usize) -> Vec<f64> {
    let mut e = vec![0.0; d];
    e[k] = 1.0;
    e
}

/// A target valid for the loss's domain.
pub fn target(rng: &mut impl Rng, spec: &FyLossSpec, d: usize) -> Vec<f64> {
    match spec.domain {
        Domain::Simplex => simplex(rng, d),
        Domain::Box => (0..d).map(|_| rng.random::<f64>()).collect(),
        Domain::FullSpace => scores(rng, d, 2.0),
    }
}

/// Central differences of the loss in theta.
pub fn fd_loss_gradient(spec: &FyLossSpec, theta: &[f64], y: &[f64], h: f64) -> Vec<f64> {
    (0..theta.len())
        .map(|j| {
            let mut a = theta.to_vec();
            let mut b = theta.to_vec();
            a[j] += h;
            b[j] -= h;
            (loss_value(spec, &a, y).unwrap().value - loss_value(spec, &b, y).unwrap().value)
                / (2.0 * h)
        })
        .collect()
}

/// `max |a - b| / max(max |b|, 1)`.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let num = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    let den = b.iter().map(|v| v.abs()).fold(1.0, f64::max);
    num / den
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
