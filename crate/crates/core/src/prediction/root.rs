//! Root-finding prediction for separable entropies.
//!
//! For `H(p) = sum_j h(p_j)` the maximizer of `<theta, p> + s H(p)` over the
//! simplex is `p_j(tau) = (h')^{-1}(min{(tau - theta_j)/s, h'(0)})` where `tau`
//! is the unique root of `phi(tau) = sum_j p_j(tau) - 1`. `phi` is
//! nonincreasing and changes sign on
//! `[max(theta) + s h'(1), max(theta) + s h'(1/d)]`.
//!
//! Internally everything is phrased with the concave generator `h`; the
//! convex `g = -h` convention only flips signs.

use super::{Method, PredictionResult, SolverPolicy};
use crate::entropy::{EntropySpec, Family, ProbabilityVector};
use crate::error::{FyError, Result};

/// A separable entropy scaled by a positive temperature.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ScaledGenerator {
    spec: EntropySpec,
    scale: f64,
    hp0: f64,
    hp1: f64,
}

impl ScaledGenerator {
    pub(crate) fn new(spec: EntropySpec, scale: f64) -> Result<Self> {
        match spec.family() {
            Family::Tsallis { .. } => {}
            Family::Shannon => {
                return Err(FyError::SolverMismatch(
                    "shannon has h'(0) = +inf; use the softmax closed form".into(),
                ))
            }
            _ => {
                return Err(FyError::SolverMismatch(format!(
                    "root finding needs a separable entropy, got {spec}"
                )))
            }
        }
        let hp0 = spec.h_prime_unchecked(0.0).to_f64();
        let hp1 = spec.h_prime_unchecked(1.0).to_f64();
        Ok(ScaledGenerator {
            spec,
            scale,
            hp0,
            hp1,
        })
    }

    fn h_prime(&self, t: f64) -> f64 {
        self.scale * self.spec.h_prime_unchecked(t).to_f64()
    }

    /// `p_j(tau)` for one coordinate. Arguments within rounding distance of
    /// `h'(0)` or `h'(1)` snap to exactly 0 or 1, so vertex solutions and
    /// exact zeros survive floating-point noise in `tau - theta_j`.
    #[inline]
    fn coord(&self, theta_j: f64, tau: f64) -> f64 {
        let u = (tau - theta_j) / self.scale;
        let slack =
            4.0 * f64::EPSILON * ((tau.abs() + theta_j.abs()) / self.scale + self.hp0.abs());
        if u >= self.hp0 - slack {
            0.0
        } else if u <= self.hp1 + slack {
            1.0
        } else {
            self.spec.h_prime_inverse_clamped(u)
        }
    }

    fn fill(&self, theta: &[f64], tau: f64, out: &mut [f64]) -> f64 {
        let mut s = 0.0;
        for (o, &t) in out.iter_mut().zip(theta) {
            *o = self.coord(t, tau);
            s += *o;
        }
        s - 1.0
    }

    fn phi(&self, theta: &[f64], tau: f64) -> f64 {
        theta.iter().map(|&t| self.coord(t, tau)).sum::<f64>() - 1.0
    }

    fn bracket(&self, theta: &[f64]) -> (f64, f64) {
        let m = theta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let d = theta.len() as f64;
        (m + self.scale * self.hp1, m + self.h_prime(1.0 / d))
    }
}

/// `phi(tau) = <p(tau), 1> - 1`.
pub fn phi(spec: &EntropySpec, theta: &[f64], tau: f64) -> Result<f64> {
    Ok(ScaledGenerator::new(*spec, 1.0)?.phi(theta, tau))
}

/// `(tau_min, tau_max)` bracketing the root of [`phi`].
pub fn tau_bracket(spec: &EntropySpec, theta: &[f64]) -> Result<(f64, f64)> {
    Ok(ScaledGenerator::new(*spec, 1.0)?.bracket(theta))
}

/// `p(tau)` without normalization.
pub fn p_of_tau(spec: &EntropySpec, theta: &[f64], tau: f64) -> Result<Vec<f64>> {
    let g = ScaledGenerator::new(*spec, 1.0)?;
    let mut out = vec![0.0; theta.len()];
    g.fill(theta, tau, &mut out);
    Ok(out)
}

/// Regularized prediction for a separable entropy by bisection or Brent's
/// method on `phi`. `Method::Auto` selects Brent.
pub fn solve_root_separable(
    spec: &EntropySpec,
    theta: &[f64],
    policy: &SolverPolicy,
) -> Result<PredictionResult> {
    solve_scaled(*spec, 1.0, theta, policy)
}

pub(crate) fn solve_scaled(
    spec: EntropySpec,
    scale: f64,
    theta: &[f64],
    policy: &SolverPolicy,
) -> Result<PredictionResult> {
    let gen = ScaledGenerator::new(spec, scale)?;
    let method = match policy.method {
        Method::Auto | Method::Brent => Method::Brent,
        Method::Bisection => Method::Bisection,
        other => {
            return Err(FyError::SolverMismatch(format!(
                "{other:?} is not a root-finding method"
            )))
        }
    };
    let tol = policy.tolerance;
    let max_iter = policy.max_iterations_for(method);
    let (lo, hi) = gen.bracket(theta);
    let mut p = vec![0.0; theta.len()];

    let phi_lo = gen.fill(theta, lo, &mut p);
    // tau_min is the root exactly when the solution is a vertex
    let vertex = p.iter().filter(|&&v| v > 0.0).count() == 1;
    let (tau, residual, iterations, converged) = if vertex && phi_lo.abs() <= tol {
        (lo, phi_lo.abs(), 0, true)
    } else {
        let f = |t: f64| gen.phi(theta, t);
        match method {
            Method::Bisection => bisect(f, lo, hi, tol, max_iter),
            _ => brent(f, lo, phi_lo, hi, tol, max_iter),
        }
    };
    gen.fill(theta, tau, &mut p);
    let total: f64 = p.iter().sum();
    if total > 0.0 {
        p.iter_mut().for_each(|v| *v /= total);
    }
    if !converged {
        return Err(FyError::NoConvergence {
            best: p,
            tau: Some(tau),
            iterations,
            residual,
        });
    }
    Ok(PredictionResult {
        p: ProbabilityVector::from_raw(p),
        tau: Some(tau),
        iterations,
        residual,
        method,
    })
}

/// Bisection on a nonincreasing function with `f(lo) >= 0 >= f(hi)`.
/// Returns `(root, |f(root)|, iterations, converged)`.
fn bisect(
    f: impl Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    max_iter: usize,
) -> (f64, f64, usize, bool) {
    let mut tau = 0.5 * (lo + hi);
    let mut val = f(tau);
    let mut it = 0;
    while val.abs() > tol {
        if it >= max_iter {
            return (tau, val.abs(), it, false);
        }
        if val < 0.0 {
            hi = tau;
        } else {
            lo = tau;
        }
        let next = 0.5 * (lo + hi);
        if next == tau {
            // bracket collapsed to adjacent floats
            return (tau, val.abs(), it, true);
        }
        tau = next;
        val = f(tau);
        it += 1;
    }
    (tau, val.abs(), it, true)
}

/// Brent's method (inverse quadratic / secant steps with a bisection
/// safeguard), stopping on `|f| <= tol` or a bracket a few ulps wide.
fn brent(
    f: impl Fn(f64) -> f64,
    a0: f64,
    fa0: f64,
    b0: f64,
    tol: f64,
    max_iter: usize,
) -> (f64, f64, usize, bool) {
    let (mut a, mut fa) = (a0, fa0);
    let (mut b, mut fb) = (b0, f(b0));
    if fb.abs() <= tol {
        return (b, fb.abs(), 1, true);
    }
    if fa.abs() < fb.abs() {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut bisected = true;
    for it in 1..=max_iter {
        let s = if fa != fc && fb != fc {
            a * fb * fc / ((fa - fb) * (fa - fc))
                + b * fa * fc / ((fb - fa) * (fb - fc))
                + c * fa * fb / ((fc - fa) * (fc - fb))
        } else {
            b - fb * (b - a) / (fb - fa)
        };
        let eps = 4.0 * f64::EPSILON * b.abs().max(1.0);
        let lo_bound = (3.0 * a + b) / 4.0;
        let between = (s > lo_bound.min(b)) && (s < lo_bound.max(b));
        let use_bisection = !between
            || (bisected && (s - b).abs() >= (b - c).abs() / 2.0)
            || (!bisected && (s - b).abs() >= (c - d).abs() / 2.0)
            || (bisected && (b - c).abs() < eps)
            || (!bisected && (c - d).abs() < eps);
        let s = if use_bisection { 0.5 * (a + b) } else { s };
        bisected = use_bisection;
        let fs = f(s);
        d = c;
        c = b;
        fc = fb;
        if fa * fs < 0.0 {
            b = s;
            fb = fs;
        } else {
            a = s;
            fa = fs;
        }
        if fa.abs() < fb.abs() {
            std::mem::swap(&mut a, &mut b);
            std::mem::swap(&mut fa, &mut fb);
        }
        if fb.abs() <= tol {
            return (b, fb.abs(), it, true);
        }
        if (b - a).abs() <= eps {
            // root pinned to float resolution; phi may jump over the tolerance band
            return (b, fb.abs(), it, true);
        }
    }
    (b, fb.abs(), max_iter, false)
}
