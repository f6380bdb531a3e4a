//! Separation margins of entropy-generated losses.
//!
//! A loss has margin `m` when `theta_k >= m + max_{j != k} theta_j` forces
//! `L(theta; e_k) = 0`. For an entropy satisfying the usual assumptions the
//! margin is `grad_j H(e_k) - grad_k H(e_k)`, which reduces to
//! `h'(0) - h'(1)` for separable entropies. It is infinite exactly when the
//! gradient blows up at the boundary (Shannon, Rényi with `beta < 1`).
//!
//! The brute-force check maximizes `H(p) / (1 - ||p||_inf)` along the curve
//! `p(t) = (1 - t, t/(d-1), ..., t/(d-1))`, which contains the maximizer.
//! The ratio is decreasing in `t`, so the grid is geometric and the entropy
//! along the curve is evaluated with `log1p`/`expm1` to stay accurate for
//! tiny `t`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::entropy::{EntropySpec, Extended, Family};
use crate::error::{FyError, Result};
use crate::loss::{loss_value, FyLossSpec};
use crate::prediction::{predict_with, SolverPolicy};

/// Loss at or below this counts as zero.
pub const ZERO_LOSS_TOL: f64 = 1e-9;

const EMPIRICAL_SEED: u64 = 0x6d61_7267_696e;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginReport {
    pub closed_form: Extended,
    pub brute_force: f64,
    /// `None` when the loss has no margin.
    pub empirical_zero_at: Option<f64>,
}

/// Margin from `h'(0) - h'(1)` (separable) or from the entropy gradient at a
/// vertex (otherwise); `+inf` when no margin exists.
pub fn margin_closed_form(spec: &EntropySpec) -> Extended {
    match spec.family() {
        Family::Shannon | Family::Renyi { .. } => Extended::PosInfinity,
        Family::Tsallis { alpha } => Extended::Finite(1.0 / (alpha - 1.0)),
        Family::Norm { .. } | Family::SquaredNorm { .. } => margin_from_gradient(spec, 2),
    }
}

/// `grad_j H(e_k) - grad_k H(e_k)` for `j != k`, evaluated on `d` classes.
pub fn margin_from_gradient(spec: &EntropySpec, d: usize) -> Extended {
    let simplex = spec
        .with_domain(crate::Domain::Simplex)
        .expect("simplex is valid");
    let mut e = vec![0.0; d.max(2)];
    e[0] = 1.0;
    match simplex.gradient(&e) {
        Ok(g) => Extended::Finite(g[1] - g[0]),
        Err(_) => Extended::PosInfinity,
    }
}

/// `h'(0) - h'(1)` for separable entropies.
pub fn margin_from_generator(spec: &EntropySpec) -> Result<Extended> {
    let h0 = spec.h_prime(0.0)?;
    let h1 = spec.h_prime(1.0)?.to_f64();
    Ok(match h0 {
        Extended::Finite(v) => Extended::Finite(v - h1),
        Extended::PosInfinity => Extended::PosInfinity,
    })
}

/// Grid maximum of `H(p(t)) / t` over `t` in `(0, 1 - 1/d]`.
///
/// The `grid` points are geometrically spaced down from `1 - 1/d` over
/// `min(grid/100, 1000)` octaves, so refining the grid only ever adds smaller
/// `t` and the result is nondecreasing in `grid`.
pub fn margin_brute_force(spec: &EntropySpec, d: usize, grid: usize) -> Result<f64> {
    if d < 2 {
        return Err(FyError::InvalidParameter("margin needs d >= 2".into()));
    }
    if grid < 2 {
        return Err(FyError::InvalidParameter(
            "grid needs at least 2 points".into(),
        ));
    }
    let t_max = 1.0 - 1.0 / d as f64;
    let octaves = (grid as f64 / 100.0).min(1000.0);
    let mut best = f64::NEG_INFINITY;
    for i in 0..grid {
        let t = t_max * (-(i as f64) * octaves / (grid - 1) as f64).exp2();
        let ratio = spread_entropy(spec, t, d) / t;
        if ratio > best {
            best = ratio;
        }
    }
    Ok(best)
}

/// `H(1 - t, t/(d-1), ..., t/(d-1))`, accurate for small `t`.
pub fn spread_entropy(spec: &EntropySpec, t: f64, d: usize) -> f64 {
    let rest = (d - 1) as f64;
    let s = t / rest;
    // ln(1 - t) and (1 - t)^e - 1 without cancellation
    let ln1m = (-t).ln_1p();
    let pow_m1 = |e: f64| (e * ln1m).exp_m1();
    match spec.family() {
        Family::Shannon => -(1.0 - t) * ln1m - if t > 0.0 { t * s.ln() } else { 0.0 },
        Family::Tsallis { alpha } => {
            let k = alpha * (alpha - 1.0);
            // (1-t) - (1-t)^alpha = -t - ((1-t)^alpha - 1)
            let top = (-t - pow_m1(alpha)) / k;
            top + rest * (s - s.powf(alpha)) / k
        }
        Family::Norm { q } => {
            let excess = pow_m1(q) + rest * s.powf(q);
            -(excess.ln_1p() / q).exp_m1()
        }
        Family::SquaredNorm { q } => {
            let excess = pow_m1(q) + rest * s.powf(q);
            -0.5 * (2.0 * excess.ln_1p() / q).exp_m1()
        }
        Family::Renyi { beta } => {
            let excess = pow_m1(beta) + rest * s.powf(beta);
            excess.ln_1p() / (1.0 - beta)
        }
    }
}

/// Empirical zero-loss threshold with the default solver policy.
pub fn margin_empirical(spec: &EntropySpec, d: usize, trials: usize) -> Result<f64> {
    margin_empirical_with(spec, d, trials, &SolverPolicy::default())
}

/// Empirical margin.
///
/// Zero loss is detected through the prediction: `L(theta; e_k) = 0` exactly
/// when `yhat(theta) = e_k`. On `trials` random score vectors, a gap equal to
/// the closed-form margin must give a loss of at most [`ZERO_LOSS_TOL`]; a gap 5% short of it must give a prediction off the
/// vertex and a strictly positive loss. Returns the bisected smallest gap `g`
/// with `yhat(g e_0) = e_0`.
pub fn margin_empirical_with(
    spec: &EntropySpec,
    d: usize,
    trials: usize,
    policy: &SolverPolicy,
) -> Result<f64> {
    let margin = margin_closed_form(spec)
        .finite()
        .ok_or_else(|| FyError::InvalidParameter(format!("{spec} has no separation margin")))?;
    if d < 2 {
        return Err(FyError::InvalidParameter("margin needs d >= 2".into()));
    }
    let loss = FyLossSpec::entropy(spec.with_domain(crate::Domain::Simplex)?).with_solver(*policy);
    // (loss, prediction is exactly e_k)
    let eval = |theta: &[f64], k: usize| -> Result<(f64, bool)> {
        let mut y = vec![0.0; theta.len()];
        y[k] = 1.0;
        let e = loss_value(&loss, theta, &y)?;
        let at_vertex = e
            .prediction
            .iter()
            .enumerate()
            .all(|(j, &p)| (j == k) == (p > 0.0));
        Ok((e.value, at_vertex))
    };

    let mut rng = ChaCha8Rng::seed_from_u64(EMPIRICAL_SEED ^ d as u64);
    for trial in 0..trials {
        let mut theta: Vec<f64> = (0..d)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let k = rng.random_range(0..d);
        let others = theta
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != k)
            .map(|(_, &v)| v)
            .fold(f64::NEG_INFINITY, f64::max);
        theta[k] = others + margin;
        let (at, _) = eval(&theta, k)?;
        if at > ZERO_LOSS_TOL {
            return Err(FyError::MarginViolated(format!(
                "trial {trial}: loss {at:e} at gap equal to the margin {margin}"
            )));
        }
        theta[k] = others + 0.95 * margin;
        let (short, vertex) = eval(&theta, k)?;
        if short <= 0.0 || vertex {
            return Err(FyError::MarginViolated(format!(
                "trial {trial}: loss {short:e} (vertex: {vertex}) at gap 0.95 * {margin}"
            )));
        }
    }

    // slow solvers near the boundary still decide vertex membership from their best iterate
    let reaches_vertex = |g: f64| -> Result<bool> {
        let mut theta = vec![0.0; d];
        theta[0] = g;
        let p = match predict_with(&loss, &theta, policy) {
            Ok(r) => r.p.into_inner(),
            Err(FyError::NoConvergence { best, .. }) => best,
            Err(e) => return Err(e),
        };
        Ok(p[0] > 0.0 && p[1..].iter().all(|&v| v == 0.0))
    };
    let (mut lo, mut hi) = (0.0, 2.0 * margin);
    if !reaches_vertex(hi)? {
        return Err(FyError::MarginViolated(format!(
            "prediction is not a vertex at gap {hi}"
        )));
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if reaches_vertex(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// All three margin estimates. The empirical one is skipped when no margin
/// exists.
pub fn margin_report(
    spec: &EntropySpec,
    d: usize,
    grid: usize,
    trials: usize,
) -> Result<MarginReport> {
    let closed_form = margin_closed_form(spec);
    let brute_force = margin_brute_force(spec, d, grid)?;
    let empirical_zero_at = if closed_form.is_finite() {
        Some(margin_empirical(spec, d, trials)?)
    } else {
        None
    };
    Ok(MarginReport {
        closed_form,
        brute_force,
        empirical_zero_at,
    })
}
