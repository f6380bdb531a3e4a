//! Accelerated projected gradient (FISTA) for `max_p <theta, p> - Omega(p)`
//! over the simplex, used for non-separable entropies and as a cross-check
//! for the other solvers.

use super::closed_form::project_simplex_into;
use super::{Method, PredictionResult, SimplexRegularizer, SolverPolicy};
use crate::entropy::{EntropySpec, ProbabilityVector};
use crate::error::{FyError, Result};

/// Solve with FISTA for the negated entropy `-H` (unit temperature).
pub fn solve_projected_gradient(
    spec: &EntropySpec,
    theta: &[f64],
    policy: &SolverPolicy,
) -> Result<PredictionResult> {
    fista(
        &SimplexRegularizer::Entropy {
            spec: *spec,
            scale: 1.0,
        },
        theta,
        policy,
    )
}

/// Minimizes `f(p) = Omega(p) - <theta, p>` over the simplex.
///
/// Each iteration starts its backtracking at `min(1, 2 * eta_prev)` and halves
/// until the quadratic upper model holds. Momentum is reset whenever the
/// objective increases. Stops when the gradient mapping
/// `||y - Proj(y - eta grad f(y))|| / eta` falls below the tolerance.
pub(crate) fn fista(
    reg: &SimplexRegularizer,
    theta: &[f64],
    policy: &SolverPolicy,
) -> Result<PredictionResult> {
    let d = theta.len();
    let tol = policy.tolerance;
    let max_iter = policy.max_iterations_for(Method::ProjectedGradient);
    let objective = |p: &[f64]| reg.value(p) - dot(theta, p);

    let mut x = vec![1.0 / d as f64; d];
    let mut y = x.clone();
    let mut z = vec![0.0; d];
    let mut grad = vec![0.0; d];
    let mut grad_z = vec![0.0; d];
    let mut step = vec![0.0; d];
    let mut scratch = Vec::with_capacity(d);
    let mut fx = objective(&x);
    let mut t = 1.0_f64;
    let mut eta = 1.0_f64;
    let mut just_restarted = false;
    let mut best = (x.clone(), f64::INFINITY);

    for it in 1..=max_iter {
        reg.gradient(&y, &mut grad);
        for (g, &th) in grad.iter_mut().zip(theta) {
            *g -= th;
        }
        eta = (2.0 * eta).min(1.0);
        let residual = loop {
            for ((s, &yi), &gi) in step.iter_mut().zip(&y).zip(&grad) {
                *s = yi - eta * gi;
            }
            project_simplex_into(&step, &mut scratch, &mut z);
            snap_tiny(&mut z);
            // local curvature test <grad f(z) - grad f(y), z - y> <= ||z - y||^2 / eta,
            // which avoids the cancellation of comparing objective values
            reg.gradient(&z, &mut grad_z);
            let mut curv = 0.0;
            let mut sq = 0.0;
            // grad holds grad f(y) = grad Omega(y) - theta, grad_z holds grad Omega(z)
            for ((((&zi, &yi), &gy), &gz), &th) in
                z.iter().zip(&y).zip(&grad).zip(&grad_z).zip(theta)
            {
                let dz = zi - yi;
                curv += (gz - (gy + th)) * dz;
                sq += dz * dz;
            }
            if curv <= sq / eta || eta < 1e-20 {
                break sq.sqrt() / eta;
            }
            eta *= 0.5;
        };
        if residual < best.1 {
            best = (z.clone(), residual);
        }
        if residual <= tol {
            return Ok(PredictionResult {
                p: ProbabilityVector::from_raw(z),
                tau: None,
                iterations: it,
                residual,
                method: Method::ProjectedGradient,
            });
        }
        let fz = objective(&z);
        if fz > fx && !just_restarted {
            // restart momentum from the last accepted point
            t = 1.0;
            y.copy_from_slice(&x);
            just_restarted = true;
            continue;
        }
        just_restarted = false;
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        for ((yi, &zi), &xi) in y.iter_mut().zip(&z).zip(&x) {
            *yi = zi + beta * (zi - xi);
        }
        // keep y feasible so entropies with boundary singularities stay finite
        if y.iter().any(|&v| v < 0.0) {
            step.copy_from_slice(&y);
            project_simplex_into(&step, &mut scratch, &mut y);
        }
        x.copy_from_slice(&z);
        fx = fz;
        t = t_next;
    }
    Err(FyError::NoConvergence {
        best: best.0,
        tau: None,
        iterations: max_iter,
        residual: best.1,
    })
}

/// Zero out coordinates within a few ulps of 0. Entropies whose gradient is
/// not Lipschitz at the boundary otherwise stall on iterates like 1e-16.
fn snap_tiny(z: &mut [f64]) {
    let cut = 8.0 * f64::EPSILON;
    if z.iter().any(|&v| v > 0.0 && v < cut) {
        z.iter_mut().filter(|v| **v < cut).for_each(|v| *v = 0.0);
        let total: f64 = z.iter().sum();
        z.iter_mut().for_each(|v| *v /= total);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prediction::closed_form::sparsemax_exact;

    #[test]
    fn squared_norm_two_is_sparsemax() {
        let spec = EntropySpec::squared_norm(2.0).unwrap();
        let theta = [0.4, -0.3, 0.35, 1.1, 0.9];
        let r = solve_projected_gradient(&spec, &theta, &SolverPolicy::default()).unwrap();
        let exact = sparsemax_exact(&theta);
        for (a, b) in r.p.iter().zip(&exact) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn norm_entropy_symmetric_input() {
        let spec = EntropySpec::norm(2.0).unwrap();
        let r = solve_projected_gradient(&spec, &[0.0; 3], &SolverPolicy::default()).unwrap();
        for v in r.p.iter() {
            assert!((v - 1.0 / 3.0).abs() < 1e-6);
        }
    }

    #[test]
    fn reports_no_convergence_with_best_iterate() {
        let spec = EntropySpec::tsallis(1.5).unwrap();
        let policy = SolverPolicy {
            method: Method::ProjectedGradient,
            tolerance: 1e-15,
            max_iterations: Some(2),
        };
        match solve_projected_gradient(&spec, &[0.5, 0.1, -0.2, 0.3], &policy) {
            Err(FyError::NoConvergence { best, tau, .. }) => {
                assert!(tau.is_none());
                assert!((best.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
            other => panic!("expected NoConvergence, got {other:?}"),
        }
    }

    #[test]
    fn shannon_matches_softmax() {
        let theta = [0.3, -0.2, 0.8];
        let r = solve_projected_gradient(&EntropySpec::shannon(), &theta, &SolverPolicy::default())
            .unwrap();
        let s = crate::prediction::closed_form::softmax(&theta);
        for (a, b) in r.p.iter().zip(&s) {
            assert!((a - b).abs() < 1e-6);
        }
    }
}
