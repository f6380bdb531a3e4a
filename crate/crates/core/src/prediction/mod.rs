//! Regularized prediction `argmax_p <theta, p> - Omega(p)`.
//!
//! [`predict`] dispatches to a closed form (softmax, sparsemax, sigmoid,
//! argmax, identity) when one exists, to root finding for separable
//! entropies, and to projected gradient otherwise.

pub mod closed_form;
pub mod pg;
pub mod root;

use serde::{Deserialize, Serialize};

use crate::entropy::{check_membership, Domain, EntropySpec, Family, ProbabilityVector};
use crate::error::{FyError, Result};
use crate::loss::{FyLossSpec, Regularizer};

pub use closed_form::{log_sum_exp, sigmoid, softmax, sparsemax_exact};
pub use pg::solve_projected_gradient;
pub use root::{phi, solve_root_separable, tau_bracket};

/// Tsallis alpha this close to 1 is routed to softmax.
pub const SOFTMAX_DISPATCH_TOL: f64 = 1e-6;
/// Tsallis alpha this close to 2 is routed to the sort-based projection.
pub const SPARSEMAX_DISPATCH_TOL: f64 = 1e-12;

/// Floor applied to coordinates when evaluating gradients that diverge at zero.
const GRADIENT_FLOOR: f64 = 1e-16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Closed form if available, else Brent for separable entropies, else
    /// projected gradient.
    #[default]
    Auto,
    ClosedForm,
    Bisection,
    Brent,
    ProjectedGradient,
    SortProjection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverPolicy {
    pub method: Method,
    /// On `|phi(tau)|` for root finders, on the gradient mapping for
    /// projected gradient.
    pub tolerance: f64,
    /// `None` means 100 for root finders and 5000 for projected gradient.
    pub max_iterations: Option<usize>,
}

impl Default for SolverPolicy {
    fn default() -> Self {
        SolverPolicy {
            method: Method::Auto,
            tolerance: 1e-9,
            max_iterations: None,
        }
    }
}

impl SolverPolicy {
    pub fn new(method: Method) -> Self {
        SolverPolicy {
            method,
            ..Self::default()
        }
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(FyError::InvalidParameter(format!(
                "solver tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == Some(0) {
            return Err(FyError::InvalidParameter(
                "max_iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn max_iterations_for(&self, method: Method) -> usize {
        self.max_iterations.unwrap_or(match method {
            Method::ProjectedGradient => 5000,
            _ => 100,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionResult {
    pub p: ProbabilityVector,
    /// Threshold found by the root finder (or by the sort rule).
    pub tau: Option<f64>,
    pub iterations: usize,
    pub residual: f64,
    /// Method that actually ran.
    pub method: Method,
}

impl PredictionResult {
    fn closed(p: Vec<f64>, tau: Option<f64>, method: Method) -> Self {
        PredictionResult {
            p: ProbabilityVector::from_raw(p),
            tau,
            iterations: 0,
            residual: 0.0,
            method,
        }
    }
}

/// A regularizer restricted to the simplex, in a form the generic solvers
/// can evaluate.
#[derive(Debug, Clone, Copy)]
pub(crate) enum SimplexRegularizer {
    /// `-scale * H`.
    Entropy {
        spec: EntropySpec,
        scale: f64,
    },
    /// `scale/2 ||p||^2`.
    Squared {
        scale: f64,
    },
    Zero,
}

impl SimplexRegularizer {
    pub(crate) fn value(&self, p: &[f64]) -> f64 {
        match self {
            SimplexRegularizer::Entropy { spec, scale } => -scale * spec.simplex_value(p),
            SimplexRegularizer::Squared { scale } => {
                0.5 * scale * p.iter().map(|v| v * v).sum::<f64>()
            }
            SimplexRegularizer::Zero => 0.0,
        }
    }

    pub(crate) fn gradient(&self, p: &[f64], out: &mut [f64]) {
        match self {
            SimplexRegularizer::Entropy { spec, scale } => {
                let g = spec.simplex_gradient_floored(p, GRADIENT_FLOOR);
                for (o, v) in out.iter_mut().zip(g) {
                    *o = -scale * v;
                }
            }
            SimplexRegularizer::Squared { scale } => {
                for (o, &v) in out.iter_mut().zip(p) {
                    *o = scale * v;
                }
            }
            SimplexRegularizer::Zero => out.iter_mut().for_each(|o| *o = 0.0),
        }
    }
}

/// `yhat_Omega(theta)` using the loss spec's solver policy.
pub fn predict(spec: &FyLossSpec, theta: &[f64]) -> Result<PredictionResult> {
    predict_with(spec, theta, &spec.solver)
}

/// `yhat_Omega(theta)` with an explicit solver policy.
pub fn predict_with(
    spec: &FyLossSpec,
    theta: &[f64],
    policy: &SolverPolicy,
) -> Result<PredictionResult> {
    policy.validate()?;
    check_scores(theta)?;
    let scale = spec.temperature;
    match (spec.regularizer, spec.domain) {
        (Regularizer::HingeLinear, _) => Err(FyError::InvalidParameter(
            "the hinge regularizer depends on the label; use loss_value".into(),
        )),
        (Regularizer::Zero, _) => match policy.method {
            Method::Auto | Method::ClosedForm => Ok(PredictionResult::closed(
                closed_form::argmax_vertex(theta),
                None,
                Method::ClosedForm,
            )),
            Method::ProjectedGradient => pg::fista(&SimplexRegularizer::Zero, theta, policy),
            m => Err(mismatch(m, "the zero regularizer")),
        },
        (Regularizer::SquaredL2, Domain::FullSpace) => match policy.method {
            Method::Auto | Method::ClosedForm => Ok(PredictionResult::closed(
                theta.iter().map(|t| t / scale).collect(),
                None,
                Method::ClosedForm,
            )),
            m => Err(mismatch(m, "the unconstrained squared regularizer")),
        },
        (Regularizer::SquaredL2, _) => match policy.method {
            Method::Auto | Method::ClosedForm | Method::SortProjection => {
                Ok(sort_projection(theta, scale))
            }
            Method::ProjectedGradient => {
                pg::fista(&SimplexRegularizer::Squared { scale }, theta, policy)
            }
            m => Err(mismatch(m, "the squared regularizer")),
        },
        (Regularizer::EntropyNeg(entropy), Domain::Box) => {
            predict_box(entropy, scale, theta, policy)
        }
        (Regularizer::EntropyNeg(entropy), _) => predict_simplex(entropy, scale, theta, policy),
    }
}

fn predict_simplex(
    entropy: EntropySpec,
    scale: f64,
    theta: &[f64],
    policy: &SolverPolicy,
) -> Result<PredictionResult> {
    let closed = closed_form_kind(&entropy);
    match policy.method {
        Method::Auto | Method::ClosedForm => match closed {
            Some(ClosedKind::Softmax) => {
                let scaled: Vec<f64> = theta.iter().map(|t| t / scale).collect();
                Ok(PredictionResult::closed(
                    softmax(&scaled),
                    None,
                    Method::ClosedForm,
                ))
            }
            Some(ClosedKind::Sparsemax) => Ok(sort_projection(theta, scale)),
            None if policy.method == Method::ClosedForm => {
                Err(mismatch(Method::ClosedForm, &entropy.to_string()))
            }
            None if entropy.is_separable() => root::solve_scaled(entropy, scale, theta, policy),
            None => pg::fista(
                &SimplexRegularizer::Entropy {
                    spec: entropy,
                    scale,
                },
                theta,
                policy,
            ),
        },
        Method::SortProjection => match closed {
            Some(ClosedKind::Sparsemax) => Ok(sort_projection(theta, scale)),
            _ => Err(mismatch(Method::SortProjection, &entropy.to_string())),
        },
        Method::Bisection | Method::Brent => root::solve_scaled(entropy, scale, theta, policy),
        Method::ProjectedGradient => pg::fista(
            &SimplexRegularizer::Entropy {
                spec: entropy,
                scale,
            },
            theta,
            policy,
        ),
    }
}

/// One binary problem `(theta_i, 0)` per coordinate; keeps the first entry.
fn predict_box(
    entropy: EntropySpec,
    scale: f64,
    theta: &[f64],
    policy: &SolverPolicy,
) -> Result<PredictionResult> {
    let simplex = entropy.with_domain(Domain::Simplex)?;
    let mut p = Vec::with_capacity(theta.len());
    let mut iterations = 0;
    let mut residual = 0.0_f64;
    let mut method = Method::ClosedForm;
    for &t in theta {
        if simplex.family() == Family::Shannon
            && matches!(policy.method, Method::Auto | Method::ClosedForm)
        {
            p.push(sigmoid(t / scale));
            continue;
        }
        let r = predict_simplex(simplex, scale, &[t, 0.0], policy)?;
        iterations += r.iterations;
        residual = residual.max(r.residual);
        method = r.method;
        p.push(r.p[0]);
    }
    Ok(PredictionResult {
        p: ProbabilityVector::from_raw(p),
        tau: None,
        iterations,
        residual,
        method,
    })
}

fn sort_projection(theta: &[f64], scale: f64) -> PredictionResult {
    let scaled: Vec<f64> = theta.iter().map(|t| t / scale).collect();
    let tau = closed_form::sparsemax_threshold(&scaled);
    let p = scaled.iter().map(|&t| (t - tau).max(0.0)).collect();
    PredictionResult::closed(p, Some(tau), Method::SortProjection)
}

enum ClosedKind {
    Softmax,
    Sparsemax,
}

fn closed_form_kind(entropy: &EntropySpec) -> Option<ClosedKind> {
    match entropy.family() {
        Family::Shannon => Some(ClosedKind::Softmax),
        Family::Tsallis { alpha } if (alpha - 1.0).abs() < SOFTMAX_DISPATCH_TOL => {
            Some(ClosedKind::Softmax)
        }
        Family::Tsallis { alpha } if (alpha - 2.0).abs() < SPARSEMAX_DISPATCH_TOL => {
            Some(ClosedKind::Sparsemax)
        }
        Family::SquaredNorm { q } if q == 2.0 => Some(ClosedKind::Sparsemax),
        _ => None,
    }
}

fn mismatch(method: Method, what: &str) -> FyError {
    FyError::SolverMismatch(format!("{method:?} cannot be used with {what}"))
}

pub(crate) fn check_scores(theta: &[f64]) -> Result<()> {
    if theta.is_empty() {
        return Err(FyError::InvalidParameter("empty score vector".into()));
    }
    if let Some(i) = theta.iter().position(|v| !v.is_finite()) {
        return Err(FyError::InvalidParameter(format!(
            "score {i} is not finite ({})",
            theta[i]
        )));
    }
    Ok(())
}

/// Feasibility of a prediction for its loss domain.
pub fn is_feasible(spec: &FyLossSpec, p: &[f64]) -> bool {
    check_membership(p, spec.domain).is_ok()
}
