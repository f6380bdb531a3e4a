//! Fenchel-Young losses `L(theta; y) = Omega*(theta) + Omega(y) - <theta, y>`.
//!
//! The conjugate is always evaluated through the prediction,
//! `Omega*(theta) = <theta, yhat> - Omega(yhat)`, so every regularizer shares
//! one code path. Log-sum-exp and `max` remain available as independent
//! checks for the Shannon and zero regularizers.

use serde::{Deserialize, Serialize};

use crate::entropy::{check_membership, Domain, EntropySpec, ProbabilityVector};
use crate::error::{FyError, Result};
use crate::prediction::{self, closed_form, predict, SolverPolicy};

/// The `Omega` of a Fenchel-Young loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regularizer {
    /// `Omega = -H`.
    #[serde(rename = "entropy")]
    EntropyNeg(EntropySpec),
    /// `Omega(p) = 1/2 ||p||^2`.
    SquaredL2,
    /// `Omega = 0` on the simplex (perceptron).
    Zero,
    /// `Omega(p) = <p, e_k - 1>`, defined only relative to a label `k`.
    HingeLinear,
}

/// A fully specified loss: regularizer, domain, solver and temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLossSpec", into = "RawLossSpec")]
pub struct FyLossSpec {
    pub regularizer: Regularizer,
    pub domain: Domain,
    pub solver: SolverPolicy,
    /// Multiplies the regularizer: the loss is built from `temperature * Omega`.
    pub temperature: f64,
}

impl FyLossSpec {
    pub fn new(regularizer: Regularizer, domain: Domain) -> Result<Self> {
        let regularizer = match (regularizer, domain) {
            (Regularizer::HingeLinear | Regularizer::Zero, Domain::Simplex) => regularizer,
            (Regularizer::HingeLinear | Regularizer::Zero, _) => {
                return Err(FyError::InvalidParameter(
                    "hinge and perceptron losses live on the simplex".into(),
                ))
            }
            (Regularizer::SquaredL2, Domain::Simplex | Domain::FullSpace) => regularizer,
            (Regularizer::SquaredL2, Domain::Box) => {
                return Err(FyError::InvalidParameter(
                    "the squared regularizer supports the simplex or the full space".into(),
                ))
            }
            (Regularizer::EntropyNeg(spec), d) => Regularizer::EntropyNeg(spec.with_domain(d)?),
        };
        Ok(FyLossSpec {
            regularizer,
            domain,
            solver: SolverPolicy::default(),
            temperature: 1.0,
        })
    }

    pub fn entropy(spec: EntropySpec) -> Self {
        let domain = spec.domain();
        Self::new(Regularizer::EntropyNeg(spec), domain).expect("entropy domains are valid")
    }

    /// Multinomial logistic loss.
    pub fn logistic() -> Self {
        Self::entropy(EntropySpec::shannon())
    }

    pub fn tsallis(alpha: f64) -> Result<Self> {
        Ok(Self::entropy(EntropySpec::tsallis(alpha)?))
    }

    /// `1/2 ||p||^2` on the simplex.
    pub fn sparsemax() -> Self {
        Self::new(Regularizer::SquaredL2, Domain::Simplex).unwrap()
    }

    /// `1/2 ||y - theta||^2`.
    pub fn squared() -> Self {
        Self::new(Regularizer::SquaredL2, Domain::FullSpace).unwrap()
    }

    pub fn perceptron() -> Self {
        Self::new(Regularizer::Zero, Domain::Simplex).unwrap()
    }

    pub fn hinge() -> Self {
        Self::new(Regularizer::HingeLinear, Domain::Simplex).unwrap()
    }

    pub fn one_vs_all_logistic() -> Self {
        Self::entropy(EntropySpec::shannon().with_domain(Domain::Box).unwrap())
    }

    pub fn with_solver(mut self, solver: SolverPolicy) -> Self {
        self.solver = solver;
        self
    }

    pub fn with_temperature(mut self, temperature: f64) -> Result<Self> {
        if !(temperature.is_finite() && temperature > 0.0) {
            return Err(FyError::InvalidParameter(format!(
                "temperature must be positive, got {temperature}"
            )));
        }
        self.temperature = temperature;
        Ok(self)
    }

    /// False for regularizers whose loss is only subdifferentiable.
    pub fn is_strictly_convex(&self) -> bool {
        !matches!(
            self.regularizer,
            Regularizer::Zero | Regularizer::HingeLinear
        )
    }

    /// `Omega(p)` for a feasible `p`; the hinge regularizer needs a label.
    pub fn omega(&self, p: &[f64]) -> Result<f64> {
        check_membership(p, self.domain)?;
        self.omega_unchecked(p)
    }

    fn omega_unchecked(&self, p: &[f64]) -> Result<f64> {
        let s = self.temperature;
        Ok(match self.regularizer {
            Regularizer::EntropyNeg(spec) => match self.domain {
                Domain::Box => {
                    let clipped: Vec<f64> = p.iter().map(|v| v.clamp(0.0, 1.0)).collect();
                    -s * spec.value(&clipped)?
                }
                _ => -s * spec.simplex_value(p),
            },
            Regularizer::SquaredL2 => 0.5 * s * p.iter().map(|v| v * v).sum::<f64>(),
            Regularizer::Zero => 0.0,
            Regularizer::HingeLinear => {
                return Err(FyError::InvalidParameter(
                    "the hinge regularizer depends on the label".into(),
                ))
            }
        })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLossSpec {
    regularizer: Regularizer,
    #[serde(default)]
    domain: Option<Domain>,
    #[serde(default)]
    solver: SolverPolicy,
    #[serde(default = "one")]
    temperature: f64,
}

fn one() -> f64 {
    1.0
}

impl TryFrom<RawLossSpec> for FyLossSpec {
    type Error = FyError;

    fn try_from(raw: RawLossSpec) -> Result<Self> {
        let domain = raw.domain.unwrap_or(match raw.regularizer {
            Regularizer::EntropyNeg(spec) => spec.domain(),
            _ => Domain::Simplex,
        });
        raw.solver.validate()?;
        FyLossSpec::new(raw.regularizer, domain)?
            .with_solver(raw.solver)
            .with_temperature(raw.temperature)
    }
}

impl From<FyLossSpec> for RawLossSpec {
    fn from(spec: FyLossSpec) -> Self {
        RawLossSpec {
            regularizer: spec.regularizer,
            domain: Some(spec.domain),
            solver: spec.solver,
            temperature: spec.temperature,
        }
    }
}

/// Loss value together with everything computed on the way.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossEvaluation {
    pub value: f64,
    /// `yhat - y`; a subgradient when `subgradient` is set.
    pub gradient: Vec<f64>,
    pub prediction: ProbabilityVector,
    /// `Omega*(theta)`.
    pub conjugate: f64,
    pub subgradient: bool,
}

/// `Omega*(theta)`.
pub fn conjugate_value(spec: &FyLossSpec, theta: &[f64]) -> Result<f64> {
    if spec.regularizer == Regularizer::HingeLinear {
        return Err(FyError::InvalidParameter(
            "the hinge conjugate depends on the label".into(),
        ));
    }
    let r = predict(spec, theta)?;
    Ok(dot(theta, &r.p) - spec.omega_unchecked(&r.p)?)
}

pub fn loss_value(spec: &FyLossSpec, theta: &[f64], y: &[f64]) -> Result<LossEvaluation> {
    prediction::check_scores(theta)?;
    if theta.len() != y.len() {
        return Err(FyError::DimensionMismatch {
            expected: theta.len(),
            got: y.len(),
        });
    }
    check_membership(y, spec.domain)?;
    match spec.regularizer {
        Regularizer::HingeLinear => {
            let k = one_hot_index(y)?;
            let augmented: Vec<f64> = theta
                .iter()
                .enumerate()
                .map(|(i, &t)| t + if i == k { 0.0 } else { spec.temperature })
                .collect();
            let i = closed_form::argmax_index(&augmented);
            let conjugate = augmented[i];
            let mut gradient = vec![0.0; theta.len()];
            gradient[i] += 1.0;
            gradient[k] -= 1.0;
            Ok(LossEvaluation {
                value: conjugate - theta[k],
                gradient,
                prediction: ProbabilityVector::vertex(theta.len(), i),
                conjugate,
                subgradient: true,
            })
        }
        reg => {
            if reg == Regularizer::Zero {
                one_hot_index(y)?;
            }
            let r = predict(spec, theta)?;
            let conjugate = dot(theta, &r.p) - spec.omega_unchecked(&r.p)?;
            let value = conjugate + spec.omega_unchecked(y)? - dot(theta, y);
            let gradient = r.p.iter().zip(y).map(|(p, y)| p - y).collect();
            Ok(LossEvaluation {
                value,
                gradient,
                prediction: r.p,
                conjugate,
                subgradient: !spec.is_strictly_convex(),
            })
        }
    }
}

/// `yhat(theta) - y`.
pub fn loss_gradient(spec: &FyLossSpec, theta: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    Ok(loss_value(spec, theta, y)?.gradient)
}

/// `t * L(theta / t; y)`, which equals the loss built from `t * Omega`.
pub fn temperature_scaled_loss(spec: &FyLossSpec, t: f64, theta: &[f64], y: &[f64]) -> Result<f64> {
    if !(t.is_finite() && t > 0.0) {
        return Err(FyError::InvalidParameter(format!(
            "temperature must be positive, got {t}"
        )));
    }
    let scaled: Vec<f64> = theta.iter().map(|v| v / t).collect();
    Ok(t * loss_value(spec, &scaled, y)?.value)
}

/// Bregman divergence of `Omega = -H`:
/// `Omega(y) - Omega(p) - <grad Omega(p), y - p>`.
pub fn bregman_divergence(spec: &EntropySpec, y: &[f64], p: &[f64]) -> Result<f64> {
    if y.len() != p.len() {
        return Err(FyError::DimensionMismatch {
            expected: p.len(),
            got: y.len(),
        });
    }
    let grad = spec.gradient(p)?;
    let hy = spec.value(y)?;
    let hp = spec.value(p)?;
    let lin: f64 = grad
        .iter()
        .zip(y.iter().zip(p))
        .map(|(g, (y, p))| g * (y - p))
        .sum();
    Ok(-hy + hp + lin)
}

/// `(B(y || yhat(theta)), L(theta; y))`; the first never exceeds the second.
pub fn bregman_bound_check(spec: &EntropySpec, theta: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    bregman_bound_check_with(spec, theta, y, &SolverPolicy::default())
}

pub fn bregman_bound_check_with(
    spec: &EntropySpec,
    theta: &[f64],
    y: &[f64],
    policy: &SolverPolicy,
) -> Result<(f64, f64)> {
    let loss = FyLossSpec::entropy(*spec).with_solver(*policy);
    let eval = loss_value(&loss, theta, y)?;
    let lower = bregman_divergence(spec, y, &eval.prediction)?;
    Ok((lower, eval.value))
}

fn one_hot_index(y: &[f64]) -> Result<usize> {
    let k = closed_form::argmax_index(y);
    let ok = y.iter().enumerate().all(|(i, &v)| {
        if i == k {
            (v - 1.0).abs() <= 1e-9
        } else {
            v.abs() <= 1e-9
        }
    });
    if ok {
        Ok(k)
    } else {
        Err(FyError::OneHotRequired(format!("{y:?}")))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    const LN2: f64 = std::f64::consts::LN_2;

    #[test]
    fn conjugate_examples() {
        assert!(
            (conjugate_value(&FyLossSpec::logistic(), &[0.0, 0.0]).unwrap() - LN2).abs() < 1e-15
        );
        assert_eq!(
            conjugate_value(&FyLossSpec::perceptron(), &[3.0, 1.0, 2.0]).unwrap(),
            3.0
        );
        let t2 = FyLossSpec::tsallis(2.0).unwrap();
        assert!((conjugate_value(&t2, &[0.0, 0.0]).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn loss_value_examples() {
        let l = loss_value(&FyLossSpec::logistic(), &[0.0, 0.0], &[1.0, 0.0]).unwrap();
        assert!((l.value - LN2).abs() < 1e-15);

        let l = loss_value(&FyLossSpec::sparsemax(), &[2.0, 0.0], &[1.0, 0.0]).unwrap();
        assert_eq!(l.value, 0.0);
        assert_eq!(l.gradient, vec![0.0, 0.0]);

        let l = loss_value(&FyLossSpec::squared(), &[0.3, -1.0], &[0.3, -1.0]).unwrap();
        assert!(l.value.abs() < 1e-15);

        let l = loss_value(&FyLossSpec::hinge(), &[0.0; 3], &[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(l.value, 1.0);
        assert!(l.subgradient);

        let l = loss_value(&FyLossSpec::one_vs_all_logistic(), &[0.0, 0.0], &[1.0, 0.0]).unwrap();
        assert!((l.value - 2.0 * LN2).abs() < 1e-15);
    }

    #[test]
    fn loss_gradient_examples() {
        let g = loss_gradient(&FyLossSpec::logistic(), &[0.0, 0.0], &[1.0, 0.0]).unwrap();
        assert_eq!(g, vec![-0.5, 0.5]);
        // yhat = y gives a zero gradient
        let g = loss_gradient(
            &FyLossSpec::sparsemax(),
            &[0.7, 0.3, -2.0],
            &[0.7, 0.3, 0.0],
        )
        .unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn temperature_examples() {
        let spec = FyLossSpec::logistic();
        let y = [1.0, 0.0];
        let theta = [0.4, -0.1];
        assert_eq!(
            temperature_scaled_loss(&spec, 1.0, &theta, &y).unwrap(),
            loss_value(&spec, &theta, &y).unwrap().value
        );
        let v = temperature_scaled_loss(&spec, 2.0, &[0.0, 0.0], &y).unwrap();
        assert!((v - 2.0 * LN2).abs() < 1e-15);
    }

    #[test]
    fn perceptron_and_hinge_need_one_hot() {
        assert!(matches!(
            loss_value(&FyLossSpec::perceptron(), &[0.0, 1.0], &[0.5, 0.5]),
            Err(FyError::OneHotRequired(_))
        ));
        assert!(matches!(
            loss_value(&FyLossSpec::hinge(), &[0.0, 1.0], &[0.5, 0.5]),
            Err(FyError::OneHotRequired(_))
        ));
        assert!(matches!(
            loss_value(&FyLossSpec::logistic(), &[0.0, 1.0], &[0.5, 0.6]),
            Err(FyError::DomainViolation(_))
        ));
    }

    #[test]
    fn bregman_examples() {
        let t2 = EntropySpec::tsallis(2.0).unwrap();
        let y = [0.2, 0.5, 0.3];
        let p = [0.1, 0.1, 0.8];
        assert!(bregman_divergence(&t2, &y, &y).unwrap().abs() < 1e-15);
        let half_sq: f64 = 0.5
            * y.iter()
                .zip(&p)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
        assert!((bregman_divergence(&t2, &y, &p).unwrap() - half_sq).abs() < 1e-15);
        let kl: f64 = y.iter().zip(&p).map(|(a, b)| a * (a / b).ln()).sum();
        let s = EntropySpec::shannon();
        assert!((bregman_divergence(&s, &y, &p).unwrap() - kl).abs() < 1e-15);
        assert!(matches!(
            bregman_divergence(&s, &y, &[0.0, 0.2, 0.8]),
            Err(FyError::BoundaryGradientUndefined { index: 0 })
        ));
    }

    #[test]
    fn bregman_bound_zero_case() {
        // sparsemax of (0.7, 0.3, -2) is (0.7, 0.3, 0)
        let (lo, hi) = bregman_bound_check(
            &EntropySpec::tsallis(2.0).unwrap(),
            &[0.7, 0.3, -2.0],
            &[0.7, 0.3, 0.0],
        )
        .unwrap();
        assert!(lo.abs() < 1e-15 && hi.abs() < 1e-15);
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = FyLossSpec::tsallis(1.5)
            .unwrap()
            .with_solver(SolverPolicy::new(prediction::Method::Bisection).with_tolerance(1e-10));
        let s = serde_json::to_string(&spec).unwrap();
        let back: FyLossSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, spec);
        let parsed: FyLossSpec = serde_json::from_str(
            r#"{"regularizer": {"entropy": {"family": "shannon"}}, "domain": "box"}"#,
        )
        .unwrap();
        assert_eq!(parsed, FyLossSpec::one_vs_all_logistic());
        assert!(serde_json::from_str::<FyLossSpec>(
            r#"{"regularizer": "hinge_linear", "domain": "box"}"#
        )
        .is_err());
        assert!(serde_json::from_str::<FyLossSpec>(
            r#"{"regularizer": "squared_l2", "temperature": -1}"#
        )
        .is_err());
    }
}
