//! Full-batch minimizers over a flat parameter vector.

use serde::{Deserialize, Serialize};

use crate::error::{FyError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    /// Limited-memory BFGS with Armijo backtracking.
    Lbfgs,
    /// Steepest descent with Armijo backtracking.
    GradientDescent,
    /// Normalized subgradient steps of size `step / sqrt(t)`.
    Subgradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    /// `None` picks L-BFGS for smooth losses and subgradient steps otherwise.
    pub optimizer: Option<Optimizer>,
    pub max_iterations: usize,
    /// Stop once `||grad||_inf` falls to this.
    pub gradient_tolerance: f64,
    pub memory: usize,
    pub armijo_c1: f64,
    pub max_backtracks: usize,
    /// Initial step of the subgradient schedule.
    pub subgradient_step: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            optimizer: None,
            max_iterations: 1000,
            gradient_tolerance: 1e-5,
            memory: 10,
            armijo_c1: 1e-4,
            max_backtracks: 60,
            subgradient_step: 1.0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(FyError::InvalidParameter(
                "max_iterations must be >= 1".into(),
            ));
        }
        if !(self.gradient_tolerance >= 0.0) || !(self.armijo_c1 > 0.0 && self.armijo_c1 < 1.0) {
            return Err(FyError::InvalidParameter(
                "gradient tolerance must be >= 0 and armijo_c1 in (0, 1)".into(),
            ));
        }
        if !(self.subgradient_step > 0.0) {
            return Err(FyError::InvalidParameter(
                "subgradient_step must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainStatus {
    Converged,
    MaxIterations,
    /// No step satisfied the sufficient-decrease test.
    LineSearchStalled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub iteration: usize,
    pub objective: f64,
    /// `||grad||_inf`.
    pub gradient_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub optimizer: Optimizer,
    pub entries: Vec<LogEntry>,
    pub status: TrainStatus,
}

impl TrainLog {
    /// True when every logged objective is at most the previous one.
    pub fn is_monotone(&self) -> bool {
        self.entries
            .windows(2)
            .all(|w| w[1].objective <= w[0].objective)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Minimizes `f`, which returns the objective and its (sub)gradient.
pub fn minimize<F>(
    f: F,
    x0: Vec<f64>,
    opt: Optimizer,
    cfg: &OptimizerConfig,
) -> Result<(Vec<f64>, TrainLog)>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    cfg.validate()?;
    match opt {
        Optimizer::Lbfgs => descent(f, x0, cfg.memory, Optimizer::Lbfgs, cfg),
        Optimizer::GradientDescent => descent(f, x0, 0, Optimizer::GradientDescent, cfg),
        Optimizer::Subgradient => subgradient(f, x0, cfg),
    }
}

/// Quasi-Newton (or steepest descent with `memory == 0`) with Armijo halving.
/// Only accepted steps are logged, so the logged objective is nonincreasing.
fn descent<F>(
    mut f: F,
    mut x: Vec<f64>,
    memory: usize,
    kind: Optimizer,
    cfg: &OptimizerConfig,
) -> Result<(Vec<f64>, TrainLog)>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let (mut fx, mut g) = f(&x)?;
    if !fx.is_finite() {
        return Err(FyError::NonFiniteObjective(0));
    }
    let mut log = vec![LogEntry {
        iteration: 0,
        objective: fx,
        gradient_norm: inf_norm(&g),
    }];
    let mut hist: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::with_capacity(memory);
    let mut status = TrainStatus::MaxIterations;
    let mut xn = vec![0.0; x.len()];

    'outer: for it in 1..=cfg.max_iterations {
        if inf_norm(&g) <= cfg.gradient_tolerance {
            status = TrainStatus::Converged;
            break;
        }
        loop {
            let mut dir = two_loop(&g, &hist);
            let mut gd = dot(&g, &dir);
            if !(gd < 0.0) {
                hist.clear();
                dir = g.iter().map(|v| -v).collect();
                gd = -dot(&g, &g);
            }
            let mut step = if hist.is_empty() {
                (1.0 / inf_norm(&g)).min(1.0)
            } else {
                1.0
            };
            let mut saw_finite = false;
            let mut accepted = None;
            for _ in 0..=cfg.max_backtracks {
                for ((n, &xi), &di) in xn.iter_mut().zip(&x).zip(&dir) {
                    *n = xi + step * di;
                }
                let (fnew, gnew) = f(&xn)?;
                if fnew.is_finite() {
                    saw_finite = true;
                    if fnew <= fx + cfg.armijo_c1 * step * gd && fnew < fx {
                        accepted = Some((fnew, gnew));
                        break;
                    }
                }
                step *= 0.5;
            }
            match accepted {
                Some((fnew, gnew)) => {
                    if memory > 0 {
                        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
                        let yv: Vec<f64> = gnew.iter().zip(&g).map(|(a, b)| a - b).collect();
                        let sy = dot(&s, &yv);
                        if sy > 1e-10 * dot(&s, &s).sqrt() * dot(&yv, &yv).sqrt() {
                            if hist.len() == memory {
                                hist.remove(0);
                            }
                            hist.push((s, yv, 1.0 / sy));
                        }
                    }
                    std::mem::swap(&mut x, &mut xn);
                    fx = fnew;
                    g = gnew;
                    log.push(LogEntry {
                        iteration: it,
                        objective: fx,
                        gradient_norm: inf_norm(&g),
                    });
                    break;
                }
                None if !hist.is_empty() => hist.clear(),
                None if !saw_finite => return Err(FyError::NonFiniteObjective(it)),
                None => {
                    status = TrainStatus::LineSearchStalled;
                    break 'outer;
                }
            }
        }
    }
    if status == TrainStatus::MaxIterations && inf_norm(&g) <= cfg.gradient_tolerance {
        status = TrainStatus::Converged;
    }
    Ok((
        x,
        TrainLog {
            optimizer: kind,
            entries: log,
            status,
        },
    ))
}

/// `-H g` from the stored curvature pairs.
fn two_loop(g: &[f64], hist: &[(Vec<f64>, Vec<f64>, f64)]) -> Vec<f64> {
    let mut q: Vec<f64> = g.to_vec();
    let mut alphas = vec![0.0; hist.len()];
    for (k, (s, y, rho)) in hist.iter().enumerate().rev() {
        let a = rho * dot(s, &q);
        alphas[k] = a;
        q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
    }
    if let Some((s, y, _)) = hist.last() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for (k, (s, y, rho)) in hist.iter().enumerate() {
        let b = rho * dot(y, &q);
        q.iter_mut()
            .zip(s)
            .for_each(|(qi, si)| *qi += (alphas[k] - b) * si);
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

/// Normalized subgradient method; returns the best iterate seen. The log
/// records the best objective so far.
fn subgradient<F>(mut f: F, mut x: Vec<f64>, cfg: &OptimizerConfig) -> Result<(Vec<f64>, TrainLog)>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let (mut fx, mut g) = f(&x)?;
    if !fx.is_finite() {
        return Err(FyError::NonFiniteObjective(0));
    }
    let mut best = (x.clone(), fx);
    let mut log = vec![LogEntry {
        iteration: 0,
        objective: fx,
        gradient_norm: inf_norm(&g),
    }];
    let mut status = TrainStatus::MaxIterations;
    for it in 1..=cfg.max_iterations {
        let norm = dot(&g, &g).sqrt();
        if norm <= cfg.gradient_tolerance {
            status = TrainStatus::Converged;
            break;
        }
        let step = cfg.subgradient_step / (it as f64).sqrt() / norm;
        x.iter_mut().zip(&g).for_each(|(xi, gi)| *xi -= step * gi);
        (fx, g) = f(&x)?;
        if !fx.is_finite() {
            return Err(FyError::NonFiniteObjective(it));
        }
        if fx < best.1 {
            best = (x.clone(), fx);
        }
        log.push(LogEntry {
            iteration: it,
            objective: best.1,
            gradient_norm: inf_norm(&g),
        });
    }
    Ok((
        best.0,
        TrainLog {
            optimizer: Optimizer::Subgradient,
            entries: log,
            status,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    // f(x) = sum_i c_i (x_i - i)^2 with mixed curvature
    fn quadratic(x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let mut f = 0.0;
        let mut g = vec![0.0; x.len()];
        for (i, &v) in x.iter().enumerate() {
            let c = 1.0 + 10.0 * i as f64;
            f += c * (v - i as f64).powi(2);
            g[i] = 2.0 * c * (v - i as f64);
        }
        Ok((f, g))
    }

    #[test]
    fn lbfgs_solves_quadratic() {
        let cfg = OptimizerConfig::default();
        let (x, log) = minimize(quadratic, vec![0.0; 5], Optimizer::Lbfgs, &cfg).unwrap();
        assert_eq!(log.status, TrainStatus::Converged);
        assert!(log.is_monotone());
        for (i, v) in x.iter().enumerate() {
            assert!((v - i as f64).abs() < 1e-5);
        }
    }

    #[test]
    fn gradient_descent_solves_quadratic() {
        let cfg = OptimizerConfig {
            max_iterations: 5000,
            ..OptimizerConfig::default()
        };
        let (x, log) = minimize(quadratic, vec![0.0; 3], Optimizer::GradientDescent, &cfg).unwrap();
        assert_eq!(log.status, TrainStatus::Converged);
        assert!(log.is_monotone());
        assert!((x[2] - 2.0).abs() < 1e-5);
    }

    #[test]
    fn subgradient_on_abs() {
        let f = |x: &[f64]| Ok((x[0].abs(), vec![x[0].signum()]));
        let cfg = OptimizerConfig {
            max_iterations: 2000,
            gradient_tolerance: 0.0,
            ..OptimizerConfig::default()
        };
        let (x, log) = minimize(f, vec![3.3], Optimizer::Subgradient, &cfg).unwrap();
        assert!(x[0].abs() < 0.05);
        assert!(log.is_monotone());
    }

    #[test]
    fn non_finite_start_is_an_error() {
        let f = |_: &[f64]| Ok((f64::NAN, vec![0.0]));
        let r = minimize(f, vec![0.0], Optimizer::Lbfgs, &OptimizerConfig::default());
        assert_eq!(r.unwrap_err(), FyError::NonFiniteObjective(0));
    }

    #[test]
    fn diverging_objective_is_an_error() {
        let f = |x: &[f64]| {
            let v = if x[0] == 0.0 { 1.0 } else { f64::INFINITY };
            Ok((v, vec![1.0]))
        };
        let r = minimize(f, vec![0.0], Optimizer::Lbfgs, &OptimizerConfig::default());
        assert_eq!(r.unwrap_err(), FyError::NonFiniteObjective(1));
    }
}
