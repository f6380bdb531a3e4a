//! Solver timing and prediction/loss sweeps.
//!
//! [`bench_solvers`] draws `theta ~ N(0, sigma I)` with `ln sigma ~ U(-4, 4)`,
//! computes a reference solution, and for each solver tightens the solver
//! tolerance until `||p - p*||_2` reaches the target error, then times that
//! configuration. [`sweep_curves`] tabulates entropy, prediction and loss of
//! the binary problem `theta = (t, 0)`.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::entropy::EntropySpec;
use crate::error::{FyError, Result};
use crate::loss::{loss_value, FyLossSpec};
use crate::prediction::{predict_with, sparsemax_exact, Method, SolverPolicy};

/// Accuracy every timed solve must reach.
pub const TARGET_ERROR: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub dims: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    /// Tsallis parameter of the benchmarked prediction.
    pub alpha: f64,
    pub solvers: Vec<Method>,
    pub warmups: usize,
    /// Timed repetitions per trial; the median is recorded.
    pub repeats: usize,
    pub target_error: f64,
    /// Wall-clock budget; remaining trials are skipped once exceeded.
    pub budget: Option<Duration>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            dims: vec![10, 100, 1_000, 10_000],
            trials: 200,
            seed: 0,
            alpha: 1.5,
            solvers: vec![Method::Bisection, Method::Brent, Method::ProjectedGradient],
            warmups: 5,
            repeats: 5,
            target_error: TARGET_ERROR,
            budget: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub solver: Method,
    pub dimension: usize,
    pub trial: usize,
    pub trial_sigma: f64,
    /// Median over the timed repeats; `None` for failures.
    pub time_to_tolerance_ns: Option<u64>,
    pub achieved_error: Option<f64>,
    /// Solver tolerance that first met the target error.
    pub solver_tolerance: Option<f64>,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub solver: Method,
    pub dimension: usize,
    pub trials: usize,
    pub success_rate: f64,
    /// Median and 0.5% / 99.5% quantiles of the successful trial times;
    /// `None` when every trial failed.
    pub median_ns: Option<f64>,
    pub lo_ns: Option<f64>,
    pub hi_ns: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub records: Vec<BenchRecord>,
    pub summaries: Vec<BenchSummary>,
    /// True when the budget cut the run short.
    pub truncated: bool,
}

impl BenchReport {
    pub fn summary(&self, solver: Method, dimension: usize) -> Option<&BenchSummary> {
        self.summaries
            .iter()
            .find(|s| s.solver == solver && s.dimension == dimension)
    }
}

/// One benchmark input: `(theta, sigma)`.
pub fn draw_theta(rng: &mut impl Rng, d: usize) -> (Vec<f64>, f64) {
    let sigma = rng.random_range(-4.0..4.0_f64).exp();
    // covariance sigma * I
    let sd = sigma.sqrt();
    let theta = (0..d)
        .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
        .collect();
    (theta, sigma)
}

/// Exact projection for `alpha = 2`, Brent at tolerance `1e-12` otherwise.
pub fn reference_solution(alpha: f64, theta: &[f64]) -> Result<Vec<f64>> {
    if alpha == 2.0 {
        return Ok(sparsemax_exact(theta));
    }
    let spec = FyLossSpec::tsallis(alpha)?;
    let policy = SolverPolicy::new(Method::Brent).with_tolerance(1e-12);
    Ok(predict_with(&spec, theta, &policy)?.p.into_inner())
}

fn l2_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Loosest tolerance in `1e-3, 1e-4, ..., 1e-15` reaching the target error.
fn calibrate(
    spec: &FyLossSpec,
    method: Method,
    theta: &[f64],
    reference: &[f64],
    target: f64,
) -> Option<(SolverPolicy, f64)> {
    for k in 3..=15 {
        let policy = SolverPolicy::new(method).with_tolerance(10f64.powi(-k));
        let r = predict_with(spec, theta, &policy).ok()?;
        let err = l2_dist(&r.p, reference);
        if err < target {
            return Some((policy, err));
        }
    }
    None
}

fn time_solve(
    spec: &FyLossSpec,
    theta: &[f64],
    policy: &SolverPolicy,
    warmups: usize,
    repeats: usize,
) -> u64 {
    for _ in 0..warmups {
        std::hint::black_box(predict_with(spec, theta, policy).ok());
    }
    let mut times: Vec<u64> = (0..repeats.max(1))
        .map(|_| {
            let start = Instant::now();
            std::hint::black_box(predict_with(spec, std::hint::black_box(theta), policy).ok());
            start.elapsed().as_nanos() as u64
        })
        .collect();
    times.sort_unstable();
    times[times.len() / 2]
}

/// Times each solver on seeded random inputs. Failures become rows with
/// `success = false`.
pub fn bench_solvers(cfg: &BenchConfig) -> Result<BenchReport> {
    if cfg.trials == 0 {
        return Err(FyError::InvalidParameter("trials must be >= 1".into()));
    }
    let spec = FyLossSpec::tsallis(cfg.alpha)?;
    let start = Instant::now();
    let mut records = Vec::new();
    let mut truncated = false;
    'dims: for &d in &cfg.dims {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (d as u64).rotate_left(32));
        for trial in 0..cfg.trials {
            if cfg.budget.is_some_and(|b| start.elapsed() > b) {
                truncated = true;
                break 'dims;
            }
            let (theta, sigma) = draw_theta(&mut rng, d);
            let reference = reference_solution(cfg.alpha, &theta)?;
            for &solver in &cfg.solvers {
                let rec = match calibrate(&spec, solver, &theta, &reference, cfg.target_error) {
                    Some((policy, err)) => BenchRecord {
                        solver,
                        dimension: d,
                        trial,
                        trial_sigma: sigma,
                        time_to_tolerance_ns: Some(time_solve(
                            &spec,
                            &theta,
                            &policy,
                            cfg.warmups,
                            cfg.repeats,
                        )),
                        achieved_error: Some(err),
                        solver_tolerance: Some(policy.tolerance),
                        success: true,
                    },
                    None => BenchRecord {
                        solver,
                        dimension: d,
                        trial,
                        trial_sigma: sigma,
                        time_to_tolerance_ns: None,
                        achieved_error: None,
                        solver_tolerance: None,
                        success: false,
                    },
                };
                records.push(rec);
            }
        }
    }
    let summaries = summarize(&records, cfg);
    Ok(BenchReport {
        records,
        summaries,
        truncated,
    })
}

fn summarize(records: &[BenchRecord], cfg: &BenchConfig) -> Vec<BenchSummary> {
    let mut out = Vec::new();
    for &d in &cfg.dims {
        for &solver in &cfg.solvers {
            let rows: Vec<&BenchRecord> = records
                .iter()
                .filter(|r| r.dimension == d && r.solver == solver)
                .collect();
            if rows.is_empty() {
                continue;
            }
            let mut times: Vec<f64> = rows
                .iter()
                .filter_map(|r| r.time_to_tolerance_ns)
                .map(|t| t as f64)
                .collect();
            times.sort_by(f64::total_cmp);
            out.push(BenchSummary {
                solver,
                dimension: d,
                trials: rows.len(),
                success_rate: times.len() as f64 / rows.len() as f64,
                median_ns: quantile(&times, 0.5),
                lo_ns: quantile(&times, 0.005),
                hi_ns: quantile(&times, 0.995),
            });
        }
    }
    out
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> Option<f64> {
    let n = sorted.len();
    if n == 0 {
        return None;
    }
    let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    Some(if i + 1 < n {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub entropy: String,
    pub t: f64,
    /// `H(yhat(theta))` at `theta = (t, 0)`.
    pub h: f64,
    pub yhat1: f64,
    /// `L((t, 0); e_1)`.
    pub loss: f64,
}

/// Binary sweep `theta = (t, 0)` for each entropy and each `t`.
pub fn sweep_curves(specs: &[EntropySpec], ts: &[f64]) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(specs.len() * ts.len());
    for spec in specs {
        let loss = FyLossSpec::entropy(*spec);
        for &t in ts {
            let e = loss_value(&loss, &[t, 0.0], &[1.0, 0.0])?;
            rows.push(SweepRow {
                entropy: spec.to_string(),
                t,
                h: spec.value(&e.prediction)?,
                yhat1: e.prediction[0],
                loss: e.value,
            });
        }
    }
    Ok(rows)
}

/// `n` evenly spaced points on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}
