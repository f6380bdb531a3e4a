//! Linear label-proportion models trained with Fenchel-Young losses.
//!
//! The objective is `R(W) = sum_i L(W x_i; y_i) + lambda/2 ||W||_F^2` with
//! gradient `(Yhat - Y)^T X + lambda W`. Per-row predictions run in parallel;
//! the loss sum is reduced in row order so results are reproducible.

mod features;
mod optim;
mod synthetic;

pub use features::FeatureMatrix;
pub use optim::{minimize, LogEntry, Optimizer, OptimizerConfig, TrainLog, TrainStatus};
pub use synthetic::{synthetic_proportions, synthetic_raw, SyntheticConfig};

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{check_version, FeatureStats, FORMAT_VERSION};
use crate::error::{FyError, Result};
use crate::loss::{loss_value, FyLossSpec};
use crate::prediction::predict;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    /// `d x p`.
    pub weights: Array2<f64>,
    pub loss_spec: FyLossSpec,
    pub lambda: f64,
    pub train_log: Option<TrainLog>,
    /// Standardization the model was trained with, if any.
    pub feature_stats: Option<FeatureStats>,
}

impl LinearModel {
    pub fn zeros(loss_spec: FyLossSpec, lambda: f64, d: usize, p: usize) -> Self {
        LinearModel {
            weights: Array2::zeros((d, p)),
            loss_spec,
            lambda,
            train_log: None,
            feature_stats: None,
        }
    }

    /// Row-wise `yhat(W x_i)`.
    pub fn predict(&self, x: &impl FeatureMatrix) -> Result<Array2<f64>> {
        check_cols(&self.weights, x)?;
        let theta = x.scores(&self.weights);
        let rows = (0..theta.nrows())
            .into_par_iter()
            .map(|i| predict(&self.loss_spec, &theta.row(i).to_vec()).map(|r| r.p.into_inner()))
            .collect::<Result<Vec<_>>>()?;
        let mut out = Array2::zeros(theta.dim());
        for (mut dst, src) in out.rows_mut().into_iter().zip(rows) {
            dst.assign(&ndarray::ArrayView1::from(&src));
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(&ModelDocument {
            format_version: FORMAT_VERSION,
            model: self.clone(),
        })
        .map_err(|e| FyError::Io(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text).map_err(|e| FyError::Parse {
            line: e.line(),
            column: e.column(),
            reason: e.to_string(),
        })?;
        check_version(doc.format_version)?;
        if doc.model.weights.iter().any(|v| !v.is_finite()) {
            return Err(FyError::InvalidParameter(
                "model weights must be finite".into(),
            ));
        }
        Ok(doc.model)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    format_version: u32,
    model: LinearModel,
}

fn check_cols(w: &Array2<f64>, x: &impl FeatureMatrix) -> Result<()> {
    if w.ncols() != x.n_cols() {
        return Err(FyError::DimensionMismatch {
            expected: w.ncols(),
            got: x.n_cols(),
        });
    }
    Ok(())
}

fn check_shapes(w: &Array2<f64>, x: &impl FeatureMatrix, y: &Array2<f64>) -> Result<()> {
    check_cols(w, x)?;
    if x.n_rows() != y.nrows() {
        return Err(FyError::DimensionMismatch {
            expected: x.n_rows(),
            got: y.nrows(),
        });
    }
    if w.nrows() != y.ncols() {
        return Err(FyError::DimensionMismatch {
            expected: w.nrows(),
            got: y.ncols(),
        });
    }
    Ok(())
}

/// `(R(W), grad R(W))` at the model's weights.
pub fn objective_and_gradient(
    model: &LinearModel,
    x: &impl FeatureMatrix,
    y: &Array2<f64>,
) -> Result<(f64, Array2<f64>)> {
    objective(&model.loss_spec, model.lambda, &model.weights, x, y)
}

fn objective(
    spec: &FyLossSpec,
    lambda: f64,
    w: &Array2<f64>,
    x: &impl FeatureMatrix,
    y: &Array2<f64>,
) -> Result<(f64, Array2<f64>)> {
    check_shapes(w, x, y)?;
    let theta = x.scores(w);
    if theta.iter().any(|v| !v.is_finite()) {
        return Ok((f64::INFINITY, Array2::zeros(w.dim())));
    }
    let rows = (0..theta.nrows())
        .into_par_iter()
        .map(|i| loss_value(spec, &theta.row(i).to_vec(), &y.row(i).to_vec()))
        .collect::<Result<Vec<_>>>()?;
    let mut value = 0.0;
    let mut resid = Array2::zeros(theta.dim());
    for (mut r, e) in resid.rows_mut().into_iter().zip(&rows) {
        value += e.value;
        r.assign(&ndarray::ArrayView1::from(&e.gradient));
    }
    let mut grad = x.transpose_times(&resid);
    grad.scaled_add(lambda, w);
    value += 0.5 * lambda * w.iter().map(|v| v * v).sum::<f64>();
    Ok((value, grad))
}

/// Minimizes `R(W)` from `W = 0`.
pub fn fit(
    spec: &FyLossSpec,
    lambda: f64,
    x: &impl FeatureMatrix,
    y: &Array2<f64>,
    opt: &OptimizerConfig,
) -> Result<LinearModel> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(FyError::InvalidParameter(format!(
            "lambda must be >= 0, got {lambda}"
        )));
    }
    if x.n_rows() == 0 {
        return Err(FyError::InvalidParameter("need at least one sample".into()));
    }
    let d = y.ncols();
    let p = x.n_cols();
    check_shapes(&Array2::zeros((d, p)), x, y)?;
    let method = opt.optimizer.unwrap_or(if spec.is_strictly_convex() {
        Optimizer::Lbfgs
    } else {
        Optimizer::Subgradient
    });
    let f = |flat: &[f64]| -> Result<(f64, Vec<f64>)> {
        let w = Array2::from_shape_vec((d, p), flat.to_vec()).expect("shape matches");
        let (v, g) = objective(spec, lambda, &w, x, y)?;
        Ok((v, g.into_raw_vec_and_offset().0))
    };
    let (flat, log) = minimize(f, vec![0.0; d * p], method, opt)?;
    Ok(LinearModel {
        weights: Array2::from_shape_vec((d, p), flat).expect("shape matches"),
        loss_spec: *spec,
        lambda,
        train_log: Some(log),
        feature_stats: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mean_js: f64,
    pub mean_mse: f64,
    pub n: usize,
    /// Average number of nonzero predicted coordinates.
    pub mean_support: f64,
}

/// Mean Jensen-Shannon divergence and mean `1/2 ||p - y||^2`.
pub fn evaluate(
    model: &LinearModel,
    x: &impl FeatureMatrix,
    y: &Array2<f64>,
) -> Result<MetricReport> {
    check_shapes(&model.weights, x, y)?;
    let p = model.predict(x)?;
    Ok(metrics(&p, y))
}

/// Metrics for given predictions `p` against targets `y` (both `n x d`).
pub fn metrics(p: &Array2<f64>, y: &Array2<f64>) -> MetricReport {
    let n = p.nrows();
    let mut js = 0.0;
    let mut mse = 0.0;
    let mut support = 0usize;
    for (pr, yr) in p.rows().into_iter().zip(y.rows()) {
        let (pr, yr) = (pr.to_vec(), yr.to_vec());
        js += jensen_shannon(&pr, &yr);
        mse += 0.5
            * pr.iter()
                .zip(&yr)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>();
        support += pr.iter().filter(|&&v| v > 0.0).count();
    }
    let denom = n.max(1) as f64;
    MetricReport {
        mean_js: js / denom,
        mean_mse: mse / denom,
        n,
        mean_support: support as f64 / denom,
    }
}

/// `1/2 KL(p || m) + 1/2 KL(y || m)` with `m = (p + y)/2` and `0 log 0 = 0`.
pub fn jensen_shannon(p: &[f64], y: &[f64]) -> f64 {
    let kl_to_mid = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .zip(b)
            .filter(|(&ai, _)| ai > 0.0)
            .map(|(&ai, &bi)| ai * (2.0 * ai / (ai + bi)).ln())
            .sum()
    };
    (0.5 * (kl_to_mid(p, y) + kl_to_mid(y, p))).max(0.0)
}
