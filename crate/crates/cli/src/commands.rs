use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{anyhow, bail, Context as _, Result};
use fy_core::bench::{bench_solvers, linspace, sweep_curves, BenchConfig};
use fy_core::data::{self, parse_multilabel, preprocess, Dataset, ParseOptions};
use fy_core::learn::{
    self, fit, LinearModel, MetricReport, OptimizerConfig, SyntheticConfig, TrainStatus,
};
use fy_core::margin::margin_report;
use fy_core::{loss_value, predict_with, EntropySpec, FyError, FyLossSpec, Method};
use serde::{Deserialize, Serialize};

use crate::output::{sink, write_csv, write_json, write_table};
use crate::{
    BenchArgs, EntropyParams, EvalArgs, Format, LossArgs, LossSelect, MarginArgs, PredictArgs,
    SweepArgs, SynthArgs, TrainArgs,
};

pub struct Context {
    pub seed: u64,
    pub tol: Option<f64>,
    pub format: Format,
    pub output: Option<PathBuf>,
}

impl Context {
    fn apply_tol(&self, mut spec: FyLossSpec) -> Result<FyLossSpec> {
        if let Some(t) = self.tol {
            spec.solver.tolerance = t;
            spec.solver.validate()?;
        }
        Ok(spec)
    }
}

fn parse_entropy(s: &str) -> Result<EntropySpec> {
    serde_json::from_str(s).with_context(|| format!("entropy spec {s:?}"))
}

/// JSON spec, or a family name completed by `params`.
fn entropy_arg(s: &str, params: &EntropyParams) -> Result<EntropySpec> {
    if s.trim_start().starts_with('{') {
        return parse_entropy(s);
    }
    let need = |v: Option<f64>, flag: &str| {
        v.ok_or_else(|| anyhow!(FyError::InvalidParameter(format!("{s} needs --{flag}"))))
    };
    Ok(match s.trim() {
        "shannon" => EntropySpec::shannon(),
        "tsallis" => EntropySpec::tsallis(need(params.alpha, "alpha")?)?,
        "norm" => EntropySpec::norm(need(params.q, "q")?)?,
        "squared_norm" => EntropySpec::squared_norm(need(params.q, "q")?)?,
        "renyi" => EntropySpec::renyi(need(params.beta, "beta")?)?,
        other => bail!(FyError::InvalidParameter(format!(
            "unknown entropy {other:?}"
        ))),
    })
}

fn named_loss(name: &str) -> Result<FyLossSpec> {
    Ok(match name {
        "logistic" => FyLossSpec::logistic(),
        "sparsemax" => FyLossSpec::sparsemax(),
        "squared" => FyLossSpec::squared(),
        "perceptron" => FyLossSpec::perceptron(),
        "hinge" => FyLossSpec::hinge(),
        "one_vs_all" => FyLossSpec::one_vs_all_logistic(),
        other => match other.strip_prefix("tsallis:") {
            Some(a) => FyLossSpec::tsallis(a.parse().with_context(|| format!("alpha {a:?}"))?)?,
            None => bail!(FyError::InvalidParameter(format!("unknown loss {other:?}"))),
        },
    })
}

fn parse_loss(s: &str) -> Result<FyLossSpec> {
    if s.trim_start().starts_with('{') {
        serde_json::from_str(s).with_context(|| format!("loss spec {s:?}"))
    } else {
        named_loss(s.trim())
    }
}

fn select_loss(ctx: &Context, sel: &LossSelect) -> Result<FyLossSpec> {
    let spec = match (&sel.loss, &sel.entropy) {
        (Some(l), _) => parse_loss(l)?,
        (None, Some(e)) => FyLossSpec::entropy(entropy_arg(e, &sel.params)?),
        (None, None) => FyLossSpec::logistic(),
    };
    ctx.apply_tol(spec)
}

fn parse_method(s: &str) -> Result<Method> {
    let name = match s.trim() {
        "bisect" => "bisection",
        "pg" => "projected_gradient",
        other => other,
    };
    serde_json::from_value(serde_json::Value::String(name.to_string()))
        .map_err(|_| anyhow!(FyError::InvalidParameter(format!("unknown method {s:?}"))))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PredictOutput {
    pub p: Vec<f64>,
    pub tau: Option<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub method: Method,
}

fn read_vectors(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path).map_err(FyError::from)?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<f64>().map_err(|_| FyError::Parse {
                    line: i + 1,
                    column: 1,
                    reason: format!("bad number {t:?}"),
                })
            })
            .collect::<fy_core::Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn predict(ctx: &Context, a: PredictArgs) -> Result<()> {
    let spec = select_loss(ctx, &a.select)?;
    let mut policy = spec.solver;
    if let Some(m) = &a.method {
        policy.method = parse_method(m)?;
    }
    let inputs = match &a.input {
        Some(p) => read_vectors(p)?,
        None => vec![a.theta.clone()],
    };
    let results = inputs
        .iter()
        .map(|theta| {
            let r = predict_with(&spec, theta, &policy)?;
            Ok(PredictOutput {
                p: r.p.into_inner(),
                tau: r.tau,
                iterations: r.iterations,
                residual: r.residual,
                method: r.method,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = sink(ctx.output.as_deref())?;
    match ctx.format {
        Format::Json if a.input.is_none() => write_json(&mut out, &results[0]),
        Format::Json => write_json(&mut out, &results),
        Format::Csv => {
            let d = results.iter().map(|r| r.p.len()).max().unwrap_or(0);
            let header: Vec<String> = (0..d).map(|i| format!("p{i}")).collect();
            let rows: Vec<Vec<f64>> = results.into_iter().map(|r| r.p).collect();
            write_table(&mut out, &header, &rows)
        }
    }
}

pub fn loss(ctx: &Context, a: LossArgs) -> Result<()> {
    let spec = select_loss(ctx, &a.select)?;
    let e = loss_value(&spec, &a.theta, &a.y)?;
    let mut out = sink(ctx.output.as_deref())?;
    match ctx.format {
        Format::Json => write_json(&mut out, &e),
        Format::Csv => {
            let d = e.gradient.len();
            let mut header = vec!["value".to_string(), "conjugate".to_string()];
            header.extend((0..d).map(|i| format!("p{i}")));
            header.extend((0..d).map(|i| format!("g{i}")));
            let mut row = vec![e.value, e.conjugate];
            row.extend(e.prediction.iter());
            row.extend(&e.gradient);
            write_table(&mut out, &header, &[row])
        }
    }
}

pub fn margin(ctx: &Context, a: MarginArgs) -> Result<()> {
    let spec = entropy_arg(&a.entropy, &a.params)?;
    let report = margin_report(&spec, a.dim, a.grid, a.trials)?;
    let mut out = sink(ctx.output.as_deref())?;
    match ctx.format {
        Format::Json => write_json(&mut out, &report),
        Format::Csv => write_csv(&mut out, &[report]),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridPoint {
    pub alpha: Option<f64>,
    pub lambda: f64,
    pub validation_js: Option<f64>,
    pub validation_mse: Option<f64>,
    pub status: TrainStatus,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TrainReport {
    pub loss: FyLossSpec,
    pub alpha: Option<f64>,
    pub lambda: f64,
    pub status: TrainStatus,
    pub iterations: usize,
    pub objective: f64,
    pub train: MetricReport,
    pub validation: Option<MetricReport>,
    pub test: Option<MetricReport>,
    pub grid: Vec<GridPoint>,
}

/// Preprocess with training statistics; `None` when nothing survives.
fn preprocess_optional(
    raw: data::RawDataset,
    stats: &data::FeatureStats,
) -> Result<Option<Dataset>> {
    match preprocess(raw, Some(stats)) {
        Ok(ds) => Ok(Some(ds)),
        Err(FyError::EmptyAfterFiltering) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn loss_for_alpha(alpha: f64) -> Result<FyLossSpec> {
    Ok(if alpha == 1.0 {
        FyLossSpec::logistic()
    } else {
        FyLossSpec::tsallis(alpha)?
    })
}

pub fn train(ctx: &Context, a: TrainArgs) -> Result<()> {
    let fractions: [f64; 3] = a
        .split
        .as_slice()
        .try_into()
        .map_err(|_| FyError::InvalidParameter("--split needs three fractions".into()))?;
    let opts = ParseOptions {
        one_based: a.one_based,
        ..ParseOptions::default()
    };
    let raw = parse_multilabel(&a.data, &opts)?;
    let [tr, va, te] = raw.split(fractions, ctx.seed)?;
    let train_set = preprocess(tr, None)?;
    let val_set = preprocess_optional(va, train_set.stats())?;
    let test_set = preprocess_optional(te, train_set.stats())?;

    let candidates: Vec<(Option<f64>, FyLossSpec)> = match (&a.loss, &a.alphas) {
        (Some(l), _) => vec![(None, parse_loss(l)?)],
        (None, alphas) => alphas
            .clone()
            .unwrap_or_else(|| (0..=10).map(|i| 1.0 + 0.1 * i as f64).collect())
            .into_iter()
            .map(|al| Ok((Some(al), loss_for_alpha(al)?)))
            .collect::<Result<_>>()?,
    };
    let lambdas = a
        .lambdas
        .clone()
        .unwrap_or_else(|| (-4..=4).map(|k| 10f64.powi(k)).collect());
    let opt = OptimizerConfig {
        max_iterations: a.max_iter,
        gradient_tolerance: a.grad_tol,
        ..OptimizerConfig::default()
    };
    let tuning = candidates.len() * lambdas.len() > 1;
    if tuning && val_set.is_none() {
        bail!(FyError::InvalidParameter(
            "tuning needs a non-empty validation split".into()
        ));
    }

    let x = train_set.features();
    let mut grid = Vec::new();
    let mut best: Option<(f64, Option<f64>, LinearModel)> = None;
    for (alpha, spec) in &candidates {
        let spec = ctx.apply_tol(*spec)?;
        for &lambda in &lambdas {
            let model = fit(&spec, lambda, &x, train_set.labels(), &opt)?;
            let val = match &val_set {
                Some(v) => Some(learn::evaluate(&model, &v.features(), v.labels())?),
                None => None,
            };
            let status = model
                .train_log
                .as_ref()
                .map_or(TrainStatus::MaxIterations, |l| l.status);
            grid.push(GridPoint {
                alpha: *alpha,
                lambda,
                validation_js: val.map(|m| m.mean_js),
                validation_mse: val.map(|m| m.mean_mse),
                status,
            });
            let score = val.map_or(0.0, |m| m.mean_js);
            if best.as_ref().is_none_or(|(s, _, _)| score < *s) {
                best = Some((score, *alpha, model));
            }
        }
    }
    let (_, alpha, mut model) = best.ok_or_else(|| anyhow!("empty hyperparameter grid"))?;
    model.feature_stats = Some(train_set.stats().clone());
    let log = model.train_log.clone().expect("fit records a log");
    let last = log.entries.last().expect("log has the initial entry");
    let report = TrainReport {
        loss: model.loss_spec,
        alpha,
        lambda: model.lambda,
        status: log.status,
        iterations: last.iteration,
        objective: last.objective,
        train: learn::evaluate(&model, &x, train_set.labels())?,
        validation: match &val_set {
            Some(v) => Some(learn::evaluate(&model, &v.features(), v.labels())?),
            None => None,
        },
        test: match &test_set {
            Some(t) => Some(learn::evaluate(&model, &t.features(), t.labels())?),
            None => None,
        },
        grid,
    };
    if let Some(path) = &a.model {
        fs::write(path, model.to_json()?).with_context(|| format!("writing {}", path.display()))?;
    }
    let mut out = sink(ctx.output.as_deref())?;
    match ctx.format {
        Format::Json => write_json(&mut out, &report),
        Format::Csv => write_csv(&mut out, &report.grid),
    }
}

pub fn eval(ctx: &Context, a: EvalArgs) -> Result<()> {
    let text = fs::read_to_string(&a.model)
        .map_err(FyError::from)
        .with_context(|| format!("reading {}", a.model.display()))?;
    let model = LinearModel::from_json(&text)?;
    let stats = model
        .feature_stats
        .clone()
        .ok_or_else(|| FyError::InvalidParameter("model has no feature statistics".into()))?;
    let d = model.weights.nrows();
    let opts = ParseOptions {
        one_based: a.one_based,
        num_labels: Some(d),
        ..ParseOptions::default()
    };
    let raw = parse_multilabel(&a.data, &opts)?;
    let ds = preprocess(raw, Some(&stats))?;
    let report = learn::evaluate(&model, &ds.features(), ds.labels())?;
    let mut out = sink(ctx.output.as_deref())?;
    match ctx.format {
        Format::Json => write_json(&mut out, &report),
        Format::Csv => write_csv(&mut out, &[report]),
    }
}

pub fn bench(ctx: &Context, a: BenchArgs) -> Result<()> {
    let solvers = a
        .solvers
        .iter()
        .map(|s| parse_method(s))
        .collect::<Result<Vec<_>>>()?;
    let cfg = BenchConfig {
        dims: a.dims,
        trials: a.trials,
        seed: ctx.seed,
        alpha: a.alpha,
        solvers,
        warmups: a.warmups,
        repeats: a.repeats,
        budget: a.budget_secs.map(Duration::from_secs_f64),
        ..BenchConfig::default()
    };
    let report = bench_solvers(&cfg)?;
    if report.truncated {
        eprintln!(
            "budget exhausted: reporting {} records",
            report.records.len()
        );
    }
    let mut out = sink(ctx.output.as_deref())?;
    match (ctx.format, a.summary) {
        (Format::Json, false) => write_json(&mut out, &report),
        (Format::Json, true) => write_json(&mut out, &report.summaries),
        (Format::Csv, false) => write_csv(&mut out, &report.records),
        (Format::Csv, true) => write_csv(&mut out, &report.summaries),
    }
}

pub fn synth(ctx: &Context, a: SynthArgs) -> Result<()> {
    let cfg = SyntheticConfig {
        word_concentration: a.word_concentration,
        ..SyntheticConfig::new(a.n, a.p, a.d, a.doc_length, a.labels_mean)
    };
    let raw = learn::synthetic_raw(ctx.seed, &cfg)?;
    let mut out = sink(ctx.output.as_deref())?;
    writeln!(
        out,
        "{} {} {}",
        raw.len(),
        raw.num_features(),
        raw.num_labels
    )?;
    out.write_all(raw.to_text(false).as_bytes())?;
    out.flush()?;
    Ok(())
}

pub fn sweep(ctx: &Context, a: SweepArgs) -> Result<()> {
    let mut specs = a
        .entropy
        .iter()
        .map(|s| parse_entropy(s))
        .collect::<Result<Vec<_>>>()?;
    if let Some(family) = &a.family {
        for &v in &a.params {
            specs.push(match family.as_str() {
                "tsallis" => EntropySpec::tsallis(v)?,
                "norm" => EntropySpec::norm(v)?,
                "squared_norm" => EntropySpec::squared_norm(v)?,
                "renyi" => EntropySpec::renyi(v)?,
                other => bail!(FyError::InvalidParameter(format!(
                    "unknown family {other:?}"
                ))),
            });
        }
    }
    if specs.is_empty() {
        specs.push(EntropySpec::shannon());
    }
    let rows = sweep_curves(&specs, &linspace(a.t_min, a.t_max, a.points))?;
    let mut out = sink(ctx.output.as_deref())?;
    match ctx.format {
        Format::Json => write_json(&mut out, &rows),
        Format::Csv => write_csv(&mut out, &rows),
    }
}

pub fn data_stats(ctx: &Context, path: &Path, one_based: bool) -> Result<()> {
    let opts = ParseOptions {
        one_based,
        ..ParseOptions::default()
    };
    let stats = data::stats(&parse_multilabel(path, &opts)?);
    let mut out = sink(ctx.output.as_deref())?;
    match ctx.format {
        Format::Json => write_json(&mut out, &stats),
        Format::Csv => write_csv(&mut out, &[stats]),
    }
}
