use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fy_core::FyError;

mod commands;
mod output;

#[derive(Parser, Debug)]
#[command(
    name = "fy",
    version,
    about = "Fenchel-Young losses: prediction, losses, margins, training and solver benchmarks"
)]
struct Cli {
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Solver tolerance (overrides the loss spec).
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Write results here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Regularized prediction for one or more score vectors.
    Predict(PredictArgs),
    /// Loss value, gradient and prediction.
    Loss(LossArgs),
    /// Closed-form, brute-force and empirical separation margins.
    Margin(MarginArgs),
    /// Fit a linear model on a multi-label dataset, tuning over a grid.
    Train(TrainArgs),
    /// Evaluate a saved model on a dataset.
    Eval(EvalArgs),
    /// Time bisection, Brent and projected gradient.
    Bench(BenchArgs),
    /// Generate a synthetic label-proportion dataset in the text format.
    Synth(SynthArgs),
    /// Entropy, prediction and loss along theta = (t, 0).
    Sweep(SweepArgs),
    /// Dataset utilities.
    Data {
        #[command(subcommand)]
        command: DataCommand,
    },
}

#[derive(Subcommand, Debug)]
enum DataCommand {
    /// Print n, p, d and the average number of labels per sample.
    Stats {
        path: PathBuf,
        #[arg(long)]
        one_based: bool,
    },
}

#[derive(Args, Debug)]
pub struct LossSelect {
    /// Loss spec as JSON, or one of logistic, sparsemax, squared,
    /// perceptron, hinge, one_vs_all, tsallis:<alpha>.
    #[arg(long, visible_alias = "spec", conflicts_with = "entropy")]
    loss: Option<String>,
    /// Entropy spec as JSON, e.g. {"family":"tsallis","alpha":1.5}, or a
    /// family name with --alpha, --q or --beta.
    #[arg(long)]
    entropy: Option<String>,
    #[command(flatten)]
    params: EntropyParams,
}

#[derive(Args, Debug, Default)]
pub struct EntropyParams {
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[command(flatten)]
    select: LossSelect,
    /// Comma-separated scores.
    #[arg(
        long,
        visible_alias = "scores",
        value_delimiter = ',',
        allow_negative_numbers = true,
        required_unless_present = "input"
    )]
    theta: Vec<f64>,
    /// File with one score vector per line.
    #[arg(long, conflicts_with = "theta")]
    input: Option<PathBuf>,
    /// Solver: auto, closed_form, bisection (bisect), brent,
    /// projected_gradient (pg), sort_projection.
    #[arg(long, visible_alias = "solver")]
    method: Option<String>,
}

#[derive(Args, Debug)]
pub struct LossArgs {
    #[command(flatten)]
    select: LossSelect,
    #[arg(
        long,
        visible_alias = "scores",
        value_delimiter = ',',
        allow_negative_numbers = true,
        required = true
    )]
    theta: Vec<f64>,
    /// Target vector, comma-separated.
    #[arg(long, visible_alias = "target", value_delimiter = ',', required = true)]
    y: Vec<f64>,
}

#[derive(Args, Debug)]
pub struct MarginArgs {
    /// Entropy spec as JSON, or a family name with --alpha, --q or --beta.
    #[arg(long)]
    entropy: String,
    #[command(flatten)]
    params: EntropyParams,
    #[arg(long, default_value_t = 3)]
    dim: usize,
    #[arg(long, default_value_t = 100_000)]
    grid: usize,
    #[arg(long, default_value_t = 20)]
    trials: usize,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    one_based: bool,
    /// Train/validation/test fractions.
    #[arg(long, value_delimiter = ',', default_value = "0.6,0.2,0.2")]
    split: Vec<f64>,
    /// A single loss; otherwise Tsallis losses over --alphas are tuned.
    #[arg(long)]
    loss: Option<String>,
    /// Tsallis grid; 1 means the logistic loss.
    #[arg(long, value_delimiter = ',', conflicts_with = "loss")]
    alphas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    lambdas: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-5)]
    grad_tol: f64,
    /// Save the selected model here.
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    one_based: bool,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "10,100,1000,10000")]
    dims: Vec<usize>,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 1.5)]
    alpha: f64,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "bisection,brent,projected_gradient"
    )]
    solvers: Vec<String>,
    #[arg(long, default_value_t = 5)]
    warmups: usize,
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    /// Wall-clock budget in seconds; partial results are reported.
    #[arg(long)]
    budget_secs: Option<f64>,
    /// Print only the per-(solver, dimension) summaries.
    #[arg(long)]
    summary: bool,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 1400)]
    n: usize,
    /// Vocabulary size.
    #[arg(long, default_value_t = 100)]
    p: usize,
    /// Number of labels.
    #[arg(long, default_value_t = 10)]
    d: usize,
    #[arg(long, default_value_t = 100.0)]
    doc_length: f64,
    #[arg(long, default_value_t = 1.0)]
    labels_mean: f64,
    #[arg(long, default_value_t = 0.1)]
    word_concentration: f64,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// Entropy spec as JSON; repeatable.
    #[arg(long)]
    entropy: Vec<String>,
    /// Family swept over --params: tsallis, norm, squared_norm, renyi.
    #[arg(long, requires = "params")]
    family: Option<String>,
    #[arg(long, value_delimiter = ',')]
    params: Vec<f64>,
    #[arg(long, default_value_t = -3.0, allow_negative_numbers = true)]
    t_min: f64,
    #[arg(long, default_value_t = 3.0, allow_negative_numbers = true)]
    t_max: f64,
    #[arg(long, default_value_t = 121)]
    points: usize,
}

/// 3 for non-convergence, 2 for domain and parse errors, 1 otherwise.
fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(e) = err.downcast_ref::<FyError>() {
        return match e {
            FyError::NoConvergence { .. } => 3,
            FyError::Io(_) => 1,
            _ => 2,
        };
    }
    if err.downcast_ref::<serde_json::Error>().is_some()
        || err.downcast_ref::<csv::Error>().is_some()
    {
        return 2;
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ctx = commands::Context {
        seed: cli.seed,
        tol: cli.tol,
        format: cli.format,
        output: cli.output.clone(),
    };
    let result = match cli.command {
        Command::Predict(a) => commands::predict(&ctx, a),
        Command::Loss(a) => commands::loss(&ctx, a),
        Command::Margin(a) => commands::margin(&ctx, a),
        Command::Train(a) => commands::train(&ctx, a),
        Command::Eval(a) => commands::eval(&ctx, a),
        Command::Bench(a) => commands::bench(&ctx, a),
        Command::Synth(a) => commands::synth(&ctx, a),
        Command::Sweep(a) => commands::sweep(&ctx, a),
        Command::Data {
            command: DataCommand::Stats { path, one_based },
        } => commands::data_stats(&ctx, &path, one_based),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
