//! Fenchel-Young losses end to end.
//!
//! * [`entropy`]: generalized entropies and their generators.
//! * [`prediction`]: the regularized prediction map (closed forms, root
//!   finding, projected gradient).
//! * [`loss`]: loss values, conjugates, gradients and Bregman relations.
//! * [`margin`]: separation margins, closed form and brute force.
//! * [`learn`]: linear label-proportion models and their metrics.
//! * [`data`]: sparse multi-label datasets.
//! * [`bench`]: solver timing and prediction/loss sweeps.

pub mod bench;
pub mod data;
pub mod entropy;
pub mod error;
pub mod learn;
pub mod loss;
pub mod margin;
pub mod prediction;

pub use entropy::{Domain, EntropySpec, Extended, Family, ProbabilityVector, ScoreVector};
pub use error::{FyError, Result};
pub use loss::{
    bregman_bound_check, bregman_divergence, conjugate_value, loss_gradient, loss_value,
    temperature_scaled_loss, FyLossSpec, LossEvaluation, Regularizer,
};
pub use prediction::{predict, predict_with, Method, PredictionResult, SolverPolicy};
