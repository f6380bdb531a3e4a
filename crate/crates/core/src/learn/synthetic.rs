//! Synthetic documents with sparse label proportions.
//!
//! A ground-truth label distribution and per-label word distributions are
//! drawn from symmetric Dirichlet priors. Each sample draws a label count
//! `k ~ Poisson` (at least 1) and `k` labels from the ground truth, giving
//! proportions `y`; then a length `L ~ Poisson` (at least 1) and `L` words,
//! each from the word distribution of a label drawn from `y`. Rows of `X`
//! are word counts.

use ndarray::Array2;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Gamma, Poisson};
use serde::{Deserialize, Serialize};

use crate::data::{RawDataset, SparseMatrix};
use crate::error::{FyError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n: usize,
    /// Vocabulary size.
    pub p: usize,
    /// Number of labels.
    pub d: usize,
    pub doc_length_mean: f64,
    pub labels_mean: f64,
    /// Dirichlet concentration of each label's word distribution; small
    /// values make labels easier to tell apart.
    pub word_concentration: f64,
    /// Dirichlet concentration of the ground-truth label distribution.
    pub label_concentration: f64,
}

impl SyntheticConfig {
    pub fn new(n: usize, p: usize, d: usize, doc_length_mean: f64, labels_mean: f64) -> Self {
        SyntheticConfig {
            n,
            p,
            d,
            doc_length_mean,
            labels_mean,
            word_concentration: 0.1,
            label_concentration: 1.0,
        }
    }

    fn validate(&self) -> Result<()> {
        let positive = [
            self.doc_length_mean,
            self.labels_mean,
            self.word_concentration,
            self.label_concentration,
        ];
        if self.n == 0
            || self.p == 0
            || self.d == 0
            || positive.iter().any(|&v| !(v > 0.0 && v.is_finite()))
        {
            return Err(FyError::InvalidParameter(format!(
                "synthetic parameters must be positive: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Word-count features and label-proportion targets.
pub fn synthetic_proportions(
    seed: u64,
    cfg: &SyntheticConfig,
) -> Result<(SparseMatrix, Array2<f64>)> {
    let raw = synthetic_raw(seed, cfg)?;
    let mut y = Array2::zeros((raw.len(), cfg.d));
    for (i, labels) in raw.labels.iter().enumerate() {
        let k: f64 = labels.iter().map(|&(_, c)| c).sum();
        for &(l, c) in labels {
            y[[i, l]] = c / k;
        }
    }
    Ok((raw.features, y))
}

/// The same draw as [`synthetic_proportions`] with labels stored as counts,
/// ready for `data::preprocess`.
pub fn synthetic_raw(seed: u64, cfg: &SyntheticConfig) -> Result<RawDataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let label_dist = dirichlet(&mut rng, cfg.d, cfg.label_concentration)?;
    let label_pick = weighted(&label_dist)?;
    let word_picks = (0..cfg.d)
        .map(|_| weighted(&dirichlet(&mut rng, cfg.p, cfg.word_concentration)?))
        .collect::<Result<Vec<_>>>()?;
    let n_labels = poisson(cfg.labels_mean)?;
    let n_words = poisson(cfg.doc_length_mean)?;

    let mut rows = Vec::with_capacity(cfg.n);
    let mut labels = Vec::with_capacity(cfg.n);
    for _ in 0..cfg.n {
        let k = (n_labels.sample(&mut rng) as usize).max(1);
        let mut counts = vec![0usize; cfg.d];
        for _ in 0..k {
            counts[label_pick.sample(&mut rng)] += 1;
        }
        let present: Vec<(usize, f64)> = counts
            .iter()
            .enumerate()
            .filter(|&(_, &c)| c > 0)
            .map(|(l, &c)| (l, c as f64))
            .collect();
        let mix = weighted(&counts.iter().map(|&c| c as f64).collect::<Vec<_>>())?;
        let len = (n_words.sample(&mut rng) as usize).max(1);
        let mut words = vec![0usize; cfg.p];
        for _ in 0..len {
            let l = mix.sample(&mut rng);
            words[word_picks[l].sample(&mut rng)] += 1;
        }
        rows.push(
            words
                .iter()
                .enumerate()
                .filter(|&(_, &c)| c > 0)
                .map(|(j, &c)| (j, c as f64))
                .collect(),
        );
        labels.push(present);
    }
    Ok(RawDataset {
        features: SparseMatrix::from_rows(cfg.p, &rows)?,
        labels,
        num_labels: cfg.d,
    })
}

fn dirichlet(rng: &mut ChaCha8Rng, k: usize, concentration: f64) -> Result<Vec<f64>> {
    let gamma =
        Gamma::new(concentration, 1.0).map_err(|e| FyError::InvalidParameter(e.to_string()))?;
    let mut v: Vec<f64> = (0..k).map(|_| gamma.sample(rng)).collect();
    let total: f64 = v.iter().sum();
    if total > 0.0 {
        v.iter_mut().for_each(|x| *x /= total);
    } else {
        // every gamma draw underflowed; fall back to uniform
        v.iter_mut().for_each(|x| *x = 1.0 / k as f64);
    }
    Ok(v)
}

fn weighted(w: &[f64]) -> Result<WeightedIndex<f64>> {
    WeightedIndex::new(w).map_err(|e| FyError::InvalidParameter(e.to_string()))
}

fn poisson(mean: f64) -> Result<Poisson<f64>> {
    Poisson::new(mean).map_err(|e| FyError::InvalidParameter(e.to_string()))
}
