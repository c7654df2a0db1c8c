//! Random hyperparameter search.
//!
//! Each trial trains several networks with different seeds and is scored by
//! the lowest validation loss among the runs that did not fail, so a single
//! unlucky initialization does not discard a configuration.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::train::{train, Sample, TrainError};
use super::Hyperparams;
use crate::grid::GridSpec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error("trials and repeats must both be at least 1")]
    InvalidArgument,
    #[error("every trial failed")]
    NoSuccessfulTrial,
}

/// Sampling ranges for each hyperparameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub conv_layers: (usize, usize),
    pub filters: Vec<usize>,
    pub kernels: Vec<usize>,
    pub dense_layers: (usize, usize),
    pub batch_sizes: Vec<usize>,
    /// Learning rate is drawn log-uniformly from this interval.
    pub learning_rate: (f64, f64),
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            conv_layers: (2, 6),
            filters: vec![8, 32, 128, 512],
            kernels: vec![3, 5],
            dense_layers: (0, 2),
            batch_sizes: vec![8, 32, 128],
            learning_rate: (1e-5, 1e-2),
        }
    }
}

impl SearchSpace {
    pub fn sample<R: Rng>(&self, rng: &mut R, spec: GridSpec, epochs: usize) -> Hyperparams {
        let (lo, hi) = self.learning_rate;
        let log_lr = rng.gen_range(lo.ln()..=hi.ln());
        Hyperparams {
            conv_layers: rng.gen_range(self.conv_layers.0..=self.conv_layers.1),
            filters: *self.filters.choose(rng).expect("non-empty filter choices"),
            kernel: *self.kernels.choose(rng).expect("non-empty kernel choices"),
            dense_layers: rng.gen_range(self.dense_layers.0..=self.dense_layers.1),
            dense_width: spec.cells(),
            batch_size: *self.batch_sizes.choose(rng).expect("non-empty batch choices"),
            learning_rate: log_lr.exp().clamp(lo, hi),
            epochs,
        }
    }

    pub fn contains(&self, hp: &Hyperparams) -> bool {
        (self.conv_layers.0..=self.conv_layers.1).contains(&hp.conv_layers)
            && self.filters.contains(&hp.filters)
            && self.kernels.contains(&hp.kernel)
            && (self.dense_layers.0..=self.dense_layers.1).contains(&hp.dense_layers)
            && self.batch_sizes.contains(&hp.batch_size)
            && hp.learning_rate >= self.learning_rate.0
            && hp.learning_rate <= self.learning_rate.1
    }
}

/// Per-trial training budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchBudget {
    pub epochs: usize,
    pub train_size: usize,
    pub validation_size: usize,
}

impl Default for SearchBudget {
    fn default() -> Self {
        Self {
            epochs: 1,
            train_size: 16_000,
            validation_size: 4_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub hyperparams: Hyperparams,
    /// Validation loss of every run, or the error that stopped it.
    pub runs: Vec<Result<f64, String>>,
    /// Lowest loss among the successful runs.
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub best: Hyperparams,
    pub best_score: f64,
    pub trials: Vec<TrialRecord>,
}

/// SplitMix64 mixing of a base seed with two indices.
pub fn derive_run_seed(base: u64, a: u64, b: u64) -> u64 {
    let mut z = base
        ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ b.wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Scores explicit configurations. `evaluate(hp, seed)` trains one network
/// and returns its validation loss.
pub fn evaluate_candidates<F>(
    candidates: &[Hyperparams],
    repeats: usize,
    seed: u64,
    mut evaluate: F,
) -> Result<SearchOutcome, SearchError>
where
    F: FnMut(&Hyperparams, u64) -> Result<f64, TrainError>,
{
    if candidates.is_empty() || repeats == 0 {
        return Err(SearchError::InvalidArgument);
    }
    let mut trials = Vec::with_capacity(candidates.len());
    let mut best: Option<(usize, f64)> = None;
    for (trial, hp) in candidates.iter().enumerate() {
        let runs: Vec<Result<f64, String>> = (0..repeats)
            .map(|r| {
                let run_seed = derive_run_seed(seed, trial as u64, r as u64);
                match evaluate(hp, run_seed) {
                    Ok(loss) if loss.is_finite() => Ok(loss),
                    Ok(loss) => Err(format!("non-finite loss {loss}")),
                    Err(e) => Err(e.to_string()),
                }
            })
            .collect();
        let score = runs
            .iter()
            .filter_map(|r| r.as_ref().ok().copied())
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))));
        if let Some(s) = score {
            if best.is_none_or(|(_, b)| s < b) {
                best = Some((trial, s));
            }
        }
        trials.push(TrialRecord {
            trial,
            hyperparams: *hp,
            runs,
            score,
        });
    }
    let (idx, best_score) = best.ok_or(SearchError::NoSuccessfulTrial)?;
    Ok(SearchOutcome {
        best: candidates[idx],
        best_score,
        trials,
    })
}

/// Random search: draws `trials` configurations from `space` and scores
/// each with `repeats` independent runs of `evaluate`.
pub fn random_search<F>(
    space: &SearchSpace,
    spec: GridSpec,
    trials: usize,
    repeats: usize,
    epochs: usize,
    seed: u64,
    evaluate: F,
) -> Result<SearchOutcome, SearchError>
where
    F: FnMut(&Hyperparams, u64) -> Result<f64, TrainError>,
{
    if trials == 0 || repeats == 0 {
        return Err(SearchError::InvalidArgument);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let candidates: Vec<Hyperparams> = (0..trials)
        .map(|_| space.sample(&mut rng, spec, epochs))
        .collect();
    evaluate_candidates(&candidates, repeats, seed, evaluate)
}

/// Random search that trains real networks on the first
/// `budget.train_size` / `budget.validation_size` samples.
pub fn hyperparameter_search(
    space: &SearchSpace,
    trials: usize,
    repeats: usize,
    budget: &SearchBudget,
    training: &[Sample],
    validation: &[Sample],
    seed: u64,
) -> Result<SearchOutcome, SearchError> {
    let spec = training
        .first()
        .map(|s| s.dispensed.spec())
        .ok_or(SearchError::InvalidArgument)?;
    let train_set = &training[..budget.train_size.min(training.len())];
    let val_set = &validation[..budget.validation_size.min(validation.len())];
    random_search(space, spec, trials, repeats, budget.epochs, seed, |hp, s| {
        let (_, report) = train(train_set, val_set, hp, s)?;
        Ok(report
            .best_validation_loss
            .or_else(|| report.epochs.last().map(|e| e.train_loss))
            .unwrap_or(report.initial_train_loss))
    })
}
