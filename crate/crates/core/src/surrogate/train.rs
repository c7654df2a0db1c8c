//! Mini-batch training with Adam on binary cross-entropy.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::adam::{Adam, AdamConfig};
use super::net::{bce, Network};
use super::tensor::Tensor;
use super::{Hyperparams, SurrogateError, SurrogateModel};
use crate::grid::{GridSpec, TimGrid};
use crate::metrics;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("training set is empty")]
    EmptyDataset,
    #[error("loss became non-finite in epoch {epoch}")]
    DivergedLoss { epoch: usize },
    #[error("sample {index} has resolution {actual}, expected {expected}")]
    MixedResolution {
        index: usize,
        expected: GridSpec,
        actual: GridSpec,
    },
    #[error(transparent)]
    Model(#[from] SurrogateError),
}

/// One training pair: dispensed state and heuristic-compressed target.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub dispensed: TimGrid,
    pub compressed: TimGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean loss over the epoch's mini-batches.
    pub train_loss: f64,
    pub validation_loss: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub initial_train_loss: f64,
    pub epochs: Vec<EpochStats>,
    pub best_epoch: Option<usize>,
    pub best_validation_loss: Option<f64>,
    pub wall_seconds: f64,
    /// Mean relative error of the returned model against the heuristic
    /// targets of the validation set.
    pub validation_mean_relative_error: Option<f64>,
}

struct Prepared {
    inputs: Vec<Vec<f32>>,
    targets: Vec<Vec<f32>>,
}

fn prepare(samples: &[Sample], spec: GridSpec, scale: f64) -> Result<Prepared, TrainError> {
    let inv = 1.0 / scale;
    let mut inputs = Vec::with_capacity(samples.len());
    let mut targets = Vec::with_capacity(samples.len());
    for (index, s) in samples.iter().enumerate() {
        for g in [&s.dispensed, &s.compressed] {
            if g.spec() != spec {
                return Err(TrainError::MixedResolution {
                    index,
                    expected: spec,
                    actual: g.spec(),
                });
            }
        }
        inputs.push(s.dispensed.amounts().iter().map(|&a| (a * inv) as f32).collect());
        targets.push(s.compressed.amounts().iter().map(|&a| a as f32).collect());
    }
    Ok(Prepared { inputs, targets })
}

fn mean_loss(net: &Network<f32>, data: &Prepared) -> f64 {
    let losses: Vec<f64> = data
        .inputs
        .par_iter()
        .zip(&data.targets)
        .map(|(x, t)| {
            let p = net.forward(x).expect("validated shapes");
            f64::from(bce(&p, t))
        })
        .collect();
    losses.iter().sum::<f64>() / losses.len().max(1) as f64
}

/// Mean per-sample BCE of `model` over `samples`.
pub fn evaluate_loss(model: &SurrogateModel, samples: &[Sample]) -> Result<f64, TrainError> {
    let data = prepare(samples, model.spec(), model.input_scale())?;
    Ok(mean_loss(model.network(), &data))
}

/// [`train_with`] without a progress callback.
pub fn train(
    training: &[Sample],
    validation: &[Sample],
    hyperparams: &Hyperparams,
    seed: u64,
) -> Result<(SurrogateModel, TrainReport), TrainError> {
    train_with(training, validation, hyperparams, seed, |_| {})
}

/// Trains a fresh network and returns the weights with the lowest
/// validation loss (the last epoch's weights when `validation` is empty).
///
/// Results depend only on the data, the hyperparameters and `seed`:
/// per-sample gradients may be computed in parallel but are always summed in
/// batch order.
pub fn train_with(
    training: &[Sample],
    validation: &[Sample],
    hyperparams: &Hyperparams,
    seed: u64,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<(SurrogateModel, TrainReport), TrainError> {
    let started = Instant::now();
    let first = training.first().ok_or(TrainError::EmptyDataset)?;
    let spec = first.dispensed.spec();
    hyperparams.validate(spec)?;

    let max_input = training
        .iter()
        .map(|s| s.dispensed.max())
        .fold(0.0, f64::max);
    let input_scale = if max_input > 0.0 { max_input } else { 1.0 };
    let train_data = prepare(training, spec, input_scale)?;
    let val_data = prepare(validation, spec, input_scale)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Network::<f32>::init(&hyperparams.architecture(), spec, &mut rng)
        .map_err(SurrogateError::from)?;
    let mut adam = Adam::new(
        AdamConfig::with_learning_rate(hyperparams.learning_rate),
        net.params(),
    );

    let initial_train_loss = mean_loss(&net, &train_data);
    let mut best: Option<(usize, f64, Vec<Tensor<f32>>)> = None;
    let mut epochs = Vec::with_capacity(hyperparams.epochs);
    let mut order: Vec<usize> = (0..training.len()).collect();

    for epoch in 0..hyperparams.epochs {
        let epoch_start = Instant::now();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(hyperparams.batch_size) {
            let per_sample: Vec<(f32, Vec<Tensor<f32>>)> = batch
                .par_iter()
                .map(|&i| {
                    net.loss_and_grad(&train_data.inputs[i], &train_data.targets[i])
                        .expect("validated shapes")
                })
                .collect();
            let mut grads: Vec<Tensor<f32>> =
                net.params().iter().map(|p| Tensor::zeros(&p.shape)).collect();
            for (loss, g) in &per_sample {
                loss_sum += f64::from(*loss);
                for (acc, gi) in grads.iter_mut().zip(g) {
                    for (a, b) in acc.data.iter_mut().zip(&gi.data) {
                        *a += *b;
                    }
                }
            }
            let inv = 1.0 / batch.len() as f32;
            for g in grads.iter_mut() {
                g.data.iter_mut().for_each(|v| *v *= inv);
            }
            adam.update(net.params_mut(), &grads);
        }
        let train_loss = loss_sum / training.len() as f64;
        if !train_loss.is_finite() {
            return Err(TrainError::DivergedLoss { epoch });
        }
        let validation_loss = (!validation.is_empty()).then(|| mean_loss(&net, &val_data));
        if validation_loss.is_some_and(|v| !v.is_finite()) {
            return Err(TrainError::DivergedLoss { epoch });
        }
        let score = validation_loss.unwrap_or(train_loss);
        let improved = match &best {
            None => true,
            Some((_, b, _)) => validation.is_empty() || score < *b,
        };
        if improved {
            best = Some((epoch, score, net.params().to_vec()));
        }
        let stats = EpochStats {
            epoch,
            train_loss,
            validation_loss,
            seconds: epoch_start.elapsed().as_secs_f64(),
        };
        on_epoch(&stats);
        epochs.push(stats);
    }

    let (best_epoch, best_validation_loss) = match best {
        Some((epoch, score, params)) => {
            net = Network::from_params(&hyperparams.architecture(), spec, params)
                .map_err(SurrogateError::from)?;
            (Some(epoch), (!validation.is_empty()).then_some(score))
        }
        None => (None, None),
    };
    let model = SurrogateModel::new(*hyperparams, net, input_scale)?;

    let validation_mean_relative_error = if validation.is_empty() {
        None
    } else {
        let preds: Vec<TimGrid> = validation
            .par_iter()
            .map(|s| model.forward(&s.dispensed).expect("validated shapes"))
            .collect();
        let pairs: Vec<(&TimGrid, &TimGrid)> = validation
            .iter()
            .map(|s| &s.compressed)
            .zip(preds.iter())
            .filter(|(a, _)| a.total() > 0.0)
            .collect();
        metrics::error_mean(&pairs).ok()
    };

    Ok((
        model,
        TrainReport {
            initial_train_loss,
            epochs,
            best_epoch,
            best_validation_loss,
            wall_seconds: started.elapsed().as_secs_f64(),
            validation_mean_relative_error,
        },
    ))
}
