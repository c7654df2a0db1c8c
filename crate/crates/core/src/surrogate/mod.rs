//! Convolutional surrogate of the compression heuristic.
//!
//! The network maps a dispensed state (amounts divided by the model's
//! `input_scale`) to the compressed state at termination height 1. Other gap
//! heights are handled by scaling the input amounts and the output.

mod adam;
mod net;
mod search;
mod tensor;
mod train;
mod weights;

pub use adam::{Adam, AdamConfig};
pub use net::{bce, layer_plan, Activation, Architecture, Layer, NetError, Network, BCE_EPS};
pub use search::{
    derive_run_seed, evaluate_candidates, hyperparameter_search, random_search, SearchBudget,
    SearchError, SearchOutcome, SearchSpace, TrialRecord,
};
pub use tensor::{Real, Tensor};
pub use train::{evaluate_loss, train, train_with, EpochStats, Sample, TrainError, TrainReport};
pub use weights::{load_weights, read_weights, save_weights, write_weights, WeightsError, TIMW_MAGIC, TIMW_VERSION};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{GridSpec, TimGrid};
use crate::pattern::DispensePattern;
use crate::raster::{discretize, scale_for_gap, RasterError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SurrogateError {
    #[error("grid is {actual} but the model expects {expected}")]
    ShapeMismatch { expected: GridSpec, actual: GridSpec },
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),
    #[error("input scale must be positive and finite, got {0}")]
    InvalidInputScale(f64),
}

/// Network and training hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hyperparams {
    pub conv_layers: usize,
    pub filters: usize,
    pub kernel: usize,
    pub dense_layers: usize,
    pub dense_width: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
}

impl Hyperparams {
    /// Best configuration reported for the 50x50 setup: five 5x5 layers with
    /// 128 filters, no dense layers, batch 8, learning rate 0.0011.
    pub fn reported_best(spec: GridSpec) -> Self {
        Self {
            conv_layers: 5,
            filters: 128,
            kernel: 5,
            dense_layers: 0,
            dense_width: spec.cells(),
            batch_size: 8,
            learning_rate: 0.0011,
            epochs: 10,
        }
    }

    /// Small configuration that trains in minutes on a desktop CPU.
    pub fn desk_scale(spec: GridSpec) -> Self {
        Self {
            conv_layers: 3,
            filters: 32,
            kernel: 5,
            dense_layers: 0,
            dense_width: spec.cells(),
            batch_size: 8,
            learning_rate: 1e-3,
            epochs: 20,
        }
    }

    pub fn architecture(&self) -> Architecture {
        Architecture {
            conv_layers: self.conv_layers,
            filters: self.filters,
            kernel: self.kernel,
            dense_layers: self.dense_layers,
            dense_width: self.dense_width,
        }
    }

    /// Structural checks. The search-space ranges are enforced by
    /// [`SearchSpace`], not here, so that tiny test models and a zero
    /// learning rate remain expressible.
    pub fn validate(&self, spec: GridSpec) -> Result<(), SurrogateError> {
        if self.batch_size == 0 {
            return Err(SurrogateError::InvalidHyperparams("batch size must be >= 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(SurrogateError::InvalidHyperparams(format!(
                "learning rate must be finite and >= 0, got {}",
                self.learning_rate
            )));
        }
        layer_plan(&self.architecture(), spec)?;
        Ok(())
    }
}

/// Trained surrogate: hyperparameters, weights and input normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateModel {
    hyperparams: Hyperparams,
    net: Network<f32>,
    input_scale: f64,
}

impl SurrogateModel {
    pub fn new(
        hyperparams: Hyperparams,
        net: Network<f32>,
        input_scale: f64,
    ) -> Result<Self, SurrogateError> {
        if !(input_scale.is_finite() && input_scale > 0.0) {
            return Err(SurrogateError::InvalidInputScale(input_scale));
        }
        let expected = layer_plan(&hyperparams.architecture(), net.spec())?;
        if expected != net.layers() {
            return Err(SurrogateError::InvalidHyperparams(
                "network layers do not match the hyperparameters".into(),
            ));
        }
        if net
            .params()
            .iter()
            .any(|t| t.data.iter().any(|w| !w.is_finite()))
        {
            return Err(SurrogateError::InvalidHyperparams("non-finite weight".into()));
        }
        Ok(Self {
            hyperparams,
            net,
            input_scale,
        })
    }

    /// Model with every weight and bias set to zero.
    pub fn zeros(hyperparams: Hyperparams, spec: GridSpec) -> Result<Self, SurrogateError> {
        let net = Network::zeros(&hyperparams.architecture(), spec)?;
        Self::new(hyperparams, net, 1.0)
    }

    pub fn hyperparams(&self) -> &Hyperparams {
        &self.hyperparams
    }

    pub fn input_scale(&self) -> f64 {
        self.input_scale
    }

    pub fn spec(&self) -> GridSpec {
        self.net.spec()
    }

    pub fn network(&self) -> &Network<f32> {
        &self.net
    }

    pub fn weights(&self) -> &[Tensor<f32>] {
        self.net.params()
    }

    /// Scaled single-precision input for the network.
    pub(crate) fn prepare_input(&self, grid: &TimGrid) -> Result<Vec<f32>, SurrogateError> {
        if grid.spec() != self.spec() {
            return Err(SurrogateError::ShapeMismatch {
                expected: self.spec(),
                actual: grid.spec(),
            });
        }
        let inv = 1.0 / self.input_scale;
        Ok(grid.amounts().iter().map(|&a| (a * inv) as f32).collect())
    }

    /// Predicted compressed state at termination height 1; every cell lies
    /// strictly between 0 and 1.
    pub fn forward(&self, input: &TimGrid) -> Result<TimGrid, SurrogateError> {
        let x = self.prepare_input(input)?;
        let y = self.net.forward(&x)?;
        let amounts = y.into_iter().map(f64::from).collect();
        Ok(TimGrid::from_vec_unchecked(self.spec(), amounts))
    }
}

/// Mean binary cross-entropy between a predicted and a target grid.
pub fn loss_bce(prediction: &TimGrid, target: &TimGrid) -> Result<f64, SurrogateError> {
    if prediction.spec() != target.spec() {
        return Err(SurrogateError::ShapeMismatch {
            expected: target.spec(),
            actual: prediction.spec(),
        });
    }
    Ok(bce(prediction.amounts(), target.amounts()))
}

/// Rasterize, scale for the gap, run the network and rescale the output.
pub fn predict_compressed(
    model: &SurrogateModel,
    pattern: &DispensePattern,
    gap: f64,
) -> Result<TimGrid, SurrogateError> {
    let dispensed = discretize(pattern, model.spec())?;
    predict_from_grid(model, &dispensed, gap)
}

/// Same as [`predict_compressed`] for an already rasterized dispensed state.
pub fn predict_from_grid(
    model: &SurrogateModel,
    dispensed: &TimGrid,
    gap: f64,
) -> Result<TimGrid, SurrogateError> {
    let scaled = scale_for_gap(dispensed, gap)?;
    let out = model.forward(&scaled)?;
    if gap == 1.0 {
        Ok(out)
    } else {
        Ok(out.scaled(gap))
    }
}
