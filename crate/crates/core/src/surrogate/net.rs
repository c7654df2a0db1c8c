//! Convolutional network: forward pass and reverse-mode gradients.
//!
//! Layout: `conv_layers` same-padded ReLU convolutions, then optional ReLU
//! dense layers whose width equals the number of grid cells (the last one is
//! reshaped back to a one-channel image), then a one-filter 3x3 convolution
//! with logistic output.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::{col2im, dot, im2col, matmul_acc, matmul_at_acc, matmul_bt_acc, Real, Tensor};
use crate::grid::GridSpec;

/// Probabilities are clamped to `[BCE_EPS, 1 - BCE_EPS]` inside the loss.
pub const BCE_EPS: f64 = 1e-7;

pub const OUTPUT_KERNEL: usize = 3;

/// Structural part of the hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub conv_layers: usize,
    pub filters: usize,
    pub kernel: usize,
    pub dense_layers: usize,
    pub dense_width: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Layer {
    Conv {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        activation: Activation,
    },
    Dense {
        inputs: usize,
        outputs: usize,
        activation: Activation,
    },
}

impl Layer {
    pub fn weight_shape(&self) -> Vec<usize> {
        match *self {
            Layer::Conv {
                in_channels,
                out_channels,
                kernel,
                ..
            } => vec![out_channels, in_channels, kernel, kernel],
            Layer::Dense {
                inputs, outputs, ..
            } => vec![outputs, inputs],
        }
    }

    pub fn bias_shape(&self) -> Vec<usize> {
        match *self {
            Layer::Conv { out_channels, .. } => vec![out_channels],
            Layer::Dense { outputs, .. } => vec![outputs],
        }
    }

    fn activation(&self) -> Activation {
        match *self {
            Layer::Conv { activation, .. } | Layer::Dense { activation, .. } => activation,
        }
    }

    fn fans(&self) -> (usize, usize) {
        match *self {
            Layer::Conv {
                in_channels,
                out_channels,
                kernel,
                ..
            } => (in_channels * kernel * kernel, out_channels * kernel * kernel),
            Layer::Dense {
                inputs, outputs, ..
            } => (inputs, outputs),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NetError {
    #[error("expected an input of {expected} values, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),
}

/// Layer list for an architecture at a given resolution.
pub fn layer_plan(arch: &Architecture, spec: GridSpec) -> Result<Vec<Layer>, NetError> {
    let bad = |m: String| Err(NetError::InvalidArchitecture(m));
    if arch.conv_layers == 0 {
        return bad("at least one hidden convolution is required".into());
    }
    if arch.filters == 0 {
        return bad("filters must be >= 1".into());
    }
    if arch.kernel == 0 || arch.kernel.is_multiple_of(2) {
        return bad(format!("kernel must be odd, got {}", arch.kernel));
    }
    let cells = spec.cells();
    if arch.dense_layers > 0 && arch.dense_width != cells {
        return bad(format!(
            "dense width {} must equal the number of grid cells {cells}",
            arch.dense_width
        ));
    }
    let mut layers = Vec::new();
    for l in 0..arch.conv_layers {
        layers.push(Layer::Conv {
            in_channels: if l == 0 { 1 } else { arch.filters },
            out_channels: arch.filters,
            kernel: arch.kernel,
            activation: Activation::Relu,
        });
    }
    for l in 0..arch.dense_layers {
        layers.push(Layer::Dense {
            inputs: if l == 0 { arch.filters * cells } else { cells },
            outputs: cells,
            activation: Activation::Relu,
        });
    }
    layers.push(Layer::Conv {
        in_channels: if arch.dense_layers > 0 { 1 } else { arch.filters },
        out_channels: 1,
        kernel: OUTPUT_KERNEL,
        activation: Activation::Sigmoid,
    });
    Ok(layers)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    spec: GridSpec,
    layers: Vec<Layer>,
    /// Weight then bias for every layer, in layer order.
    params: Vec<Tensor<T>>,
}

/// Activations recorded during a forward pass; `acts[l]` is the input of
/// layer `l` and the last entry holds the output probabilities.
pub struct Trace<T> {
    acts: Vec<Vec<T>>,
}

impl<T> Trace<T> {
    pub fn output(&self) -> &[T] {
        self.acts.last().expect("trace has at least the input")
    }
}

#[inline]
fn sigmoid<T: Real>(z: T) -> T {
    T::one() / (T::one() + (-z).exp())
}

/// Mean binary cross-entropy with clamped probabilities.
pub fn bce<T: Real>(pred: &[T], target: &[T]) -> T {
    let eps = T::of(BCE_EPS);
    let hi = T::one() - eps;
    let n = T::of(pred.len() as f64);
    let total: T = pred
        .iter()
        .zip(target)
        .map(|(&p, &t)| {
            let p = p.max(eps).min(hi);
            -(t * p.ln() + (T::one() - t) * (T::one() - p).ln())
        })
        .sum();
    total / n
}

impl<T: Real> Network<T> {
    pub fn zeros(arch: &Architecture, spec: GridSpec) -> Result<Self, NetError> {
        let layers = layer_plan(arch, spec)?;
        let params = layers
            .iter()
            .flat_map(|l| [Tensor::zeros(&l.weight_shape()), Tensor::zeros(&l.bias_shape())])
            .collect();
        Ok(Self {
            spec,
            layers,
            params,
        })
    }

    /// He-uniform weights for ReLU layers, Glorot-uniform for the logistic
    /// output layer, zero biases.
    pub fn init<R: Rng>(arch: &Architecture, spec: GridSpec, rng: &mut R) -> Result<Self, NetError> {
        let mut net = Self::zeros(arch, spec)?;
        for (l, layer) in net.layers.iter().enumerate() {
            let (fan_in, fan_out) = layer.fans();
            let limit = match layer.activation() {
                Activation::Relu => (6.0 / fan_in as f64).sqrt(),
                Activation::Sigmoid => (6.0 / (fan_in + fan_out) as f64).sqrt(),
            };
            for w in net.params[2 * l].data.iter_mut() {
                *w = T::of(rng.gen_range(-limit..limit));
            }
        }
        Ok(net)
    }

    pub fn from_params(
        arch: &Architecture,
        spec: GridSpec,
        params: Vec<Tensor<T>>,
    ) -> Result<Self, NetError> {
        let net = Self::zeros(arch, spec)?;
        if params.len() != net.params.len()
            || params.iter().zip(&net.params).any(|(a, b)| a.shape != b.shape)
        {
            return Err(NetError::InvalidArchitecture(
                "parameter tensors do not match the layer plan".into(),
            ));
        }
        Ok(Self { params, ..net })
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn params(&self) -> &[Tensor<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    pub fn cast<U: Real>(&self) -> Network<U> {
        Network {
            spec: self.spec,
            layers: self.layers.clone(),
            params: self.params.iter().map(Tensor::cast).collect(),
        }
    }

    fn check_input(&self, input: &[T]) -> Result<(), NetError> {
        let expected = self.spec.cells();
        if input.len() != expected {
            return Err(NetError::ShapeMismatch {
                expected,
                actual: input.len(),
            });
        }
        Ok(())
    }

    /// Output probabilities for one `H x W` input.
    pub fn forward(&self, input: &[T]) -> Result<Vec<T>, NetError> {
        self.check_input(input)?;
        let mut trace = self.trace(input, None);
        Ok(trace.acts.pop().unwrap_or_default())
    }

    pub fn forward_trace(&self, input: &[T]) -> Result<Trace<T>, NetError> {
        self.check_input(input)?;
        Ok(self.trace(input, None))
    }

    /// Forward pass; `offset` optionally adds a tensor to the
    /// pre-activation of one layer.
    fn trace(&self, input: &[T], offset: Option<(usize, &[T])>) -> Trace<T> {
        let (h, w) = (self.spec.height, self.spec.width);
        let hw = h * w;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(input.to_vec());
        let mut col = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            let x = acts.last().expect("non-empty");
            let (weight, bias) = (&self.params[2 * l].data, &self.params[2 * l + 1].data);
            let mut y = match *layer {
                Layer::Conv {
                    in_channels,
                    out_channels,
                    kernel,
                    ..
                } => {
                    im2col(x, in_channels, h, w, kernel, &mut col);
                    let mut y = Vec::with_capacity(out_channels * hw);
                    for &b in bias {
                        y.extend(std::iter::repeat_n(b, hw));
                    }
                    matmul_acc(&mut y, weight, &col, out_channels, in_channels * kernel * kernel, hw);
                    y
                }
                Layer::Dense {
                    inputs, outputs, ..
                } => (0..outputs)
                    .map(|o| bias[o] + dot(&weight[o * inputs..(o + 1) * inputs], x))
                    .collect(),
            };
            if let Some((target, delta)) = offset {
                if target == l {
                    for (v, &d) in y.iter_mut().zip(delta) {
                        *v += d;
                    }
                }
            }
            match layer.activation() {
                Activation::Relu => y.iter_mut().for_each(|v| *v = v.max(T::zero())),
                Activation::Sigmoid => y.iter_mut().for_each(|v| *v = sigmoid(*v)),
            }
            acts.push(y);
        }
        Trace { acts }
    }

    /// Mean BCE loss of one sample and its gradient for every parameter.
    pub fn loss_and_grad(&self, input: &[T], target: &[T]) -> Result<(T, Vec<Tensor<T>>), NetError> {
        self.check_input(input)?;
        self.check_input(target)?;
        let trace = self.trace(input, None);
        let loss = bce(trace.output(), target);
        let mut grads: Vec<Tensor<T>> = self.params.iter().map(|p| Tensor::zeros(&p.shape)).collect();
        self.backward(&trace, target, &mut grads);
        Ok((loss, grads))
    }

    /// Adds the gradient of the mean BCE loss for one sample into `grads`.
    pub fn backward(&self, trace: &Trace<T>, target: &[T], grads: &mut [Tensor<T>]) {
        let (h, w) = (self.spec.height, self.spec.width);
        let hw = h * w;
        let n = T::of(target.len() as f64);
        // logistic + cross-entropy: d loss / d logit = (p - t) / N
        let mut delta: Vec<T> = trace
            .output()
            .iter()
            .zip(target)
            .map(|(&p, &t)| (p - t) / n)
            .collect();
        let mut col = Vec::new();
        let mut dcol = Vec::new();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let x = &trace.acts[l];
            let weight = &self.params[2 * l].data;
            let (gw, rest) = grads[2 * l..].split_at_mut(1);
            let (gw, gb) = (&mut gw[0].data, &mut rest[0].data);
            let mut dx = match *layer {
                Layer::Conv {
                    in_channels,
                    out_channels,
                    kernel,
                    ..
                } => {
                    let patch = in_channels * kernel * kernel;
                    im2col(x, in_channels, h, w, kernel, &mut col);
                    matmul_bt_acc(gw, &delta, &col, out_channels, patch, hw);
                    for (o, g) in gb.iter_mut().enumerate() {
                        *g += delta[o * hw..(o + 1) * hw].iter().copied().sum::<T>();
                    }
                    if l == 0 {
                        break;
                    }
                    dcol.clear();
                    dcol.resize(patch * hw, T::zero());
                    matmul_at_acc(&mut dcol, weight, &delta, out_channels, patch, hw);
                    let mut dx = vec![T::zero(); in_channels * hw];
                    col2im(&dcol, in_channels, h, w, kernel, &mut dx);
                    dx
                }
                Layer::Dense {
                    inputs, outputs, ..
                } => {
                    for o in 0..outputs {
                        let d = delta[o];
                        gb[o] += d;
                        if d != T::zero() {
                            super::tensor::axpy(d, x, &mut gw[o * inputs..(o + 1) * inputs]);
                        }
                    }
                    if l == 0 {
                        break;
                    }
                    let mut dx = vec![T::zero(); inputs];
                    for (o, &d) in delta.iter().enumerate() {
                        if d != T::zero() {
                            super::tensor::axpy(d, &weight[o * inputs..(o + 1) * inputs], &mut dx);
                        }
                    }
                    dx
                }
            };
            // every layer below the output is ReLU; its output is x here
            for (d, &a) in dx.iter_mut().zip(x) {
                if a <= T::zero() {
                    *d = T::zero();
                }
            }
            delta = dx;
        }
    }
}
