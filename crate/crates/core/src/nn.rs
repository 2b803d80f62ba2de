//! Small feedforward classifiers trained by per-sample gradient descent.
//!
//! The trainer is deliberately plain: uniform init scaled by fan-in, tanh or
//! relu hidden layers, softmax output, cross-entropy in nats, one gradient
//! step per sample. What matters here is reproducibility (seeded init and
//! shuffling, fixed summation order) and the activation sink, which streams
//! every layer's activations per training step to the capture side.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::capture::CapturePolicy;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HiddenActivation {
    Tanh,
    Relu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    /// Widths of every layer, input and output included.
    pub layer_widths: Vec<usize>,
    pub hidden_activation: HiddenActivation,
}

impl MlpSpec {
    pub fn validate(&self) -> Result<()> {
        if self.layer_widths.len() < 3 {
            return Err(Error::BadNetworkShape(format!(
                "need input, at least one hidden, and output layer, got {} layers",
                self.layer_widths.len()
            )));
        }
        if let Some(pos) = self.layer_widths.iter().position(|&w| w == 0) {
            return Err(Error::BadNetworkShape(format!("layer {pos} has zero width")));
        }
        Ok(())
    }

    pub fn layer_count(&self) -> usize {
        self.layer_widths.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    /// out x in.
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub layers: Vec<LayerParams>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub shuffle_each_epoch: bool,
    pub capture: CapturePolicy,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::BadTrainConfig(format!(
                "learning rate must be positive and finite, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::BadTrainConfig("epochs must be at least 1".into()));
        }
        self.capture.validate()
    }
}

/// Receives every layer's activations at each recorded training step.
pub trait ActivationSink {
    fn record(&mut self, epoch: usize, step: usize, layer: usize, values: &[f64]);
}

/// Sink for callers that only want the trained model.
pub struct NullSink;

impl ActivationSink for NullSink {
    fn record(&mut self, _: usize, _: usize, _: usize, _: &[f64]) {}
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub spec: MlpSpec,
    pub params: Params,
}

/// Loss and the full stack of activations from one training step.
#[derive(Debug, Clone)]
pub struct StepResult {
    pub loss: f64,
    /// One vector per layer: input, each hidden, softmax output.
    pub activations: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub mean_loss: f64,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub model: Mlp,
    pub epochs: Vec<EpochMetrics>,
}

// Distinct stream from parameter init so adding or removing a shuffle never
// changes the starting weights.
const SHUFFLE_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

impl Mlp {
    /// Weights drawn uniformly from +-1/sqrt(fan_in), biases zero, layer by
    /// layer in row-major order from a ChaCha8 stream seeded with `seed`.
    pub fn init(spec: MlpSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(spec.layer_widths.len() - 1);
        for pair in spec.layer_widths.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = 1.0 / (fan_in as f64).sqrt();
            let mut weights = Matrix::zeros(fan_out, fan_in);
            for r in 0..fan_out {
                for c in 0..fan_in {
                    weights.set(r, c, limit * (2.0 * rng.random::<f64>() - 1.0));
                }
            }
            layers.push(LayerParams {
                weights,
                bias: vec![0.0; fan_out],
            });
        }
        Ok(Mlp {
            spec,
            params: Params { layers },
        })
    }

    /// Activations of every layer for one input: the input itself, each
    /// hidden layer after its nonlinearity, and the softmax output.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<Vec<f64>>> {
        if input.len() != self.spec.layer_widths[0] {
            return Err(Error::InputWidthMismatch {
                expected: self.spec.layer_widths[0],
                got: input.len(),
            });
        }
        let n_weight_layers = self.params.layers.len();
        let mut activations = Vec::with_capacity(n_weight_layers + 1);
        activations.push(input.to_vec());
        for (li, layer) in self.params.layers.iter().enumerate() {
            let mut z = layer.weights.matvec(activations.last().unwrap());
            for (zi, b) in z.iter_mut().zip(&layer.bias) {
                *zi += b;
            }
            let a = if li + 1 == n_weight_layers {
                softmax(&z)
            } else {
                match self.spec.hidden_activation {
                    HiddenActivation::Tanh => z.iter().map(|&v| v.tanh()).collect(),
                    HiddenActivation::Relu => z.iter().map(|&v| v.max(0.0)).collect(),
                }
            };
            activations.push(a);
        }
        Ok(activations)
    }

    /// Cross-entropy (nats) of the network on one labelled sample.
    pub fn loss(&self, input: &[f64], label: usize) -> Result<f64> {
        let classes = *self.spec.layer_widths.last().unwrap();
        if label >= classes {
            return Err(Error::LabelOutOfRange { label, classes });
        }
        let activations = self.forward(input)?;
        Ok(-activations.last().unwrap()[label].ln())
    }

    /// One forward/backward pass with an immediate parameter update.
    /// Exact gradients: softmax + cross-entropy collapse to (p - y) at the
    /// output, hidden deltas use tanh' = 1 - a^2 or relu' = [a > 0].
    pub fn train_step(&mut self, input: &[f64], label: usize, lr: f64) -> Result<StepResult> {
        let classes = *self.spec.layer_widths.last().unwrap();
        if label >= classes {
            return Err(Error::LabelOutOfRange { label, classes });
        }
        let activations = self.forward(input)?;
        let probs = activations.last().unwrap();
        let loss = -probs[label].ln();
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch: 0, step: 0 });
        }

        let mut delta: Vec<f64> = probs.clone();
        delta[label] -= 1.0;
        for li in (0..self.params.layers.len()).rev() {
            // propagate through the pre-update weights before touching them
            let delta_prev = if li > 0 {
                let mut d = self.params.layers[li].weights.matvec_t(&delta);
                let a = &activations[li];
                match self.spec.hidden_activation {
                    HiddenActivation::Tanh => {
                        for (di, &ai) in d.iter_mut().zip(a) {
                            *di *= 1.0 - ai * ai;
                        }
                    }
                    HiddenActivation::Relu => {
                        for (di, &ai) in d.iter_mut().zip(a) {
                            if ai <= 0.0 {
                                *di = 0.0;
                            }
                        }
                    }
                }
                Some(d)
            } else {
                None
            };

            let layer = &mut self.params.layers[li];
            let below = &activations[li];
            for r in 0..layer.weights.rows() {
                let dr = delta[r];
                let row = layer.weights.row_mut(r);
                for (w, &a) in row.iter_mut().zip(below) {
                    *w -= lr * dr * a;
                }
                layer.bias[r] -= lr * dr;
            }
            if let Some(d) = delta_prev {
                delta = d;
            }
        }
        Ok(StepResult { loss, activations })
    }
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Fraction of samples whose argmax class matches the label.
pub fn evaluate(mlp: &Mlp, data: &Dataset) -> Result<f64> {
    let mut correct = 0usize;
    for i in 0..data.len() {
        let out = mlp.forward(data.features_row(i))?;
        let probs = out.last().unwrap();
        let pred = probs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap();
        if pred == data.label(i) {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}

/// Full training run: seeded init, optionally re-shuffled sample order per
/// epoch, per-sample updates, post-warm-up activations streamed to `sink`,
/// and per-epoch loss/accuracy metrics.
pub fn train(
    spec: &MlpSpec,
    config: &TrainConfig,
    train_set: &Dataset,
    test_set: &Dataset,
    sink: &mut dyn ActivationSink,
) -> Result<RunResult> {
    spec.validate()?;
    config.validate()?;
    if train_set.len() == 0 {
        return Err(Error::EmptyDataset("training split has no samples".into()));
    }
    if test_set.len() == 0 {
        return Err(Error::EmptyDataset("test split has no samples".into()));
    }
    if train_set.feature_count() != spec.layer_widths[0] {
        return Err(Error::InputWidthMismatch {
            expected: spec.layer_widths[0],
            got: train_set.feature_count(),
        });
    }
    let classes = *spec.layer_widths.last().unwrap();
    if train_set.class_count() != classes {
        return Err(Error::BadNetworkShape(format!(
            "output layer has {classes} units but the dataset has {} classes",
            train_set.class_count()
        )));
    }

    let mut mlp = Mlp::init(spec.clone(), config.seed)?;
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed ^ SHUFFLE_STREAM);
    let n = train_set.len();
    let cutoff = config.capture.warmup_cutoff(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut epochs = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        if config.shuffle_each_epoch {
            order.shuffle(&mut shuffle_rng);
        }
        let mut loss_sum = 0.0;
        for (step, &idx) in order.iter().enumerate() {
            let out = mlp
                .train_step(train_set.features_row(idx), train_set.label(idx), config.learning_rate)
                .map_err(|e| match e {
                    Error::Divergence { .. } => Error::Divergence { epoch, step },
                    other => other,
                })?;
            loss_sum += out.loss;
            if step >= cutoff {
                for (layer, values) in out.activations.iter().enumerate() {
                    sink.record(epoch, step, layer, values);
                }
            }
        }
        epochs.push(EpochMetrics {
            epoch,
            mean_loss: loss_sum / n as f64,
            train_accuracy: evaluate(&mlp, train_set)?,
            test_accuracy: evaluate(&mlp, test_set)?,
        });
    }
    Ok(RunResult { model: mlp, epochs })
}
