//! Five-layer fully connected classifier: forward pass, prediction with
//! confidence, gradient-based training, and binary model persistence.
//!
//! The network reduces 1152 → 512 → 128 → 32 → 8 → 2 with ReLU
//! activations except for a learnable-slope PReLU after the second layer
//! and an identity output layer. Parameters are stored as `f32` (matching
//! the on-disk format exactly, so persistence is lossless); all arithmetic
//! runs in `f64`.

mod io;
mod train;

pub use io::{load_model, save_model};
pub use train::{
    loss_gradients, mean_cross_entropy, train, EpochStats, Gradients, TrainConfig, TrainHistory,
};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::embedding::EmbeddingVector;

/// Default layer widths, input to output.
pub const DEFAULT_LAYER_DIMS: [usize; 6] = [1152, 512, 128, 32, 8, 2];

/// Number of weight layers.
pub const NUM_LAYERS: usize = 5;

/// Activation applied after each layer, in order.
pub const ACTIVATION_NAMES: [&str; NUM_LAYERS] = ["relu", "prelu", "relu", "relu", "identity"];

/// Initial slope of the PReLU activation.
pub const PRELU_ALPHA_INIT: f32 = 0.25;

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("input has dim {got}, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("logits are not finite")]
    NonFiniteLogits,
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("label {0} is outside {{0,1}}")]
    InvalidLabel(u8),
    #[error("invalid training config: {0}")]
    BadConfig(String),
    #[error("invalid model shape: {0}")]
    BadShape(String),
    #[error("failed to access {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
    #[error("corrupt model file: {0}")]
    CorruptFile(String),
    #[error("model format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("model file checksum mismatch")]
    ChecksumMismatch,
}

/// Weights, biases, and the PReLU slope of the five-layer network.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layer_dims: [usize; 6],
    /// Row-major `(layer_dims[l+1] × layer_dims[l])` matrices.
    weights: Vec<Vec<f32>>,
    biases: Vec<Vec<f32>>,
    prelu_alpha: f32,
    seed: u64,
}

/// Classifier output for one input vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelPrediction {
    pub label: u8,
    /// Max softmax probability; in [0.5, 1] for two classes.
    pub confidence: f64,
    pub probabilities: [f64; 2],
}

impl MlpModel {
    /// Initializes a model with the given layer widths: weights uniform in
    /// ±1/sqrt(fan_in), biases zero, PReLU slope 0.25. Deterministic per
    /// seed.
    pub fn init_with_dims(layer_dims: [usize; 6], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::with_capacity(NUM_LAYERS);
        let mut biases = Vec::with_capacity(NUM_LAYERS);
        for l in 0..NUM_LAYERS {
            let fan_in = layer_dims[l];
            let fan_out = layer_dims[l + 1];
            let bound = 1.0 / (fan_in as f64).sqrt();
            let mut w = Vec::with_capacity(fan_out * fan_in);
            for _ in 0..fan_out * fan_in {
                let sample = rng.gen_range(-bound..bound);
                w.push(quantize_within(sample, bound));
            }
            weights.push(w);
            biases.push(vec![0.0f32; fan_out]);
        }
        Self {
            layer_dims,
            weights,
            biases,
            prelu_alpha: PRELU_ALPHA_INIT,
            seed,
        }
    }

    /// Builds a model from explicit parameters, validating shapes.
    pub fn from_parts(
        layer_dims: [usize; 6],
        weights: Vec<Vec<f32>>,
        biases: Vec<Vec<f32>>,
        prelu_alpha: f32,
        seed: u64,
    ) -> Result<Self, ClassifierError> {
        if layer_dims.contains(&0) {
            return Err(ClassifierError::BadShape("zero layer width".into()));
        }
        if weights.len() != NUM_LAYERS || biases.len() != NUM_LAYERS {
            return Err(ClassifierError::BadShape(format!(
                "expected {NUM_LAYERS} weight and bias layers, got {} and {}",
                weights.len(),
                biases.len()
            )));
        }
        for l in 0..NUM_LAYERS {
            let expected_w = layer_dims[l + 1] * layer_dims[l];
            if weights[l].len() != expected_w {
                return Err(ClassifierError::BadShape(format!(
                    "layer {l} weight count {} != {expected_w}",
                    weights[l].len()
                )));
            }
            if biases[l].len() != layer_dims[l + 1] {
                return Err(ClassifierError::BadShape(format!(
                    "layer {l} bias count {} != {}",
                    biases[l].len(),
                    layer_dims[l + 1]
                )));
            }
        }
        let finite = weights
            .iter()
            .flatten()
            .chain(biases.iter().flatten())
            .all(|v| v.is_finite());
        if !finite || !prelu_alpha.is_finite() {
            return Err(ClassifierError::BadShape("non-finite parameter".into()));
        }
        Ok(Self {
            layer_dims,
            weights,
            biases,
            prelu_alpha,
            seed,
        })
    }

    pub fn layer_dims(&self) -> &[usize; 6] {
        &self.layer_dims
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn weights(&self, layer: usize) -> &[f32] {
        &self.weights[layer]
    }

    pub fn biases(&self, layer: usize) -> &[f32] {
        &self.biases[layer]
    }

    pub fn prelu_alpha(&self) -> f32 {
        self.prelu_alpha
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Initializes the default 1152→512→128→32→8→2 model.
pub fn init_model(seed: u64) -> MlpModel {
    MlpModel::init_with_dims(DEFAULT_LAYER_DIMS, seed)
}

// f64→f32 rounding may overshoot the open sampling interval by half an
// ulp; nudge back toward zero so |w| ≤ bound holds exactly.
fn quantize_within(sample: f64, bound: f64) -> f32 {
    let w = sample as f32;
    if w != 0.0 && (w as f64).abs() > bound {
        f32::from_bits(w.to_bits() - 1)
    } else {
        w
    }
}

pub(crate) struct ForwardTrace {
    /// Pre-activation values per layer.
    pub pre: Vec<Vec<f64>>,
    /// Post-activation values per layer (last entry = logits).
    pub post: Vec<Vec<f64>>,
}

pub(crate) fn forward_trace(model: &MlpModel, x: &[f64]) -> ForwardTrace {
    let mut pre = Vec::with_capacity(NUM_LAYERS);
    let mut post = Vec::with_capacity(NUM_LAYERS);
    let mut input: &[f64] = x;
    for l in 0..NUM_LAYERS {
        let fan_in = model.layer_dims[l];
        let fan_out = model.layer_dims[l + 1];
        let w = &model.weights[l];
        let b = &model.biases[l];
        let mut z = Vec::with_capacity(fan_out);
        for (row, bias) in b.iter().enumerate() {
            let mut sum = *bias as f64;
            let row_start = row * fan_in;
            for (weight, value) in w[row_start..row_start + fan_in].iter().zip(input) {
                sum += *weight as f64 * value;
            }
            z.push(sum);
        }
        let a = apply_activation(l, &z, model.prelu_alpha as f64);
        pre.push(z);
        post.push(a);
        input = post.last().unwrap();
    }
    ForwardTrace { pre, post }
}

fn apply_activation(layer: usize, z: &[f64], alpha: f64) -> Vec<f64> {
    match layer {
        1 => z
            .iter()
            .map(|&t| if t >= 0.0 { t } else { alpha * t })
            .collect(),
        4 => z.to_vec(),
        _ => z.iter().map(|&t| t.max(0.0)).collect(),
    }
}

/// Runs the network on one input vector and returns the two output logits.
pub fn forward(model: &MlpModel, x: &EmbeddingVector) -> Result<[f64; 2], ClassifierError> {
    if x.dim() != model.input_dim() {
        return Err(ClassifierError::DimensionMismatch {
            expected: model.input_dim(),
            got: x.dim(),
        });
    }
    let trace = forward_trace(model, &x.values);
    let logits = &trace.post[NUM_LAYERS - 1];
    Ok([logits[0], logits[1]])
}

/// Max-shifted two-class softmax.
pub fn softmax(logits: [f64; 2]) -> Result<[f64; 2], ClassifierError> {
    if !logits[0].is_finite() || !logits[1].is_finite() {
        return Err(ClassifierError::NonFiniteLogits);
    }
    let max = logits[0].max(logits[1]);
    let e0 = (logits[0] - max).exp();
    let e1 = (logits[1] - max).exp();
    let sum = e0 + e1;
    Ok([e0 / sum, e1 / sum])
}

/// Predicts a label with its confidence (max softmax probability). Ties
/// resolve to label 0.
pub fn predict(model: &MlpModel, x: &EmbeddingVector) -> Result<ModelPrediction, ClassifierError> {
    let logits = forward(model, x)?;
    let probabilities = softmax(logits)?;
    let label = if probabilities[1] > probabilities[0] { 1 } else { 0 };
    Ok(ModelPrediction {
        label,
        confidence: probabilities[label as usize],
        probabilities,
    })
}
