//! Training loop: minibatch cross-entropy with backpropagation through
//! every layer (including the PReLU slope) and Adam updates.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{forward_trace, ClassifierError, MlpModel, NUM_LAYERS};
use crate::embedding::EmbeddingVector;

/// Hyperparameters for [`train`]. Defaults: 3 epochs, learning rate 0.005,
/// batch size 32, 10% validation split.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub val_fraction: f64,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 3,
            learning_rate: 0.005,
            batch_size: 32,
            val_fraction: 0.1,
            seed: 0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
        }
    }
}

/// Loss and validation accuracy for one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    /// Mean cross-entropy over the training examples seen this epoch.
    pub train_loss: f64,
    /// Accuracy on the held-out validation split; `None` when the split
    /// is empty.
    pub val_accuracy: Option<f64>,
}

pub type TrainHistory = Vec<EpochStats>;

/// Gradients of the mean batch loss with respect to every parameter, in
/// the model's layer order (weights row-major, then the PReLU slope).
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub prelu_alpha: f64,
}

impl Gradients {
    fn zeros(model: &MlpModel) -> Self {
        Self {
            weights: model.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: model.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
            prelu_alpha: 0.0,
        }
    }
}

fn validate_batch(
    model: &MlpModel,
    data: &[(EmbeddingVector, u8)],
) -> Result<(), ClassifierError> {
    if data.is_empty() {
        return Err(ClassifierError::EmptyTrainingSet);
    }
    for (x, label) in data {
        if x.dim() != model.input_dim() {
            return Err(ClassifierError::DimensionMismatch {
                expected: model.input_dim(),
                got: x.dim(),
            });
        }
        if *label > 1 {
            return Err(ClassifierError::InvalidLabel(*label));
        }
    }
    Ok(())
}

/// Gradients of the mean cross-entropy over `batch`, via backpropagation.
pub fn loss_gradients(
    model: &MlpModel,
    batch: &[(EmbeddingVector, u8)],
) -> Result<Gradients, ClassifierError> {
    validate_batch(model, batch)?;
    let (grads, _) = accumulate_batch(model, batch.iter().map(|(x, y)| (x, *y)), batch.len());
    Ok(grads)
}

/// Mean cross-entropy of the model over `data` (no parameter updates).
pub fn mean_cross_entropy(
    model: &MlpModel,
    data: &[(EmbeddingVector, u8)],
) -> Result<f64, ClassifierError> {
    validate_batch(model, data)?;
    let mut sum = 0.0;
    for (x, label) in data {
        let trace = forward_trace(model, &x.values);
        sum += sample_loss(&trace.post[NUM_LAYERS - 1], *label).1;
    }
    Ok(sum / data.len() as f64)
}

/// Log-softmax based loss: returns (probabilities, -log p_label).
fn sample_loss(logits: &[f64], label: u8) -> ([f64; 2], f64) {
    let max = logits[0].max(logits[1]);
    let lse = max + ((logits[0] - max).exp() + (logits[1] - max).exp()).ln();
    let logp = [logits[0] - lse, logits[1] - lse];
    let probs = [logp[0].exp(), logp[1].exp()];
    (probs, -logp[label as usize])
}

/// Backprop over one batch. Returns mean-loss gradients and the summed
/// per-sample loss.
fn accumulate_batch<'a>(
    model: &MlpModel,
    samples: impl Iterator<Item = (&'a EmbeddingVector, u8)>,
    batch_len: usize,
) -> (Gradients, f64) {
    let mut grads = Gradients::zeros(model);
    let mut loss_sum = 0.0;
    let scale = 1.0 / batch_len as f64;
    let alpha = model.prelu_alpha as f64;

    for (x, label) in samples {
        let trace = forward_trace(model, &x.values);
        let logits = &trace.post[NUM_LAYERS - 1];
        let (probs, loss) = sample_loss(logits, label);
        loss_sum += loss;

        // delta = dL/dz for the current layer, starting at the output.
        let mut delta = vec![probs[0] * scale, probs[1] * scale];
        delta[label as usize] -= scale;

        for l in (0..NUM_LAYERS).rev() {
            let fan_in = model.layer_dims[l];
            let prev: &[f64] = if l == 0 { &x.values } else { &trace.post[l - 1] };
            let gw = &mut grads.weights[l];
            for (row, d) in delta.iter().enumerate() {
                let row_start = row * fan_in;
                for (col, p) in prev.iter().enumerate() {
                    gw[row_start + col] += d * p;
                }
                grads.biases[l][row] += d;
            }
            if l == 0 {
                break;
            }
            // dL/da for the previous layer's activations.
            let w = &model.weights[l];
            let mut da = vec![0.0f64; fan_in];
            for (row, d) in delta.iter().enumerate() {
                let row_start = row * fan_in;
                for (col, slot) in da.iter_mut().enumerate() {
                    *slot += w[row_start + col] as f64 * d;
                }
            }
            let z_prev = &trace.pre[l - 1];
            let mut next_delta = vec![0.0f64; fan_in];
            if l - 1 == 1 {
                // PReLU layer: slope gradient flows from negative inputs.
                for j in 0..fan_in {
                    if z_prev[j] < 0.0 {
                        grads.prelu_alpha += da[j] * z_prev[j];
                        next_delta[j] = da[j] * alpha;
                    } else {
                        next_delta[j] = da[j];
                    }
                }
            } else {
                for j in 0..fan_in {
                    next_delta[j] = if z_prev[j] > 0.0 { da[j] } else { 0.0 };
                }
            }
            delta = next_delta;
        }
    }
    (grads, loss_sum)
}

struct AdamState {
    t: u64,
    m_weights: Vec<Vec<f64>>,
    v_weights: Vec<Vec<f64>>,
    m_biases: Vec<Vec<f64>>,
    v_biases: Vec<Vec<f64>>,
    m_alpha: f64,
    v_alpha: f64,
}

impl AdamState {
    fn new(model: &MlpModel) -> Self {
        Self {
            t: 0,
            m_weights: model.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            v_weights: model.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            m_biases: model.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
            v_biases: model.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
            m_alpha: 0.0,
            v_alpha: 0.0,
        }
    }

    fn step(&mut self, model: &mut MlpModel, grads: &Gradients, config: &TrainConfig) {
        self.t += 1;
        let bc1 = 1.0 - config.adam_beta1.powi(self.t as i32);
        let bc2 = 1.0 - config.adam_beta2.powi(self.t as i32);
        let update = |theta: f32, g: f64, m: &mut f64, v: &mut f64| -> f32 {
            *m = config.adam_beta1 * *m + (1.0 - config.adam_beta1) * g;
            *v = config.adam_beta2 * *v + (1.0 - config.adam_beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            (theta as f64 - config.learning_rate * m_hat / (v_hat.sqrt() + config.adam_epsilon))
                as f32
        };
        for l in 0..NUM_LAYERS {
            for i in 0..model.weights[l].len() {
                model.weights[l][i] = update(
                    model.weights[l][i],
                    grads.weights[l][i],
                    &mut self.m_weights[l][i],
                    &mut self.v_weights[l][i],
                );
            }
            for i in 0..model.biases[l].len() {
                model.biases[l][i] = update(
                    model.biases[l][i],
                    grads.biases[l][i],
                    &mut self.m_biases[l][i],
                    &mut self.v_biases[l][i],
                );
            }
        }
        model.prelu_alpha = update(
            model.prelu_alpha,
            grads.prelu_alpha,
            &mut self.m_alpha,
            &mut self.v_alpha,
        );
    }
}

/// Trains a copy of `model` on `data`.
///
/// A seeded shuffle splits `val_fraction` off the end for validation; the
/// rest is reshuffled each epoch and consumed in minibatches (the final
/// partial batch is kept). Returns the trained model and per-epoch stats.
pub fn train(
    model: &MlpModel,
    data: &[(EmbeddingVector, u8)],
    config: &TrainConfig,
) -> Result<(MlpModel, TrainHistory), ClassifierError> {
    if config.epochs == 0 {
        return Err(ClassifierError::BadConfig("epochs must be >= 1".into()));
    }
    if !config.learning_rate.is_finite() || config.learning_rate <= 0.0 {
        return Err(ClassifierError::BadConfig(
            "learning_rate must be positive".into(),
        ));
    }
    if config.batch_size == 0 {
        return Err(ClassifierError::BadConfig("batch_size must be >= 1".into()));
    }
    if !(0.0..1.0).contains(&config.val_fraction) {
        return Err(ClassifierError::BadConfig(
            "val_fraction must be in [0, 1)".into(),
        ));
    }
    validate_batch(model, data)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut rng);
    let val_count = (data.len() as f64 * config.val_fraction) as usize;
    let split_at = data.len() - val_count;
    let (train_part, val_part) = order.split_at(split_at);
    let mut train_idx = train_part.to_vec();
    let val_idx = val_part.to_vec();
    if train_idx.is_empty() {
        return Err(ClassifierError::BadConfig(
            "val_fraction leaves no training data".into(),
        ));
    }

    let mut model = model.clone();
    let mut adam = AdamState::new(&model);
    let mut history = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        train_idx.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in train_idx.chunks(config.batch_size) {
            let (grads, batch_loss) = accumulate_batch(
                &model,
                chunk.iter().map(|&i| (&data[i].0, data[i].1)),
                chunk.len(),
            );
            loss_sum += batch_loss;
            adam.step(&mut model, &grads, config);
        }
        let val_accuracy = if val_idx.is_empty() {
            None
        } else {
            let correct = val_idx
                .iter()
                .filter(|&&i| {
                    let trace = forward_trace(&model, &data[i].0.values);
                    let logits = &trace.post[NUM_LAYERS - 1];
                    let label: u8 = if logits[1] > logits[0] { 1 } else { 0 };
                    label == data[i].1
                })
                .count();
            Some(correct as f64 / val_idx.len() as f64)
        };
        history.push(EpochStats {
            train_loss: loss_sum / train_idx.len() as f64,
            val_accuracy,
        });
    }
    Ok((model, history))
}
