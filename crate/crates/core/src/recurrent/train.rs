//! Mini-batch gradient-descent training with a step-decayed learning
//! rate, seeded shuffling, and global gradient-norm clipping.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{backward, RecurrentError, RecurrentModel};
use crate::features::TokenIdSequence;
use crate::scalar::Scalar;

const GRAD_CLIP_NORM: f64 = 5.0;

/// Hyperparameters for recurrent training. The defaults are the standard
/// setup: 50 epochs, batches of 64, learning rate 1e-3 decayed by 0.1
/// every 10 epochs, vocabulary capped at 10,000, 70:30 split, sequences
/// truncated at 200 tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Epochs between learning-rate decays.
    pub lr_step: usize,
    /// Decay factor applied every `lr_step` epochs.
    pub lr_gamma: f64,
    pub class_weights: Option<Vec<f64>>,
    pub max_vocab: usize,
    pub split_ratio: f64,
    pub seed: u64,
    pub max_len: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 64,
            learning_rate: 1e-3,
            lr_step: 10,
            lr_gamma: 0.1,
            class_weights: None,
            max_vocab: 10_000,
            split_ratio: 0.7,
            seed: 0,
            max_len: 200,
        }
    }
}

impl TrainingConfig {
    /// Learning rate at `epoch`: `learning_rate * lr_gamma^(epoch / lr_step)`.
    /// When 1/gamma is an integer (0.1, 0.5, ...) the power is computed by
    /// exact integer-reciprocal division so decimal schedule values come
    /// out bit-exact (0.001, 0.0001, ...).
    pub fn lr_at(&self, epoch: usize) -> f64 {
        let k = (epoch / self.lr_step) as i32;
        let recip = 1.0 / self.lr_gamma;
        let rounded = recip.round();
        if rounded >= 1.0 && (recip - rounded).abs() < 1e-9 {
            self.learning_rate / rounded.powi(k)
        } else {
            self.learning_rate * self.lr_gamma.powi(k)
        }
    }

    pub fn validate(&self) -> Result<(), RecurrentError> {
        let bad = |msg: &str| Err(RecurrentError::InvalidConfig(msg.to_string()));
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return bad("learning_rate must be positive");
        }
        if self.lr_step == 0 {
            return bad("lr_step must be positive");
        }
        if self.lr_gamma.is_nan() || self.lr_gamma <= 0.0 {
            return bad("lr_gamma must be positive");
        }
        if self.max_vocab < 3 {
            return bad("max_vocab must be at least 3 (PAD, UNK, one term)");
        }
        if self.split_ratio.is_nan() || self.split_ratio <= 0.0 || self.split_ratio >= 1.0 {
            return bad("split_ratio must lie in (0, 1)");
        }
        if self.max_len == 0 {
            return bad("max_len must be positive");
        }
        if let Some(weights) = &self.class_weights {
            if weights.iter().any(|w| w.is_nan() || *w <= 0.0) {
                return bad("class weights must be positive");
            }
        }
        Ok(())
    }
}

/// Mean training loss per epoch; length always equals the configured
/// epoch count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossCurve {
    losses: Vec<f64>,
}

impl LossCurve {
    pub fn from_losses(losses: Vec<f64>) -> Self {
        LossCurve { losses }
    }

    pub fn losses(&self) -> &[f64] {
        &self.losses
    }

    pub fn len(&self) -> usize {
        self.losses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.losses.is_empty()
    }
}

/// Trains the model in place over seeded shuffled mini-batches, applying
/// plain first-order updates `w <- w - lr * g` after clipping the global
/// gradient norm at 5.0. Returns the trained model and the per-epoch
/// mean training loss.
pub fn train<S: Scalar>(
    mut model: RecurrentModel<S>,
    data: &[(TokenIdSequence, usize)],
    cfg: &TrainingConfig,
) -> Result<(RecurrentModel<S>, LossCurve), RecurrentError> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(RecurrentError::InvalidConfig(
            "training dataset is empty".to_string(),
        ));
    }
    let class_weights: Option<Vec<S>> = cfg
        .class_weights
        .as_ref()
        .map(|w| w.iter().map(|&v| S::cast(v)).collect());

    // stream 0 seeds weight init; stream 1 drives the shuffles
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    shuffle_rng.set_stream(1);

    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut losses = Vec::with_capacity(cfg.epochs);
    let clip = S::cast(GRAD_CLIP_NORM);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let lr = S::cast(cfg.lr_at(epoch));
        let mut epoch_loss_sum = S::zero();
        let mut epoch_weight_sum = S::zero();

        for (batch_index, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<(&TokenIdSequence, usize)> =
                chunk.iter().map(|&i| (&data[i].0, data[i].1)).collect();
            let result = backward(&model, &batch, class_weights.as_deref())?;
            if !result.mean_loss().is_finite() {
                return Err(RecurrentError::NonFiniteLoss {
                    epoch,
                    batch: batch_index,
                });
            }
            epoch_loss_sum += result.loss_sum;
            epoch_weight_sum += result.weight_sum;

            let norm = result
                .grads
                .slices()
                .iter()
                .flat_map(|s| s.iter())
                .map(|&g| g * g)
                .fold(S::zero(), |a, b| a + b)
                .sqrt();
            let scale = if norm > clip { clip / norm } else { S::one() };
            let step = lr * scale;
            for (w_slice, g_slice) in model
                .weights_mut()
                .slices_mut()
                .into_iter()
                .zip(result.grads.slices())
            {
                for (w, &g) in w_slice.iter_mut().zip(g_slice) {
                    *w -= step * g;
                }
            }
        }
        losses.push((epoch_loss_sum / epoch_weight_sum).to_f64_lossy());
    }
    Ok((model, LossCurve { losses }))
}
