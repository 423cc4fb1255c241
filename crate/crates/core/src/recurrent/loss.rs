//! Cross-entropy loss with optional per-class weights for imbalanced
//! corpora.

use super::RecurrentError;
use crate::corpus::{LabelHistogram, NUM_LABELS};
use crate::scalar::Scalar;

/// Softmax with max subtraction.
pub fn softmax_stable<S: Scalar>(logits: &[S]) -> Vec<S> {
    let max = logits
        .iter()
        .copied()
        .fold(S::neg_infinity(), |a, b| if b > a { b } else { a });
    let exps: Vec<S> = logits.iter().map(|&v| (v - max).exp()).collect();
    let sum: S = exps.iter().copied().fold(S::zero(), |a, b| a + b);
    exps.into_iter().map(|e| e / sum).collect()
}

/// `w[target] * (-ln softmax(logits)[target])`; weights default to 1.
pub fn weighted_cross_entropy<S: Scalar>(
    logits: &[S],
    target: usize,
    class_weights: Option<&[S]>,
) -> S {
    debug_assert!(target < logits.len());
    let max = logits
        .iter()
        .copied()
        .fold(S::neg_infinity(), |a, b| if b > a { b } else { a });
    let log_sum: S = logits
        .iter()
        .map(|&v| (v - max).exp())
        .fold(S::zero(), |a, b| a + b)
        .ln();
    let nll = log_sum - (logits[target] - max);
    match class_weights {
        Some(w) => w[target] * nll,
        None => nll,
    }
}

/// Weight-normalized batch mean: sum of per-example weighted losses over
/// the sum of the applied weights. With all-equal weights this equals the
/// plain mean loss.
pub fn batch_loss<S: Scalar>(
    logits: &[Vec<S>],
    targets: &[usize],
    class_weights: Option<&[S]>,
) -> S {
    debug_assert_eq!(logits.len(), targets.len());
    let mut loss_sum = S::zero();
    let mut weight_sum = S::zero();
    for (l, &t) in logits.iter().zip(targets) {
        loss_sum += weighted_cross_entropy(l, t, class_weights);
        weight_sum += class_weights.map_or(S::one(), |w| w[t]);
    }
    loss_sum / weight_sum
}

/// Balanced class weights `w[c] = N / (K * n_c)` over `counts`; every
/// count must be positive.
pub fn compute_class_weights_for(counts: &[u64]) -> Result<Vec<f64>, RecurrentError> {
    if let Some(index) = counts.iter().position(|&c| c == 0) {
        return Err(RecurrentError::ZeroClassCount { index });
    }
    let n: u64 = counts.iter().sum();
    let k = counts.len() as f64;
    Ok(counts
        .iter()
        .map(|&n_c| n as f64 / (k * n_c as f64))
        .collect())
}

/// Class weights over the nine canonical labels.
pub fn compute_class_weights(hist: &LabelHistogram) -> Result<[f64; NUM_LABELS], RecurrentError> {
    let weights = compute_class_weights_for(hist.counts())?;
    Ok(weights.try_into().expect("NUM_LABELS weights"))
}
