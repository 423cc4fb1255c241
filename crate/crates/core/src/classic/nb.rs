//! Multinomial Naive Bayes. TF-IDF weights act as fractional soft
//! counts; everything runs in log space until the final softmax.

use super::TrainError;
use crate::corpus::{Label, NUM_LABELS};
use crate::features::SparseVector;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct NaiveBayesModel<S: Scalar> {
    /// ln(n_c / N) per class; -inf for classes absent from training.
    log_priors: Vec<S>,
    /// Per class, per feature: ln((W_ct + alpha) / (W_c + alpha * V)).
    log_likelihood: Vec<Vec<S>>,
    alpha: f64,
    vocab_size: usize,
}

impl<S: Scalar> NaiveBayesModel<S> {
    pub fn log_priors(&self) -> &[S] {
        &self.log_priors
    }

    pub fn log_likelihood(&self) -> &[Vec<S>] {
        &self.log_likelihood
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn from_parts(
        log_priors: Vec<S>,
        log_likelihood: Vec<Vec<S>>,
        alpha: f64,
        vocab_size: usize,
    ) -> Self {
        NaiveBayesModel {
            log_priors,
            log_likelihood,
            alpha,
            vocab_size,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NbPrediction<S: Scalar> {
    pub label: Label,
    /// Softmax over class log-scores; sums to 1.
    pub posteriors: Vec<S>,
}

/// Trains on `(vector, label)` pairs over a `vocab_size`-feature space.
pub fn nb_train<S: Scalar>(
    examples: &[(SparseVector<S>, Label)],
    vocab_size: usize,
    alpha: f64,
) -> Result<NaiveBayesModel<S>, TrainError> {
    if examples.is_empty() {
        return Err(TrainError::EmptyTrainingSet);
    }
    if alpha.is_nan() || alpha <= 0.0 {
        return Err(TrainError::InvalidAlpha(alpha));
    }
    if vocab_size == 0 {
        return Err(TrainError::NoFeatures);
    }

    let mut class_counts = [0u64; NUM_LABELS];
    // W_ct: summed feature weight of t within class c
    let mut feature_weight = vec![vec![S::zero(); vocab_size]; NUM_LABELS];
    for (x, label) in examples {
        class_counts[label.index()] += 1;
        let row = &mut feature_weight[label.index()];
        for &(index, weight) in x.entries() {
            row[index as usize] += weight;
        }
    }

    let n = examples.len() as f64;
    let log_priors = class_counts
        .iter()
        .map(|&n_c| S::cast((n_c as f64 / n).ln()))
        .collect();
    let alpha_s = S::cast(alpha);
    let denom_shift = S::cast(alpha * vocab_size as f64);
    let log_likelihood = feature_weight
        .into_iter()
        .map(|row| {
            let w_c: S = row.iter().copied().fold(S::zero(), |a, b| a + b);
            let denom = (w_c + denom_shift).ln();
            row.into_iter()
                .map(|w_ct| (w_ct + alpha_s).ln() - denom)
                .collect()
        })
        .collect();

    Ok(NaiveBayesModel {
        log_priors,
        log_likelihood,
        alpha,
        vocab_size,
    })
}

/// Scores every class in log space; the returned posteriors are the
/// softmax of those scores. Ties go to the lowest label index. An empty
/// vector reduces to the class priors.
pub fn nb_predict<S: Scalar>(model: &NaiveBayesModel<S>, x: &SparseVector<S>) -> NbPrediction<S> {
    let scores = nb_log_scores(model, x);
    let label = argmax_label(&scores);
    NbPrediction {
        label,
        posteriors: softmax(&scores),
    }
}

/// Per-class log-scores: log-prior plus weighted log-likelihoods.
pub fn nb_log_scores<S: Scalar>(model: &NaiveBayesModel<S>, x: &SparseVector<S>) -> Vec<S> {
    (0..NUM_LABELS)
        .map(|c| {
            let mut score = model.log_priors[c];
            let row = &model.log_likelihood[c];
            for &(index, weight) in x.entries() {
                score += weight * row[index as usize];
            }
            score
        })
        .collect()
}

pub(crate) fn argmax_label<S: Scalar>(scores: &[S]) -> Label {
    let mut best = 0;
    for (i, score) in scores.iter().enumerate().skip(1) {
        if *score > scores[best] {
            best = i;
        }
    }
    Label::from_index(best).expect("score vector has NUM_LABELS entries")
}

/// Numerically stable softmax (max subtraction).
pub(crate) fn softmax<S: Scalar>(scores: &[S]) -> Vec<S> {
    let max = scores
        .iter()
        .copied()
        .fold(S::neg_infinity(), |a, b| if b > a { b } else { a });
    let exps: Vec<S> = scores.iter().map(|&s| (s - max).exp()).collect();
    let sum: S = exps.iter().copied().fold(S::zero(), |a, b| a + b);
    exps.into_iter().map(|e| e / sum).collect()
}
