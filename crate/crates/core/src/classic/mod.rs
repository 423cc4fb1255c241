//! From-scratch classic classifiers over TF-IDF vectors: multinomial
//! Naive Bayes with Laplace smoothing, and a Random Forest grown on
//! bootstrap samples with per-split feature subsampling.

mod forest;
mod nb;

pub use forest::{
    best_split, rf_predict, rf_train, DecisionNode, RandomForestModel, RandomForestParams,
    RfPrediction, SplitCandidate,
};
pub use nb::{nb_log_scores, nb_predict, nb_train, NaiveBayesModel, NbPrediction};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("smoothing alpha must be positive, got {0}")]
    InvalidAlpha(f64),
    #[error("training set has no features (vocabulary size 0)")]
    NoFeatures,
}
