//! Library for classifying GitHub issues into the nine default labels:
//! corpus ingestion, deterministic text preprocessing, TF-IDF and
//! sequence features, from-scratch Naive Bayes / Random Forest /
//! recurrent (RNN, LSTM, GRU) classifiers, evaluation reports, and a
//! versioned model store.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`); the
//! crate root exports `f64` aliases, which is what the CLI and the
//! on-disk model format use.

pub mod classic;
pub mod corpus;
pub mod eval;
pub mod features;
pub mod recurrent;
pub mod scalar;
pub mod store;
pub mod synth;
pub mod textprep;

pub use classic::{
    best_split, nb_predict, nb_train, rf_predict, rf_train, RandomForestParams, TrainError,
};
pub use corpus::{
    default_label_histogram, label_histogram, merge_and_clean, resolve_token, select_single_label,
    CorpusError, FetchError, GithubClient, GithubClientConfig, IssueRecord, IssueState, Label,
    LabelHistogram, LabeledExample, RepoSlug, StateFilter, NUM_LABELS,
};
pub use eval::{
    confusion, emit_report, metrics, stratified_split, ClassMetrics, ConfusionMatrix, EvalError,
    EvaluationReport, MetricsSummary,
};
pub use features::{
    build_vocabulary, encode_sequence, tfidf_fit, tfidf_transform, FeatureError, FieldSelector,
    TokenIdSequence, VocabMode, Vocabulary, PAD, UNK,
};
pub use recurrent::{
    backward, cell_forward, compute_class_weights, compute_class_weights_for, forward_sequence,
    train, weighted_cross_entropy, CellKind, CellState, Dims, LossCurve, RecurrentError,
    TrainingConfig,
};
pub use scalar::Scalar;
pub use store::{load, save, ClassicMeta, StoreError, FILE_EXTENSION, FORMAT_VERSION, MAGIC};
pub use textprep::{
    normalize, preprocess, strip_markup, tokenize_stem_filter, PipelineConfig, StemmerKind,
    TokenList, STOPWORDS_VERSION,
};

/// Double-precision aliases used by the CLI and the model store.
pub type SparseVector = features::SparseVector<f64>;
pub type TfIdfModel = features::TfIdfModel<f64>;
pub type NaiveBayesModel = classic::NaiveBayesModel<f64>;
pub type RandomForestModel = classic::RandomForestModel<f64>;
pub type RecurrentModel = recurrent::RecurrentModel<f64>;
pub type ModelBundle = store::ModelBundle<f64>;
pub type ModelPayload = store::ModelPayload<f64>;
