//! Command-line argument definitions.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ghic_core::corpus::StateFilter;
use ghic_core::features::FieldSelector;
use ghic_core::recurrent::CellKind;
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "ghic",
    version,
    about = "Classify GitHub issues into the nine default labels"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fetch issues from the GitHub API into per-repo dump files
    Fetch(FetchArgs),
    /// Merge and clean dumps into a single-label dataset
    Prepare(PrepareArgs),
    /// Train a model and report held-out metrics
    Train(TrainArgs),
    /// Evaluate a saved model on a labeled dataset
    Evaluate(EvaluateArgs),
    /// Predict labels for unlabeled issues
    Predict(PredictArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StateArg {
    Open,
    Closed,
    All,
}

impl From<StateArg> for StateFilter {
    fn from(value: StateArg) -> Self {
        match value {
            StateArg::Open => StateFilter::Open,
            StateArg::Closed => StateFilter::Closed,
            StateArg::All => StateFilter::All,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelArg {
    Nb,
    Rf,
    Rnn,
    Lstm,
    Gru,
}

impl ModelArg {
    pub fn is_recurrent(self) -> bool {
        matches!(self, ModelArg::Rnn | ModelArg::Lstm | ModelArg::Gru)
    }

    pub fn cell_kind(self) -> Option<CellKind> {
        match self {
            ModelArg::Rnn => Some(CellKind::Simple),
            ModelArg::Lstm => Some(CellKind::Lstm),
            ModelArg::Gru => Some(CellKind::Gru),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldArg {
    Title,
    Body,
    Both,
}

impl From<FieldArg> for FieldSelector {
    fn from(value: FieldArg) -> Self {
        match value {
            FieldArg::Title => FieldSelector::Title,
            FieldArg::Body => FieldSelector::Body,
            FieldArg::Both => FieldSelector::Both,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct FetchArgs {
    /// File listing one owner/name repository per line
    #[arg(long)]
    pub repos: PathBuf,
    /// Output directory for per-repo dump files
    #[arg(long)]
    pub out: PathBuf,
    /// Issue state filter
    #[arg(long, value_enum, default_value_t = StateArg::All)]
    pub state: StateArg,
    /// API token; falls back to the GITHUB_TOKEN environment variable
    #[arg(long)]
    #[serde(skip_serializing)]
    pub token: Option<String>,
    /// API base URL override (fixture servers, GitHub Enterprise)
    #[arg(long, default_value = "https://api.github.com")]
    pub base_url: String,
}

#[derive(Debug, Args, Serialize)]
pub struct PrepareArgs {
    /// Dump directory or a single dump file (.jsonl or .csv)
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output dataset path (line-delimited JSON)
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    /// Prepared dataset (from `ghic prepare`)
    #[arg(long)]
    pub data: PathBuf,
    /// Model kind
    #[arg(long, value_enum)]
    pub model: ModelArg,
    /// Output model file
    #[arg(long)]
    pub out: PathBuf,
    /// Text field(s) to train on; defaults to title for nb/rf, both for
    /// recurrent models
    #[arg(long, value_enum)]
    pub field: Option<FieldArg>,
    /// Train fraction; defaults to 0.8 for nb/rf, 0.7 for recurrent
    /// models
    #[arg(long)]
    pub split: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Weight the loss by inverse class frequency (recurrent models)
    #[arg(long, default_value_t = false)]
    pub class_weights: bool,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    /// Epochs between learning-rate decays
    #[arg(long, default_value_t = 10)]
    pub lr_step: usize,
    /// Learning-rate decay factor
    #[arg(long, default_value_t = 0.1)]
    pub gamma: f64,
    #[arg(long, default_value_t = 100)]
    pub hidden: usize,
    #[arg(long, default_value_t = 100)]
    pub embed: usize,
    /// Vocabulary cap; defaults to 10000 for recurrent models and
    /// uncapped for TF-IDF
    #[arg(long)]
    pub vocab: Option<usize>,
    #[arg(long, default_value_t = 200)]
    pub max_len: usize,
    /// Naive Bayes smoothing
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Random Forest size
    #[arg(long, default_value_t = 100)]
    pub trees: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    /// Saved model bundle (.ghic)
    #[arg(long)]
    pub model: PathBuf,
    /// Labeled dataset to evaluate on
    #[arg(long)]
    pub data: PathBuf,
    /// Report output directory
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct PredictArgs {
    /// Saved model bundle (.ghic)
    #[arg(long)]
    pub model: PathBuf,
    /// Unlabeled issues (dump schema, line-delimited JSON)
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output file: one input object per line plus predicted_label and
    /// per-class scores
    #[arg(long)]
    pub out: PathBuf,
}
