//! Shared plumbing between subcommands: dataset IO, the single
//! prediction path every command uses, and run-config records.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use ghic_core::corpus::{IssueRecord, Label, LabeledExample, NUM_LABELS};
use ghic_core::features::{encode_sequence, tfidf_transform};
use ghic_core::recurrent::softmax_stable;
use ghic_core::store::ModelPayload;
use ghic_core::textprep::{preprocess, TokenList};
use ghic_core::{classic, ModelBundle};
use serde::Serialize;

/// Reads a prepared dataset: one `LabeledExample` JSON object per line.
pub fn read_dataset(path: &Path) -> Result<Vec<LabeledExample>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut examples = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.with_context(|| format!("reading {}", path.display()))?;
        if line.trim().is_empty() {
            continue;
        }
        let example: LabeledExample = serde_json::from_str(&line)
            .with_context(|| format!("{}: line {}", path.display(), idx + 1))?;
        examples.push(example);
    }
    Ok(examples)
}

/// Reads raw issue records (dump schema), e.g. for `predict` input.
pub fn read_dump(path: &Path) -> Result<Vec<IssueRecord>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut records = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.with_context(|| format!("reading {}", path.display()))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: IssueRecord = serde_json::from_str(&line)
            .with_context(|| format!("{}: line {}", path.display(), idx + 1))?;
        records.push(record);
    }
    Ok(records)
}

/// The one prediction path: preprocessed tokens in, label and per-class
/// scores out. Scores are posteriors for Naive Bayes, vote fractions for
/// the forest, and softmax probabilities for recurrent models.
pub fn predict_tokens(
    bundle: &ModelBundle,
    tokens: &TokenList,
) -> Result<(Label, [f64; NUM_LABELS])> {
    match &bundle.payload {
        ModelPayload::NaiveBayes { tfidf, model, .. } => {
            let x = tfidf_transform(tfidf, tokens);
            let pred = classic::nb_predict(model, &x);
            let scores: [f64; NUM_LABELS] = pred
                .posteriors
                .as_slice()
                .try_into()
                .expect("nine posteriors");
            Ok((pred.label, scores))
        }
        ModelPayload::RandomForest { tfidf, model, .. } => {
            let x = tfidf_transform(tfidf, tokens);
            let pred = classic::rf_predict(model, &x);
            let total = pred.votes.iter().sum::<u32>().max(1) as f64;
            let mut scores = [0.0; NUM_LABELS];
            for (s, &v) in scores.iter_mut().zip(&pred.votes) {
                *s = v as f64 / total;
            }
            Ok((pred.label, scores))
        }
        ModelPayload::Recurrent {
            vocab,
            model,
            config,
        } => {
            let seq = encode_sequence(vocab, tokens, config.max_len);
            let (logits, _) = ghic_core::recurrent::forward_sequence(model, &seq)?;
            let probs = softmax_stable(&logits);
            let mut best = 0;
            for (i, p) in logits.iter().enumerate().skip(1) {
                if *p > logits[best] {
                    best = i;
                }
            }
            let label = Label::from_index(best).context("model emits nine classes")?;
            let scores: [f64; NUM_LABELS] = probs
                .as_slice()
                .try_into()
                .context("model emits nine classes")?;
            Ok((label, scores))
        }
    }
}

/// Preprocesses one example under the bundle's pipeline and field choice.
pub fn tokens_for(bundle: &ModelBundle, example: &LabeledExample) -> TokenList {
    preprocess(&bundle.field.text_of(example), &bundle.pipeline)
}

/// Table-1 style model identifier, e.g. "Naive Bayes (using title)".
pub fn model_display_name(bundle: &ModelBundle) -> String {
    match &bundle.payload {
        ModelPayload::NaiveBayes { .. } => {
            format!("Naive Bayes (using {})", bundle.field.as_str())
        }
        ModelPayload::RandomForest { .. } => {
            format!("Random Forest (using {})", bundle.field.as_str())
        }
        ModelPayload::Recurrent { model, .. } => match model.kind() {
            ghic_core::recurrent::CellKind::Simple => "RNN".to_string(),
            ghic_core::recurrent::CellKind::Lstm => "LSTM".to_string(),
            ghic_core::recurrent::CellKind::Gru => "GRU".to_string(),
        },
    }
}

/// Writes `run_config.json` into `dir`: the resolved arguments plus the
/// subcommand and binary version, enough to replay the run.
pub fn write_run_config<A: Serialize>(dir: &Path, command: &str, arguments: &A) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let record = serde_json::json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "arguments": arguments,
    });
    let path = dir.join("run_config.json");
    std::fs::write(&path, serde_json::to_string_pretty(&record)?.as_bytes())
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Directory that owns the outputs of a file-valued `--out`.
pub fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

/// Prints a status line, ignoring write failures such as a closed pipe
/// (`ghic ... | head` must not panic).
#[macro_export]
macro_rules! status {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}
