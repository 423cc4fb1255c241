//! Evaluation: stratified splitting, confusion matrices, per-label
//! precision/recall/F1, and plot-ready report files.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::corpus::{Label, NUM_LABELS};
use crate::recurrent::LossCurve;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("train fraction must lie in (0, 1), got {0}")]
    BadFraction(f64),
    #[error("cannot split an empty example set")]
    EmptyExamples,
    #[error("prediction/truth length mismatch: {preds} vs {truths}")]
    LengthMismatch { preds: usize, truths: usize },
    #[error("cannot build a confusion matrix from zero pairs")]
    EmptyPairs,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Splits example indices per class: round-half-up of `n_c * fraction`
/// go to train via a seeded shuffle. The two sides partition the input;
/// canonical classes absent from the input simply contribute nothing.
pub fn stratified_split(
    labels: &[Label],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), EvalError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(EvalError::BadFraction(train_fraction));
    }
    if labels.is_empty() {
        return Err(EvalError::EmptyExamples);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for label in Label::ALL {
        let mut members: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, l)| **l == label)
            .map(|(i, _)| i)
            .collect();
        if members.is_empty() {
            continue;
        }
        members.shuffle(&mut rng);
        let n_train = ((members.len() as f64 * train_fraction) + 0.5).floor() as usize;
        let n_train = n_train.min(members.len());
        train.extend_from_slice(&members[..n_train]);
        test.extend_from_slice(&members[n_train..]);
    }
    Ok((train, test))
}

/// K x K counts; cell `[t][p]` counts true label `t` predicted as `p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    cells: [[u64; NUM_LABELS]; NUM_LABELS],
}

impl ConfusionMatrix {
    pub fn from_cells(cells: [[u64; NUM_LABELS]; NUM_LABELS]) -> Self {
        ConfusionMatrix { cells }
    }

    pub fn cell(&self, truth: Label, pred: Label) -> u64 {
        self.cells[truth.index()][pred.index()]
    }

    pub fn cells(&self) -> &[[u64; NUM_LABELS]; NUM_LABELS] {
        &self.cells
    }

    pub fn total(&self) -> u64 {
        self.cells.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..NUM_LABELS).map(|i| self.cells[i][i]).sum()
    }

    /// Per-class support (row sums).
    pub fn row_sum(&self, label: Label) -> u64 {
        self.cells[label.index()].iter().sum()
    }

    /// Per-class predicted count (column sums).
    pub fn col_sum(&self, label: Label) -> u64 {
        self.cells.iter().map(|row| row[label.index()]).sum()
    }
}

impl Serialize for ConfusionMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(NUM_LABELS))?;
        for truth in Label::ALL {
            let row: std::collections::BTreeMap<&str, u64> = Label::ALL
                .iter()
                .map(|p| (p.name(), self.cell(truth, *p)))
                .collect();
            map.serialize_entry(truth.name(), &row)?;
        }
        map.end()
    }
}

/// Tallies predictions against ground truth.
pub fn confusion(preds: &[Label], truths: &[Label]) -> Result<ConfusionMatrix, EvalError> {
    if preds.len() != truths.len() {
        return Err(EvalError::LengthMismatch {
            preds: preds.len(),
            truths: truths.len(),
        });
    }
    if preds.is_empty() {
        return Err(EvalError::EmptyPairs);
    }
    let mut cells = [[0u64; NUM_LABELS]; NUM_LABELS];
    for (p, t) in preds.iter().zip(truths) {
        cells[t.index()][p.index()] += 1;
    }
    Ok(ConfusionMatrix { cells })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsSummary {
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    #[serde(serialize_with = "per_class_by_name")]
    pub per_class: [ClassMetrics; NUM_LABELS],
}

fn per_class_by_name<S: Serializer>(
    metrics: &[ClassMetrics; NUM_LABELS],
    serializer: S,
) -> Result<S::Ok, S::Error> {
    let mut map = serializer.serialize_map(Some(NUM_LABELS))?;
    for label in Label::ALL {
        map.serialize_entry(label.name(), &metrics[label.index()])?;
    }
    map.end()
}

/// Per-class precision/recall/F1 with 0/0 defined as 0, overall accuracy,
/// and macro averages over classes with positive support.
pub fn metrics(cm: &ConfusionMatrix) -> MetricsSummary {
    let ratio = |num: u64, den: u64| {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let mut per_class = [ClassMetrics {
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
        support: 0,
    }; NUM_LABELS];
    for label in Label::ALL {
        let tp = cm.cell(label, label);
        let precision = ratio(tp, cm.col_sum(label));
        let recall = ratio(tp, cm.row_sum(label));
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        per_class[label.index()] = ClassMetrics {
            precision,
            recall,
            f1,
            support: cm.row_sum(label),
        };
    }
    let supported: Vec<&ClassMetrics> = per_class.iter().filter(|m| m.support > 0).collect();
    let macro_avg = |f: fn(&ClassMetrics) -> f64| {
        if supported.is_empty() {
            0.0
        } else {
            supported.iter().map(|m| f(m)).sum::<f64>() / supported.len() as f64
        }
    };
    MetricsSummary {
        accuracy: ratio(cm.trace(), cm.total()),
        macro_precision: macro_avg(|m| m.precision),
        macro_recall: macro_avg(|m| m.recall),
        macro_f1: macro_avg(|m| m.f1),
        per_class,
    }
}

/// Full evaluation result for one trained model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    /// Human-readable model identifier, e.g. "Naive Bayes (using title)".
    pub model: String,
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    #[serde(serialize_with = "per_class_by_name")]
    pub per_class: [ClassMetrics; NUM_LABELS],
    pub confusion: ConfusionMatrix,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loss_curve: Option<LossCurve>,
}

impl EvaluationReport {
    pub fn new(
        model: impl Into<String>,
        cm: ConfusionMatrix,
        loss_curve: Option<LossCurve>,
    ) -> Self {
        let summary = metrics(&cm);
        EvaluationReport {
            model: model.into(),
            accuracy: summary.accuracy,
            macro_precision: summary.macro_precision,
            macro_recall: summary.macro_recall,
            macro_f1: summary.macro_f1,
            per_class: summary.per_class,
            confusion: cm,
            loss_curve,
        }
    }
}

/// Writes `report.json`, `classification_report.csv`, `confusion.csv`,
/// and (when a loss curve is present) `loss_curve.csv` into `out_dir`.
/// All CSV is UTF-8 with LF line endings. Returns the written paths.
pub fn emit_report(report: &EvaluationReport, out_dir: &Path) -> Result<Vec<PathBuf>, EvalError> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source: std::io::Error| EvalError::Io {
            path: path.clone(),
            source,
        }
    };
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut written = Vec::new();

    let json_path = out_dir.join("report.json");
    let json = serde_json::to_string_pretty(report).expect("report serializes");
    fs::write(&json_path, json.as_bytes()).map_err(io_err(&json_path))?;
    written.push(json_path);

    let report_path = out_dir.join("classification_report.csv");
    {
        let mut out = String::from("label,precision,recall,f1,support\n");
        for label in Label::ALL {
            let m = &report.per_class[label.index()];
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                label.name(),
                m.precision,
                m.recall,
                m.f1,
                m.support
            ));
        }
        fs::write(&report_path, out.as_bytes()).map_err(io_err(&report_path))?;
        written.push(report_path);
    }

    let confusion_path = out_dir.join("confusion.csv");
    {
        let mut out = String::from("true\\predicted");
        for label in Label::ALL {
            out.push(',');
            out.push_str(label.name());
        }
        out.push('\n');
        for truth in Label::ALL {
            out.push_str(truth.name());
            for pred in Label::ALL {
                out.push(',');
                out.push_str(&report.confusion.cell(truth, pred).to_string());
            }
            out.push('\n');
        }
        fs::write(&confusion_path, out.as_bytes()).map_err(io_err(&confusion_path))?;
        written.push(confusion_path);
    }

    if let Some(curve) = &report.loss_curve {
        let curve_path = out_dir.join("loss_curve.csv");
        let mut out = String::from("epoch,loss\n");
        for (epoch, loss) in curve.losses().iter().enumerate() {
            out.push_str(&format!("{epoch},{loss}\n"));
        }
        fs::write(&curve_path, out.as_bytes()).map_err(io_err(&curve_path))?;
        written.push(curve_path);
    }
    Ok(written)
}
