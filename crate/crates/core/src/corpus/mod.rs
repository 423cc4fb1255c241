//! Issue corpus handling: the nine canonical GitHub labels, raw issue
//! records, dump-file ingestion, and reduction of multi-label issues to
//! single-label training examples.

mod fetch;

pub use fetch::{
    resolve_token, FetchError, GithubClient, GithubClientConfig, InvalidRepoSlug, RepoSlug,
    StateFilter, GITHUB_API_BASE,
};

use std::collections::BTreeSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// The nine labels GitHub creates in every repository, in alphabetical
/// order. The discriminant is the canonical class index used everywhere
/// in this crate; serialized forms always use the name, never the index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum Label {
    Bug = 0,
    Documentation = 1,
    Duplicate = 2,
    Enhancement = 3,
    GoodFirstIssue = 4,
    HelpWanted = 5,
    Invalid = 6,
    Question = 7,
    Wontfix = 8,
}

/// Number of canonical labels.
pub const NUM_LABELS: usize = 9;

impl Label {
    pub const ALL: [Label; NUM_LABELS] = [
        Label::Bug,
        Label::Documentation,
        Label::Duplicate,
        Label::Enhancement,
        Label::GoodFirstIssue,
        Label::HelpWanted,
        Label::Invalid,
        Label::Question,
        Label::Wontfix,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Label::Bug => "bug",
            Label::Documentation => "documentation",
            Label::Duplicate => "duplicate",
            Label::Enhancement => "enhancement",
            Label::GoodFirstIssue => "good first issue",
            Label::HelpWanted => "help wanted",
            Label::Invalid => "invalid",
            Label::Question => "question",
            Label::Wontfix => "wontfix",
        }
    }

    /// Case-insensitive lookup; surrounding whitespace is ignored.
    pub fn from_name(name: &str) -> Option<Label> {
        let name = name.trim().to_ascii_lowercase();
        Label::ALL.into_iter().find(|l| l.name() == name)
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Label> {
        Label::ALL.get(index).copied()
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let name = String::deserialize(deserializer)?;
        Label::from_name(&name)
            .ok_or_else(|| D::Error::custom(format!("unknown label name: {name:?}")))
    }
}

/// open/closed state of an issue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IssueState {
    Open,
    Closed,
}

/// One raw issue as fetched from the API or read from a dump file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IssueRecord {
    /// `owner/name` slug.
    pub repo: String,
    pub number: u64,
    pub title: String,
    pub body: Option<String>,
    pub state: IssueState,
    pub labels: BTreeSet<String>,
    /// ISO-8601 creation timestamp, kept as received.
    pub created_at: String,
}

impl IssueRecord {
    fn has_body(&self) -> bool {
        self.body.as_deref().is_some_and(|b| !b.trim().is_empty())
    }
}

/// One preprocessed training unit: text fields plus exactly one canonical label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub repo: String,
    pub number: u64,
    pub title: String,
    pub body: String,
    pub label: Label,
}

/// Per-label counts over a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LabelHistogram {
    counts: [u64; NUM_LABELS],
}

impl LabelHistogram {
    pub fn from_counts(counts: [u64; NUM_LABELS]) -> Self {
        Self { counts }
    }

    pub fn count(&self, label: Label) -> u64 {
        self.counts[label.index()]
    }

    pub fn counts(&self) -> &[u64; NUM_LABELS] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    fn add(&mut self, label: Label) {
        self.counts[label.index()] += 1;
    }
}

impl Serialize for LabelHistogram {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = serializer.serialize_map(Some(NUM_LABELS + 1))?;
        for label in Label::ALL {
            map.serialize_entry(label.name(), &self.count(label))?;
        }
        map.serialize_entry("total", &self.total())?;
        map.end()
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("no source files given")]
    EmptySources,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: row {row}: {detail}")]
    MalformedRow {
        path: PathBuf,
        /// 1-based data-row ordinal within the source file.
        row: usize,
        detail: String,
    },
}

/// Wire shape of one dump row. `labels` is an array of strings; in CSV the
/// cell holds the same array as JSON text (quote-escaped per RFC 4180).
#[derive(Debug, Deserialize)]
struct DumpRow {
    repo: String,
    number: u64,
    title: String,
    #[serde(default)]
    body: Option<String>,
    state: IssueState,
    labels: Vec<String>,
    created_at: String,
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    repo: String,
    number: u64,
    title: String,
    #[serde(default)]
    body: Option<String>,
    state: String,
    labels: String,
    created_at: String,
}

impl From<DumpRow> for IssueRecord {
    fn from(row: DumpRow) -> Self {
        IssueRecord {
            repo: row.repo,
            number: row.number,
            title: row.title,
            body: row.body,
            state: row.state,
            labels: row.labels.into_iter().collect(),
            created_at: row.created_at,
        }
    }
}

/// Concatenates all sources, drops rows without a body, and reduces
/// duplicate `(repo, number)` keys to their last occurrence. Input order
/// is otherwise preserved.
pub fn merge_and_clean(sources: &[PathBuf]) -> Result<Vec<IssueRecord>, CorpusError> {
    if sources.is_empty() {
        return Err(CorpusError::EmptySources);
    }
    let mut records = Vec::new();
    for path in sources {
        if path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
        {
            read_csv_dump(path, &mut records)?;
        } else {
            read_jsonl_dump(path, &mut records)?;
        }
    }
    records.retain(IssueRecord::has_body);

    // Last occurrence wins: keep a record only if its key never reappears.
    let mut seen = BTreeSet::new();
    let mut deduped = Vec::with_capacity(records.len());
    for record in records.into_iter().rev() {
        let key = (record.repo.clone(), record.number);
        if seen.insert(key) {
            deduped.push(record);
        }
    }
    deduped.reverse();
    Ok(deduped)
}

fn read_jsonl_dump(path: &Path, out: &mut Vec<IssueRecord>) -> Result<(), CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let row: DumpRow = serde_json::from_str(&line).map_err(|e| CorpusError::MalformedRow {
            path: path.to_path_buf(),
            row: idx + 1,
            detail: e.to_string(),
        })?;
        out.push(row.into());
    }
    Ok(())
}

fn read_csv_dump(path: &Path, out: &mut Vec<IssueRecord>) -> Result<(), CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::Reader::from_reader(file);
    for (idx, row) in reader.deserialize::<CsvRow>().enumerate() {
        let malformed = |detail: String| CorpusError::MalformedRow {
            path: path.to_path_buf(),
            row: idx + 1,
            detail,
        };
        let row = row.map_err(|e| malformed(e.to_string()))?;
        let state: IssueState = serde_json::from_value(serde_json::Value::String(
            row.state.trim().to_ascii_lowercase(),
        ))
        .map_err(|_| malformed(format!("invalid state: {:?}", row.state)))?;
        let labels: Vec<String> = if row.labels.trim().is_empty() {
            Vec::new()
        } else {
            serde_json::from_str(&row.labels).map_err(|_| {
                malformed(format!("labels cell is not a JSON array: {:?}", row.labels))
            })?
        };
        let body = row.body.filter(|b| !b.is_empty());
        out.push(IssueRecord {
            repo: row.repo,
            number: row.number,
            title: row.title,
            body,
            state,
            labels: labels.into_iter().collect(),
            created_at: row.created_at,
        });
    }
    Ok(())
}

/// Reduces a multi-label record to one canonical label: the intersecting
/// default label with the smallest global count wins (rarest-first, to
/// protect minority classes); ties break alphabetically. Records with no
/// default label, or without a usable body, are excluded.
pub fn select_single_label(
    record: &IssueRecord,
    global_counts: &LabelHistogram,
) -> Option<LabeledExample> {
    let body = record.body.as_deref().filter(|b| !b.trim().is_empty())?;
    let label = record
        .labels
        .iter()
        .filter_map(|name| Label::from_name(name))
        .min_by_key(|l| (global_counts.count(*l), l.index()))?;
    Some(LabeledExample {
        repo: record.repo.clone(),
        number: record.number,
        title: record.title.clone(),
        body: body.to_string(),
        label,
    })
}

/// Counts every canonical-label occurrence across raw records (an issue
/// carrying three default labels contributes three counts). This is the
/// `global_counts` input of [`select_single_label`].
pub fn default_label_histogram(records: &[IssueRecord]) -> LabelHistogram {
    let mut hist = LabelHistogram::default();
    for record in records {
        for name in &record.labels {
            if let Some(label) = Label::from_name(name) {
                hist.add(label);
            }
        }
    }
    hist
}

/// Per-label counts over final single-label examples.
pub fn label_histogram(examples: &[LabeledExample]) -> LabelHistogram {
    let mut hist = LabelHistogram::default();
    for example in examples {
        hist.add(example.label);
    }
    hist
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn record(repo: &str, number: u64, labels: &[&str], body: Option<&str>) -> IssueRecord {
        IssueRecord {
            repo: repo.to_string(),
            number,
            title: format!("issue {number}"),
            body: body.map(str::to_string),
            state: IssueState::Open,
            labels: labels.iter().map(|s| s.to_string()).collect(),
            created_at: "2024-01-01T00:00:00Z".to_string(),
        }
    }

    #[test]
    fn label_order_is_alphabetical_and_stable() {
        let names: Vec<&str> = Label::ALL.iter().map(|l| l.name()).collect();
        let mut sorted = names.clone();
        sorted.sort_unstable();
        assert_eq!(names, sorted);
        assert_eq!(Label::Bug.index(), 0);
        assert_eq!(Label::Wontfix.index(), 8);
        for label in Label::ALL {
            assert_eq!(Label::from_name(label.name()), Some(label));
            assert_eq!(Label::from_index(label.index()), Some(label));
        }
        assert_eq!(Label::from_name(" Help Wanted "), Some(Label::HelpWanted));
        assert_eq!(Label::from_name("needs-repro"), None);
    }

    #[test]
    fn label_serializes_as_name_never_index() {
        let json = serde_json::to_string(&Label::GoodFirstIssue).unwrap();
        assert_eq!(json, "\"good first issue\"");
        let back: Label = serde_json::from_str(&json).unwrap();
        assert_eq!(back, Label::GoodFirstIssue);
        assert!(serde_json::from_str::<Label>("4").is_err());
    }

    #[test]
    fn select_keeps_singleton_label() {
        let rec = record("a/b", 1, &["bug"], Some("text"));
        let hist = LabelHistogram::default();
        let ex = select_single_label(&rec, &hist).unwrap();
        assert_eq!(ex.label, Label::Bug);
        assert_eq!((ex.repo.as_str(), ex.number), ("a/b", 1));
    }

    #[test]
    fn select_prefers_rarest_global_label() {
        let rec = record("a/b", 2, &["bug", "wontfix"], Some("text"));
        let mut counts = [0u64; NUM_LABELS];
        counts[Label::Bug.index()] = 10_000;
        counts[Label::Wontfix.index()] = 200;
        let hist = LabelHistogram::from_counts(counts);
        assert_eq!(
            select_single_label(&rec, &hist).unwrap().label,
            Label::Wontfix
        );
    }

    #[test]
    fn select_breaks_count_ties_alphabetically() {
        let rec = record("a/b", 3, &["question", "duplicate"], Some("text"));
        let hist = LabelHistogram::default();
        assert_eq!(
            select_single_label(&rec, &hist).unwrap().label,
            Label::Duplicate
        );
    }

    #[test]
    fn select_excludes_non_default_labels() {
        let rec = record("a/b", 4, &["needs-repro"], Some("text"));
        assert!(select_single_label(&rec, &LabelHistogram::default()).is_none());
    }

    #[test]
    fn select_output_label_is_member_of_input_set() {
        let rec = record("a/b", 5, &["invalid", "question", "custom"], Some("text"));
        let ex = select_single_label(&rec, &LabelHistogram::default()).unwrap();
        assert!(rec.labels.contains(ex.label.name()));
    }

    #[test]
    fn histogram_counts_and_conserves_total() {
        let hist = label_histogram(&[]);
        assert_eq!(hist.total(), 0);
        assert!(Label::ALL.iter().all(|l| hist.count(*l) == 0));

        let examples: Vec<LabeledExample> = [Label::Bug, Label::Bug, Label::Question]
            .iter()
            .enumerate()
            .map(|(i, &label)| LabeledExample {
                repo: "a/b".into(),
                number: i as u64,
                title: String::new(),
                body: "x".into(),
                label,
            })
            .collect();
        let hist = label_histogram(&examples);
        assert_eq!(hist.count(Label::Bug), 2);
        assert_eq!(hist.count(Label::Question), 1);
        assert_eq!(hist.count(Label::Enhancement), 0);
        assert_eq!(hist.total(), 3);
        assert_eq!(hist.total(), examples.len() as u64);
    }

    #[test]
    fn default_histogram_counts_every_occurrence() {
        let records = vec![
            record("a/b", 1, &["bug", "help wanted"], Some("x")),
            record("a/b", 2, &["bug", "custom"], Some("x")),
        ];
        let hist = default_label_histogram(&records);
        assert_eq!(hist.count(Label::Bug), 2);
        assert_eq!(hist.count(Label::HelpWanted), 1);
        assert_eq!(hist.total(), 3);
    }

    fn write_jsonl(dir: &Path, name: &str, rows: &[serde_json::Value]) -> PathBuf {
        let path = dir.join(name);
        let mut f = File::create(&path).unwrap();
        for row in rows {
            writeln!(f, "{row}").unwrap();
        }
        path
    }

    fn row_json(repo: &str, number: u64, body: Option<&str>) -> serde_json::Value {
        serde_json::json!({
            "repo": repo,
            "number": number,
            "title": format!("t{number}"),
            "body": body,
            "state": "open",
            "labels": ["bug"],
            "created_at": "2024-01-01T00:00:00Z",
        })
    }

    #[test]
    fn merge_identity_when_all_rows_have_bodies() {
        let dir = tempfile::tempdir().unwrap();
        let rows: Vec<_> = (1..=4).map(|n| row_json("a/b", n, Some("body"))).collect();
        let path = write_jsonl(dir.path(), "a.jsonl", &rows);
        let merged = merge_and_clean(&[path]).unwrap();
        assert_eq!(merged.len(), 4);
        assert_eq!(merged[0].number, 1);
        assert_eq!(merged[3].number, 4);
    }

    #[test]
    fn merge_drops_rows_without_body() {
        let dir = tempfile::tempdir().unwrap();
        let rows: Vec<_> = (1..=10)
            .map(|n| {
                // rows 2, 5, 9 lack a body (null, empty, whitespace)
                let body = match n {
                    2 => None,
                    5 => Some(""),
                    9 => Some("   "),
                    _ => Some("body"),
                };
                row_json("a/b", n, body)
            })
            .collect();
        let path = write_jsonl(dir.path(), "a.jsonl", &rows);
        let merged = merge_and_clean(&[path]).unwrap();
        assert_eq!(merged.len(), 7);
        assert!(merged.iter().all(IssueRecord::has_body));
    }

    #[test]
    fn merge_dedupes_last_occurrence_wins() {
        let dir = tempfile::tempdir().unwrap();
        let first = write_jsonl(
            dir.path(),
            "first.jsonl",
            &[serde_json::json!({
                "repo": "a/b", "number": 7, "title": "old title", "body": "old",
                "state": "open", "labels": [], "created_at": "2024-01-01T00:00:00Z",
            })],
        );
        let second = write_jsonl(
            dir.path(),
            "second.jsonl",
            &[serde_json::json!({
                "repo": "a/b", "number": 7, "title": "new title", "body": "new",
                "state": "closed", "labels": ["bug"], "created_at": "2024-02-01T00:00:00Z",
            })],
        );
        let merged = merge_and_clean(&[first, second]).unwrap();
        assert_eq!(merged.len(), 1);
        assert_eq!(merged[0].title, "new title");
        assert_eq!(merged[0].state, IssueState::Closed);
    }

    #[test]
    fn merge_rejects_zero_sources_and_malformed_rows() {
        assert!(matches!(
            merge_and_clean(&[]),
            Err(CorpusError::EmptySources)
        ));

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        let mut f = File::create(&path).unwrap();
        writeln!(f, "{}", row_json("a/b", 1, Some("ok"))).unwrap();
        writeln!(f, "{{not json").unwrap();
        drop(f);
        let err = merge_and_clean(std::slice::from_ref(&path)).unwrap_err();
        match err {
            CorpusError::MalformedRow { path: p, row, .. } => {
                assert_eq!(p, path);
                assert_eq!(row, 2);
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn csv_dump_round_trips_including_embedded_newlines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dump.csv");
        let mut f = File::create(&path).unwrap();
        writeln!(f, "repo,number,title,body,state,labels,created_at").unwrap();
        writeln!(
            f,
            "a/b,1,crash,\"line one\nline two\",open,\"[\"\"bug\"\",\"\"ui\"\"]\",2024-01-01T00:00:00Z"
        )
        .unwrap();
        writeln!(f, "a/b,2,empty body,,closed,[],2024-01-02T00:00:00Z").unwrap();
        drop(f);
        let merged = merge_and_clean(&[path]).unwrap();
        assert_eq!(merged.len(), 1);
        assert_eq!(merged[0].body.as_deref(), Some("line one\nline two"));
        assert!(merged[0].labels.contains("bug"));
        assert!(merged[0].labels.contains("ui"));
        assert_eq!(merged[0].state, IssueState::Open);
    }
}
