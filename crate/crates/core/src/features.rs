//! Feature extraction: token lists become TF-IDF sparse vectors for the
//! classic models, or fixed-length token-id sequences for the recurrent
//! models.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::LabeledExample;
use crate::scalar::Scalar;
use crate::textprep::TokenList;

/// Reserved sequence-mode indices.
pub const PAD: u32 = 0;
pub const UNK: u32 = 1;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("cannot build a vocabulary from an empty corpus")]
    EmptyCorpus,
    #[error("max_size {given} too small: {mode:?} mode needs at least {needed}")]
    MaxSizeTooSmall {
        given: usize,
        needed: usize,
        mode: VocabMode,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VocabMode {
    /// Plain term indices starting at 0, for bag-of-words features.
    Bag,
    /// Indices 0 and 1 reserved for PAD and UNK.
    Sequence,
}

/// Term index fitted on a corpus. Terms are ranked by total corpus
/// frequency (ties alphabetical), so the mapping is deterministic and
/// independent of document order.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    mode: VocabMode,
    /// Term at each index; sequence mode holds sentinels at 0 and 1.
    terms: Vec<String>,
    /// Documents containing each term; 0 for reserved slots.
    doc_freq: Vec<u32>,
    term_to_index: HashMap<String, u32>,
}

impl Vocabulary {
    /// Index of the first non-reserved slot for `mode`.
    fn reserved(mode: VocabMode) -> usize {
        match mode {
            VocabMode::Bag => 0,
            VocabMode::Sequence => 2,
        }
    }

    pub fn mode(&self) -> VocabMode {
        self.mode
    }

    /// Total number of indices, including reserved slots.
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.num_terms() == 0
    }

    /// Number of real terms (reserved slots excluded).
    pub fn num_terms(&self) -> usize {
        self.terms.len() - Self::reserved(self.mode)
    }

    pub fn index_of(&self, term: &str) -> Option<u32> {
        self.term_to_index.get(term).copied()
    }

    pub fn term(&self, index: u32) -> Option<&str> {
        self.terms.get(index as usize).map(String::as_str)
    }

    pub fn doc_freq(&self, index: u32) -> u32 {
        self.doc_freq.get(index as usize).copied().unwrap_or(0)
    }

    /// Index-aligned term list (reserved sentinels included).
    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn doc_freqs(&self) -> &[u32] {
        &self.doc_freq
    }

    /// Rebuilds a vocabulary from its serialized parts.
    pub fn from_parts(mode: VocabMode, terms: Vec<String>, doc_freq: Vec<u32>) -> Self {
        let term_to_index = terms
            .iter()
            .enumerate()
            .skip(Self::reserved(mode))
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Vocabulary {
            mode,
            terms,
            doc_freq,
            term_to_index,
        }
    }
}

/// Ranks terms by total corpus frequency (ties alphabetical) and keeps
/// the `max_size` best, counting reserved slots in sequence mode.
pub fn build_vocabulary(
    corpus: &[TokenList],
    max_size: usize,
    mode: VocabMode,
) -> Result<Vocabulary, FeatureError> {
    if corpus.is_empty() {
        return Err(FeatureError::EmptyCorpus);
    }
    let reserved = Vocabulary::reserved(mode);
    if max_size < reserved + 1 {
        return Err(FeatureError::MaxSizeTooSmall {
            given: max_size,
            needed: reserved + 1,
            mode,
        });
    }

    let mut total_freq: HashMap<&str, u64> = HashMap::new();
    let mut doc_freq: HashMap<&str, u32> = HashMap::new();
    let mut seen_in_doc: Vec<&str> = Vec::new();
    for doc in corpus {
        seen_in_doc.clear();
        for token in doc {
            *total_freq.entry(token.as_str()).or_insert(0) += 1;
            if !seen_in_doc.contains(&token.as_str()) {
                seen_in_doc.push(token.as_str());
                *doc_freq.entry(token.as_str()).or_insert(0) += 1;
            }
        }
    }

    let mut ranked: Vec<(&str, u64)> = total_freq.into_iter().collect();
    ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.truncate(max_size - reserved);

    let mut terms = Vec::with_capacity(reserved + ranked.len());
    let mut freqs = Vec::with_capacity(reserved + ranked.len());
    if mode == VocabMode::Sequence {
        terms.push("<pad>".to_string());
        terms.push("<unk>".to_string());
        freqs.push(0);
        freqs.push(0);
    }
    for (term, _) in &ranked {
        terms.push(term.to_string());
        freqs.push(doc_freq[term]);
    }
    Ok(Vocabulary::from_parts(mode, terms, freqs))
}

/// Sparse non-negative feature vector, L2-normalized unless empty.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVector<S: Scalar> {
    entries: Vec<(u32, S)>,
}

impl<S: Scalar> SparseVector<S> {
    /// Builds a vector from raw entries: zeros are dropped, indices
    /// sorted, and the result is L2-normalized unless empty.
    pub fn from_weights(mut entries: Vec<(u32, S)>) -> Self {
        entries.retain(|(_, w)| *w != S::zero());
        entries.sort_unstable_by_key(|(i, _)| *i);
        let norm = entries
            .iter()
            .map(|(_, w)| *w * *w)
            .fold(S::zero(), |a, b| a + b)
            .sqrt();
        if norm > S::zero() {
            for (_, w) in &mut entries {
                *w /= norm;
            }
        }
        SparseVector { entries }
    }

    /// Entries straight from deserialization; assumed already normalized.
    pub fn from_parts(entries: Vec<(u32, S)>) -> Self {
        SparseVector { entries }
    }

    pub fn entries(&self) -> &[(u32, S)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// Value at `index`; absent features read as zero.
    pub fn get(&self, index: u32) -> S {
        match self.entries.binary_search_by_key(&index, |(i, _)| *i) {
            Ok(pos) => self.entries[pos].1,
            Err(_) => S::zero(),
        }
    }

    pub fn l2_norm(&self) -> S {
        self.entries
            .iter()
            .map(|(_, w)| *w * *w)
            .fold(S::zero(), |a, b| a + b)
            .sqrt()
    }
}

/// TF-IDF weighting model over a bag-mode vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct TfIdfModel<S: Scalar> {
    vocab: Vocabulary,
    idf: Vec<S>,
    corpus_size: usize,
}

impl<S: Scalar> TfIdfModel<S> {
    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn idf(&self) -> &[S] {
        &self.idf
    }

    pub fn corpus_size(&self) -> usize {
        self.corpus_size
    }

    pub fn num_features(&self) -> usize {
        self.vocab.len()
    }

    pub fn from_parts(vocab: Vocabulary, idf: Vec<S>, corpus_size: usize) -> Self {
        TfIdfModel {
            vocab,
            idf,
            corpus_size,
        }
    }
}

/// Fits TF-IDF weights: `idf(t) = ln((1 + N) / (1 + df(t))) + 1`, which
/// stays strictly positive for every term. `max_size` of `None` keeps the
/// full vocabulary.
pub fn tfidf_fit<S: Scalar>(
    corpus: &[TokenList],
    max_size: Option<usize>,
) -> Result<TfIdfModel<S>, FeatureError> {
    let vocab = build_vocabulary(corpus, max_size.unwrap_or(usize::MAX), VocabMode::Bag)?;
    let n = corpus.len();
    let idf = (0..vocab.len() as u32)
        .map(|i| {
            let df = vocab.doc_freq(i) as f64;
            S::cast(((1.0 + n as f64) / (1.0 + df)).ln() + 1.0)
        })
        .collect();
    Ok(TfIdfModel {
        vocab,
        idf,
        corpus_size: n,
    })
}

/// Transforms one document: term counts weighted by idf, L2-normalized.
/// Out-of-vocabulary terms are ignored; the result may be empty.
pub fn tfidf_transform<S: Scalar>(model: &TfIdfModel<S>, doc: &TokenList) -> SparseVector<S> {
    let mut counts: HashMap<u32, u32> = HashMap::new();
    for token in doc {
        if let Some(index) = model.vocab.index_of(token) {
            *counts.entry(index).or_insert(0) += 1;
        }
    }
    let entries = counts
        .into_iter()
        .map(|(index, tf)| (index, S::cast(tf as f64) * model.idf[index as usize]))
        .collect();
    SparseVector::from_weights(entries)
}

/// Fixed-length encoded token sequence. Positions at or beyond
/// `true_length` hold PAD; no PAD appears before `true_length`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenIdSequence {
    ids: Vec<u32>,
    true_length: usize,
}

impl TokenIdSequence {
    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    /// Ids up to the true length (the part the recurrence consumes).
    pub fn active_ids(&self) -> &[u32] {
        &self.ids[..self.true_length]
    }

    pub fn true_length(&self) -> usize {
        self.true_length
    }

    pub fn max_len(&self) -> usize {
        self.ids.len()
    }

    pub fn from_parts(ids: Vec<u32>, true_length: usize) -> Self {
        debug_assert!(true_length <= ids.len());
        TokenIdSequence { ids, true_length }
    }
}

/// Encodes a document against a sequence-mode vocabulary: unknown tokens
/// map to UNK, sequences longer than `max_len` keep their first `max_len`
/// tokens, and shorter ones are right-padded with PAD.
pub fn encode_sequence(vocab: &Vocabulary, doc: &TokenList, max_len: usize) -> TokenIdSequence {
    debug_assert_eq!(vocab.mode(), VocabMode::Sequence);
    debug_assert!(max_len >= 1);
    let mut ids: Vec<u32> = doc
        .iter()
        .take(max_len)
        .map(|token| vocab.index_of(token).unwrap_or(UNK))
        .collect();
    let true_length = ids.len();
    ids.resize(max_len, PAD);
    TokenIdSequence { ids, true_length }
}

/// Which issue text feeds a model. Classic models are trained on title
/// or body alone; recurrent models default to both joined by one space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldSelector {
    Title,
    Body,
    Both,
}

impl FieldSelector {
    pub fn text_of(self, example: &LabeledExample) -> String {
        match self {
            FieldSelector::Title => example.title.clone(),
            FieldSelector::Body => example.body.clone(),
            FieldSelector::Both => format!("{} {}", example.title, example.body),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FieldSelector::Title => "title",
            FieldSelector::Body => "body",
            FieldSelector::Both => "both",
        }
    }
}
