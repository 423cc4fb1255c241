//! Deterministic text cleaning: markup removal, normalization,
//! tokenization, stopword removal, and stemming. Every stage is pure, so
//! byte-identical input yields byte-identical output.

pub mod porter;

use std::collections::HashSet;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

/// Version tag of the bundled stopword list, recorded in every saved
/// model. The list is the NLTK English set with apostrophe forms and
/// single letters removed (neither survives normalization).
pub const STOPWORDS_VERSION: &str = "en-nltk-ascii-1";

static STOPWORDS_RAW: &str = include_str!("stopwords_en.txt");

/// The bundled stopword set, immutable at runtime.
pub fn stopwords() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| {
        STOPWORDS_RAW
            .lines()
            .map(str::trim)
            .filter(|w| !w.is_empty())
            .collect()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StemmerKind {
    Porter,
    None,
}

/// Text pipeline settings, serialized alongside any trained model so that
/// prediction preprocessing always matches training preprocessing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub stemmer: StemmerKind,
    pub keep_code_blocks: bool,
    pub stopword_version: String,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            stemmer: StemmerKind::Porter,
            keep_code_blocks: false,
            stopword_version: STOPWORDS_VERSION.to_string(),
        }
    }
}

/// Ordered pipeline output: lowercase ASCII-letter tokens of length >= 2,
/// stopword-free, already stemmed.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenList(Vec<String>);

impl TokenList {
    /// Wraps pre-tokenized words without running the pipeline. Intended
    /// for fixtures; tokens must already be lowercase ASCII letters.
    pub fn from_tokens(tokens: Vec<String>) -> Self {
        debug_assert!(tokens
            .iter()
            .all(|t| !t.is_empty() && t.bytes().all(|b| b.is_ascii_lowercase())));
        TokenList(tokens)
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, String> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn join(&self, sep: &str) -> String {
        self.0.join(sep)
    }

    pub fn into_vec(self) -> Vec<String> {
        self.0
    }
}

impl<'a> IntoIterator for &'a TokenList {
    type Item = &'a String;
    type IntoIter = std::slice::Iter<'a, String>;
    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// Removes HTML/XML markup and decodes entities. Tag contents are kept
/// except `<script>`/`<style>` bodies and HTML comments. Fenced Markdown
/// code blocks are dropped unless `keep_code_blocks` is set. Malformed
/// markup is handled best-effort and never fails.
pub fn strip_markup(raw: &str, keep_code_blocks: bool) -> String {
    let text = if keep_code_blocks {
        raw.to_string()
    } else {
        drop_fenced_blocks(raw)
    };
    strip_tags(&text)
}

fn drop_fenced_blocks(text: &str) -> String {
    let mut out = Vec::new();
    let mut in_fence = false;
    for line in text.lines() {
        if line.trim_start().starts_with("```") {
            in_fence = !in_fence;
            continue;
        }
        if !in_fence {
            out.push(line);
        }
    }
    out.join("\n")
}

fn strip_tags(text: &str) -> String {
    let bytes = text.as_bytes();
    let mut out = String::with_capacity(text.len());
    let mut i = 0;
    while i < text.len() {
        match bytes[i] {
            b'<' => match parse_tag(text, i) {
                Some(tag) => {
                    if !tag.closing && (tag.name == "script" || tag.name == "style") {
                        // drop everything up to and including the close tag
                        i = skip_container(text, tag.end, &tag.name);
                    } else {
                        i = tag.end;
                    }
                }
                // bare '<' that doesn't open a tag, e.g. "a < b"
                None => {
                    out.push('<');
                    i += 1;
                }
            },
            b'&' => {
                let (decoded, end) = decode_entity(text, i);
                out.push_str(&decoded);
                i = end;
            }
            _ => {
                let ch = text[i..].chars().next().expect("in-bounds char");
                out.push(ch);
                i += ch.len_utf8();
            }
        }
    }
    out
}

struct Tag {
    name: String,
    closing: bool,
    /// Byte offset just past the closing '>'.
    end: usize,
}

/// Parses a tag starting at the `<` at byte `start`. Returns `None` when
/// the text does not look like markup there. An unterminated tag swallows
/// the rest of the input (best-effort for truncated markup).
fn parse_tag(text: &str, start: usize) -> Option<Tag> {
    let rest = &text[start + 1..];
    let mut chars = rest.char_indices();
    let (_, first) = chars.next()?;

    // comments: <!-- ... -->
    if rest.starts_with("!--") {
        let end = match rest.find("-->") {
            Some(pos) => start + 1 + pos + 3,
            None => text.len(),
        };
        return Some(Tag {
            name: "!--".to_string(),
            closing: false,
            end,
        });
    }
    if !(first.is_ascii_alphabetic() || first == '/' || first == '!' || first == '?') {
        return None;
    }

    let closing = first == '/';
    let name_start = if closing { 1 } else { 0 };
    let name: String = rest[name_start..]
        .chars()
        .take_while(|c| c.is_ascii_alphanumeric())
        .collect();
    if closing && name.is_empty() {
        return None;
    }
    let end = match rest.find('>') {
        Some(pos) => start + 1 + pos + 1,
        None => text.len(),
    };
    Some(Tag {
        name: name.to_ascii_lowercase(),
        closing,
        end,
    })
}

/// Byte offset just past `</name>`, or the end of input when the
/// container is never closed.
fn skip_container(text: &str, from: usize, name: &str) -> usize {
    let lower = text.to_ascii_lowercase();
    let close = format!("</{name}");
    match lower[from..].find(&close) {
        Some(pos) => {
            let after = from + pos + close.len();
            match text[after..].find('>') {
                Some(gt) => after + gt + 1,
                None => text.len(),
            }
        }
        None => text.len(),
    }
}

/// Decodes the entity at byte `start` (which holds `&`). Unknown entities
/// are passed through literally. Returns the decoded text and the byte
/// offset to resume from.
fn decode_entity(text: &str, start: usize) -> (String, usize) {
    let rest = &text[start + 1..];
    let semi = match rest.find(';') {
        // entity names are short; give up quickly on a stray '&'
        Some(pos) if pos <= 10 => pos,
        _ => return ("&".to_string(), start + 1),
    };
    let name = &rest[..semi];
    let end = start + 1 + semi + 1;
    let decoded = match name {
        "amp" => Some('&'),
        "lt" => Some('<'),
        "gt" => Some('>'),
        "quot" => Some('"'),
        "apos" => Some('\''),
        "nbsp" => Some(' '),
        _ => {
            if let Some(num) = name.strip_prefix("#x").or_else(|| name.strip_prefix("#X")) {
                u32::from_str_radix(num, 16).ok().and_then(char::from_u32)
            } else if let Some(num) = name.strip_prefix('#') {
                num.parse::<u32>().ok().and_then(char::from_u32)
            } else {
                None
            }
        }
    };
    match decoded {
        Some(c) => (c.to_string(), end),
        None => ("&".to_string(), start + 1),
    }
}

/// Lowercases, removes URLs (`scheme://...` or `www.`-prefixed words),
/// replaces every character outside `[a-z]` with a space, collapses
/// whitespace runs, and trims.
pub fn normalize(clean: &str) -> String {
    let lowered = clean.to_lowercase();
    let mut out = String::with_capacity(lowered.len());
    for word in lowered.split_whitespace() {
        if word.contains("://") || word.starts_with("www.") {
            continue;
        }
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    let mut collapsed = String::with_capacity(out.len());
    let mut pending_space = false;
    for ch in out.chars() {
        if ch.is_ascii_lowercase() {
            if pending_space && !collapsed.is_empty() {
                collapsed.push(' ');
            }
            pending_space = false;
            collapsed.push(ch);
        } else {
            pending_space = true;
        }
    }
    collapsed
}

/// Splits normalized text on spaces, drops length-1 tokens and stopwords,
/// and stems what remains. Tokens that stem to a stopword or to a single
/// letter are dropped as well, so output always satisfies the
/// [`TokenList`] invariants.
pub fn tokenize_stem_filter(normal: &str, cfg: &PipelineConfig) -> TokenList {
    let stops = stopwords();
    let mut tokens = Vec::new();
    for raw in normal.split(' ') {
        if raw.len() < 2 || stops.contains(raw) {
            continue;
        }
        let stemmed = match cfg.stemmer {
            StemmerKind::Porter => porter::stem(raw),
            StemmerKind::None => raw.to_string(),
        };
        if stemmed.len() < 2 || stops.contains(stemmed.as_str()) {
            continue;
        }
        tokens.push(stemmed);
    }
    TokenList(tokens)
}

/// The full pipeline: [`strip_markup`] then [`normalize`] then
/// [`tokenize_stem_filter`].
pub fn preprocess(raw: &str, cfg: &PipelineConfig) -> TokenList {
    let stripped = strip_markup(raw, cfg.keep_code_blocks);
    let normal = normalize(&stripped);
    tokenize_stem_filter(&normal, cfg)
}
