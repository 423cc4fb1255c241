//! Property tests for the pipeline invariants: preprocessing idempotence
//! and alphabet, TF-IDF normalization, vocabulary stability, sequence
//! round-trips, metric identities, and split proportions.

use ghic_core::corpus::{Label, NUM_LABELS};
use ghic_core::eval::{metrics, stratified_split, ConfusionMatrix};
use ghic_core::features::{
    build_vocabulary, encode_sequence, tfidf_fit, tfidf_transform, VocabMode,
};
use ghic_core::textprep::{preprocess, stopwords, PipelineConfig, TokenList};
use proptest::prelude::*;

/// Words whose Porter stems are themselves stable under a second pass;
/// lines sampled from these model ordinary issue text. Words like
/// "release" or "parsing" are excluded: dropping their final e or ing
/// exposes a trailing s that a second pass would strip.
const WORD_POOL: &[&str] = &[
    "crash",
    "crashes",
    "crashing",
    "panic",
    "panics",
    "thread",
    "threads",
    "deadlock",
    "build",
    "builds",
    "building",
    "failed",
    "failing",
    "failure",
    "failures",
    "error",
    "errors",
    "request",
    "requested",
    "feature",
    "features",
    "document",
    "documents",
    "documentation",
    "missing",
    "tests",
    "testing",
    "tested",
    "broken",
    "breaks",
    "networking",
    "network",
    "timeout",
    "timeouts",
    "connection",
    "connections",
    "update",
    "updates",
    "updated",
    "version",
    "versions",
    "upgrade",
    "upgraded",
    "question",
    "running",
    "runs",
    "memory",
    "allocation",
    "allocations",
    "overflow",
    "parser",
    "deploy",
    "deployed",
    "config",
    "configuration",
    "settings",
    "windows",
    "linux",
];

const JUNK: &[&str] = &[
    "<p>",
    "</p>",
    "<b>",
    "</b>",
    "&amp;",
    "!!",
    "...",
    "123",
    "-",
    "_",
    "(",
    ")",
    "https://example.test/path",
    "www.thing.test",
    ",",
    ":",
    ";",
];

fn line_strategy() -> impl Strategy<Value = String> {
    let piece = prop_oneof![
        3 => proptest::sample::select(WORD_POOL).prop_map(str::to_string),
        1 => proptest::sample::select(JUNK).prop_map(str::to_string),
        1 => proptest::sample::select(&["the", "and", "of", "is", "a"][..]).prop_map(str::to_string),
    ];
    proptest::collection::vec(piece, 0..25).prop_map(|pieces| pieces.join(" "))
}

fn doc_strategy() -> impl Strategy<Value = TokenList> {
    proptest::collection::vec(proptest::sample::select(WORD_POOL), 0..30).prop_map(|words| {
        let cfg = PipelineConfig::default();
        preprocess(&words.join(" "), &cfg)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn preprocess_is_idempotent_on_corpus_lines(line in line_strategy()) {
        let cfg = PipelineConfig::default();
        let once = preprocess(&line, &cfg);
        let twice = preprocess(&once.join(" "), &cfg);
        prop_assert_eq!(&once, &twice);
    }

    #[test]
    fn preprocess_output_alphabet_is_lowercase_words(line in line_strategy()) {
        let cfg = PipelineConfig::default();
        for token in &preprocess(&line, &cfg) {
            prop_assert!(token.len() >= 2);
            prop_assert!(token.bytes().all(|b| b.is_ascii_lowercase()));
            prop_assert!(!stopwords().contains(token.as_str()));
        }
    }

    #[test]
    fn preprocess_is_deterministic(line in line_strategy()) {
        let cfg = PipelineConfig::default();
        prop_assert_eq!(preprocess(&line, &cfg), preprocess(&line, &cfg));
    }

    #[test]
    fn tfidf_vectors_have_unit_or_zero_norm(
        corpus in proptest::collection::vec(doc_strategy(), 1..8),
        query in doc_strategy(),
    ) {
        let nonempty: Vec<_> = corpus.into_iter().filter(|d| !d.is_empty()).collect();
        prop_assume!(!nonempty.is_empty());
        let model = tfidf_fit::<f64>(&nonempty, None).unwrap();
        let vec = tfidf_transform(&model, &query);
        let norm = vec.l2_norm();
        if vec.is_empty() {
            prop_assert_eq!(norm, 0.0);
        } else {
            prop_assert!((norm - 1.0).abs() < 1e-12, "norm {}", norm);
        }
    }

    #[test]
    fn vocabulary_is_stable_under_document_permutation(
        corpus in proptest::collection::vec(doc_strategy(), 1..8),
        seed in 0u64..1000,
    ) {
        prop_assume!(corpus.iter().any(|d| !d.is_empty()));
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut shuffled = corpus.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let a = build_vocabulary(&corpus, 10, VocabMode::Bag).unwrap();
        let b = build_vocabulary(&shuffled, 10, VocabMode::Bag).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn sequence_encoding_round_trips_known_tokens(
        corpus in proptest::collection::vec(doc_strategy(), 1..6),
        query in doc_strategy(),
        max_len in 1usize..40,
    ) {
        prop_assume!(corpus.iter().any(|d| !d.is_empty()));
        let vocab = build_vocabulary(&corpus, 64, VocabMode::Sequence).unwrap();
        let seq = encode_sequence(&vocab, &query, max_len);
        prop_assert!(seq.true_length() <= max_len);
        prop_assert!(seq.ids()[seq.true_length()..].iter().all(|&id| id == 0));
        prop_assert!(seq.active_ids().iter().all(|&id| id != 0));
        // decoding non-reserved ids recovers the in-vocabulary tokens in order
        let decoded: Vec<&str> = seq
            .active_ids()
            .iter()
            .filter(|&&id| id >= 2)
            .map(|&id| vocab.term(id).unwrap())
            .collect();
        let expected: Vec<&str> = query
            .tokens()
            .iter()
            .take(max_len)
            .zip(seq.active_ids())
            .filter(|(_, &id)| id >= 2)
            .map(|(t, _)| t.as_str())
            .collect();
        prop_assert_eq!(decoded, expected);
    }

    #[test]
    fn micro_f1_equals_accuracy(
        cells in proptest::array::uniform9(proptest::array::uniform9(0u64..30)),
    ) {
        let matrix: [[u64; NUM_LABELS]; NUM_LABELS] =
            cells.map(|row| row.map(u64::from));
        let cm = ConfusionMatrix::from_cells(matrix);
        prop_assume!(cm.total() > 0 && cm.trace() > 0);
        let micro_fp: u64 = Label::ALL.iter().map(|l| cm.col_sum(*l) - cm.cell(*l, *l)).sum();
        let micro_fn: u64 = Label::ALL.iter().map(|l| cm.row_sum(*l) - cm.cell(*l, *l)).sum();
        let tp = cm.trace() as f64;
        let p = tp / (tp + micro_fp as f64);
        let r = tp / (tp + micro_fn as f64);
        let micro_f1 = 2.0 * p * r / (p + r);
        prop_assert!((micro_f1 - metrics(&cm).accuracy).abs() < 1e-12);
    }

    #[test]
    fn stratified_split_deviates_less_than_one_example_per_class(
        counts in proptest::collection::vec(1usize..40, 2..6),
        fraction in proptest::sample::select(&[0.7f64, 0.8][..]),
        seed in 0u64..500,
    ) {
        let labels: Vec<Label> = counts
            .iter()
            .enumerate()
            .flat_map(|(c, &n)| std::iter::repeat_n(Label::from_index(c).unwrap(), n))
            .collect();
        let (train, test) = stratified_split(&labels, fraction, seed).unwrap();
        prop_assert_eq!(train.len() + test.len(), labels.len());
        for (c, &n) in counts.iter().enumerate() {
            let label = Label::from_index(c).unwrap();
            let got = train.iter().filter(|&&i| labels[i] == label).count() as f64;
            let ideal = n as f64 * fraction;
            prop_assert!((got - ideal).abs() < 1.0, "class {c}: {got} vs {ideal}");
        }
    }
}

/// Independent oracle for `normalize`: the same contract written as a
/// regex pipeline instead of a character scan.
fn normalize_regex_oracle(input: &str) -> String {
    use regex::Regex;
    let lowered = input.to_lowercase();
    let url = Regex::new(r"\S*://\S*|\bwww\.\S*").unwrap();
    let without_urls = url.replace_all(&lowered, " ");
    let non_letter = Regex::new(r"[^a-z]+").unwrap();
    let spaced = non_letter.replace_all(&without_urls, " ");
    spaced.trim().to_string()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn normalize_matches_the_regex_oracle(line in line_strategy()) {
        prop_assert_eq!(ghic_core::textprep::normalize(&line), normalize_regex_oracle(&line));
    }
}

#[test]
fn normalize_matches_regex_oracle_on_fixed_cases() {
    for case in [
        "Crash at HTTP://x.com NOW!!",
        "see www.example.com and https://a.b/c?d=1 end",
        "tabs\tand\nnewlines, plus 123 digits",
        "",
        "already normal text",
    ] {
        assert_eq!(
            ghic_core::textprep::normalize(case),
            normalize_regex_oracle(case),
            "case {case:?}"
        );
    }
}
