//! Versioned single-file persistence for trained models. A bundle always
//! carries the preprocessing and feature state next to the weights, so a
//! loaded model predicts exactly like the process that saved it.
//!
//! Layout: header (magic `GHIC`, format version u32, model kind u8),
//! then four length-prefixed sections (pipeline, features, weights,
//! training), then a CRC32 trailer over every byte after the header.
//! All integers and floats are little-endian; floats are 64-bit on disk
//! regardless of the in-memory scalar type.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::classic::{DecisionNode, NaiveBayesModel, RandomForestModel, RandomForestParams};
use crate::corpus::{Label, NUM_LABELS};
use crate::features::{FieldSelector, TfIdfModel, VocabMode, Vocabulary};
use crate::recurrent::{
    CellKind, CellWeights, Dims, GateWeights, Mat, RecurrentModel, TrainingConfig, WeightSet,
};
use crate::scalar::Scalar;
use crate::textprep::{PipelineConfig, StemmerKind};

pub const MAGIC: &[u8; 4] = b"GHIC";
pub const FORMAT_VERSION: u32 = 1;
pub const FILE_EXTENSION: &str = "ghic";

const SECTION_COUNT: usize = 4;
const HEADER_LEN: usize = 4 + 4 + 1;
// guards against absurd allocation from corrupt length fields
const MAX_ELEMENTS: u64 = 1 << 30;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("not a model bundle: bad magic bytes")]
    BadMagic,
    #[error("unsupported bundle version {found}; this build reads version {supported}")]
    UnsupportedVersion { found: u32, supported: u32 },
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error("truncated bundle: {0}")]
    Truncated(String),
    #[error("malformed bundle: {0}")]
    Malformed(String),
}

/// Split/seed provenance for the classic models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicMeta {
    pub seed: u64,
    pub split_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum ModelPayload<S: Scalar> {
    NaiveBayes {
        tfidf: TfIdfModel<S>,
        model: NaiveBayesModel<S>,
        meta: ClassicMeta,
    },
    RandomForest {
        tfidf: TfIdfModel<S>,
        model: RandomForestModel<S>,
        meta: ClassicMeta,
    },
    Recurrent {
        vocab: Vocabulary,
        model: RecurrentModel<S>,
        config: TrainingConfig,
    },
}

/// Everything needed to reproduce a trained model's predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle<S: Scalar> {
    pub pipeline: PipelineConfig,
    pub field: FieldSelector,
    pub payload: ModelPayload<S>,
}

impl<S: Scalar> ModelBundle<S> {
    pub fn kind_byte(&self) -> u8 {
        match &self.payload {
            ModelPayload::NaiveBayes { .. } => 0,
            ModelPayload::RandomForest { .. } => 1,
            ModelPayload::Recurrent { model, .. } => match model.kind() {
                CellKind::Simple => 2,
                CellKind::Lstm => 3,
                CellKind::Gru => 4,
            },
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match &self.payload {
            ModelPayload::NaiveBayes { .. } => "naive_bayes",
            ModelPayload::RandomForest { .. } => "random_forest",
            ModelPayload::Recurrent { model, .. } => model.kind().as_str(),
        }
    }
}

// ---- byte-level writer/reader ------------------------------------------

#[derive(Default)]
struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn bool(&mut self, v: bool) {
        self.buf.push(v as u8);
    }
    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn scalar<S: Scalar>(&mut self, v: S) {
        self.f64(v.to_f64_lossy());
    }
    fn str(&mut self, v: &str) {
        self.u32(v.len() as u32);
        self.buf.extend_from_slice(v.as_bytes());
    }
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(data: &'a [u8]) -> Self {
        Reader { data, pos: 0 }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], StoreError> {
        if self.pos + n > self.data.len() {
            return Err(StoreError::Truncated(format!(
                "need {n} bytes for {what}, {} left",
                self.data.len() - self.pos
            )));
        }
        let slice = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u8(&mut self, what: &str) -> Result<u8, StoreError> {
        Ok(self.take(1, what)?[0])
    }
    fn bool(&mut self, what: &str) -> Result<bool, StoreError> {
        match self.u8(what)? {
            0 => Ok(false),
            1 => Ok(true),
            v => Err(StoreError::Malformed(format!("bad bool {v} in {what}"))),
        }
    }
    fn u32(&mut self, what: &str) -> Result<u32, StoreError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
    fn u64(&mut self, what: &str) -> Result<u64, StoreError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
    fn f64(&mut self, what: &str) -> Result<f64, StoreError> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
    fn scalar<S: Scalar>(&mut self, what: &str) -> Result<S, StoreError> {
        Ok(S::cast(self.f64(what)?))
    }
    fn len(&mut self, what: &str) -> Result<usize, StoreError> {
        let n = self.u64(what)?;
        if n > MAX_ELEMENTS {
            return Err(StoreError::Malformed(format!(
                "implausible element count {n} for {what}"
            )));
        }
        Ok(n as usize)
    }
    fn str(&mut self, what: &str) -> Result<String, StoreError> {
        let n = self.u32(what)? as usize;
        let bytes = self.take(n, what)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| StoreError::Malformed(format!("invalid UTF-8 in {what}")))
    }
    fn done(&self) -> bool {
        self.pos == self.data.len()
    }
}

// ---- component encoders ---------------------------------------------------

fn write_pipeline(w: &mut Writer, pipeline: &PipelineConfig, field: FieldSelector) {
    w.u8(match pipeline.stemmer {
        StemmerKind::Porter => 0,
        StemmerKind::None => 1,
    });
    w.bool(pipeline.keep_code_blocks);
    w.str(&pipeline.stopword_version);
    w.u8(match field {
        FieldSelector::Title => 0,
        FieldSelector::Body => 1,
        FieldSelector::Both => 2,
    });
}

fn read_pipeline(r: &mut Reader) -> Result<(PipelineConfig, FieldSelector), StoreError> {
    let stemmer = match r.u8("stemmer")? {
        0 => StemmerKind::Porter,
        1 => StemmerKind::None,
        v => return Err(StoreError::Malformed(format!("unknown stemmer {v}"))),
    };
    let keep_code_blocks = r.bool("keep_code_blocks")?;
    let stopword_version = r.str("stopword_version")?;
    let field = match r.u8("field")? {
        0 => FieldSelector::Title,
        1 => FieldSelector::Body,
        2 => FieldSelector::Both,
        v => return Err(StoreError::Malformed(format!("unknown field {v}"))),
    };
    Ok((
        PipelineConfig {
            stemmer,
            keep_code_blocks,
            stopword_version,
        },
        field,
    ))
}

fn write_vocab(w: &mut Writer, vocab: &Vocabulary) {
    w.u8(match vocab.mode() {
        VocabMode::Bag => 0,
        VocabMode::Sequence => 1,
    });
    w.u64(vocab.len() as u64);
    for term in vocab.terms() {
        w.str(term);
    }
    for &df in vocab.doc_freqs() {
        w.u32(df);
    }
}

fn read_vocab(r: &mut Reader) -> Result<Vocabulary, StoreError> {
    let mode = match r.u8("vocab mode")? {
        0 => VocabMode::Bag,
        1 => VocabMode::Sequence,
        v => return Err(StoreError::Malformed(format!("unknown vocab mode {v}"))),
    };
    let n = r.len("vocab size")?;
    if mode == VocabMode::Sequence && n < 2 {
        return Err(StoreError::Malformed(
            "sequence vocabulary lacks reserved slots".to_string(),
        ));
    }
    let mut terms = Vec::with_capacity(n);
    for _ in 0..n {
        terms.push(r.str("vocab term")?);
    }
    let mut doc_freq = Vec::with_capacity(n);
    for _ in 0..n {
        doc_freq.push(r.u32("doc freq")?);
    }
    Ok(Vocabulary::from_parts(mode, terms, doc_freq))
}

fn write_tfidf<S: Scalar>(w: &mut Writer, model: &TfIdfModel<S>) {
    write_vocab(w, model.vocab());
    w.u64(model.corpus_size() as u64);
    w.u64(model.idf().len() as u64);
    for &v in model.idf() {
        w.scalar(v);
    }
}

fn read_tfidf<S: Scalar>(r: &mut Reader) -> Result<TfIdfModel<S>, StoreError> {
    let vocab = read_vocab(r)?;
    let corpus_size = r.len("corpus size")?;
    let n = r.len("idf count")?;
    if n != vocab.len() {
        return Err(StoreError::Malformed(format!(
            "idf count {n} does not match vocabulary size {}",
            vocab.len()
        )));
    }
    let mut idf = Vec::with_capacity(n);
    for _ in 0..n {
        idf.push(r.scalar("idf weight")?);
    }
    Ok(TfIdfModel::from_parts(vocab, idf, corpus_size))
}

fn write_nb<S: Scalar>(w: &mut Writer, model: &NaiveBayesModel<S>) {
    w.f64(model.alpha());
    w.u64(model.vocab_size() as u64);
    for &p in model.log_priors() {
        w.scalar(p);
    }
    for row in model.log_likelihood() {
        for &v in row {
            w.scalar(v);
        }
    }
}

fn read_nb<S: Scalar>(r: &mut Reader) -> Result<NaiveBayesModel<S>, StoreError> {
    let alpha = r.f64("alpha")?;
    let vocab_size = r.len("nb vocab size")?;
    let mut log_priors = Vec::with_capacity(NUM_LABELS);
    for _ in 0..NUM_LABELS {
        log_priors.push(r.scalar("log prior")?);
    }
    let mut log_likelihood = Vec::with_capacity(NUM_LABELS);
    for _ in 0..NUM_LABELS {
        let mut row = Vec::with_capacity(vocab_size);
        for _ in 0..vocab_size {
            row.push(r.scalar("log likelihood")?);
        }
        log_likelihood.push(row);
    }
    Ok(NaiveBayesModel::from_parts(
        log_priors,
        log_likelihood,
        alpha,
        vocab_size,
    ))
}

fn write_node<S: Scalar>(w: &mut Writer, node: &DecisionNode<S>) {
    match node {
        DecisionNode::Leaf {
            label,
            class_counts,
        } => {
            w.u8(0);
            w.u8(label.index() as u8);
            for &c in class_counts {
                w.u32(c);
            }
        }
        DecisionNode::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            w.u8(1);
            w.u32(*feature);
            w.scalar(*threshold);
            write_node(w, left);
            write_node(w, right);
        }
    }
}

fn read_node<S: Scalar>(r: &mut Reader, depth: usize) -> Result<DecisionNode<S>, StoreError> {
    if depth > 10_000 {
        return Err(StoreError::Malformed("decision tree too deep".to_string()));
    }
    match r.u8("node tag")? {
        0 => {
            let index = r.u8("leaf label")? as usize;
            let label = Label::from_index(index)
                .ok_or_else(|| StoreError::Malformed(format!("bad label index {index}")))?;
            let mut class_counts = [0u32; NUM_LABELS];
            for c in &mut class_counts {
                *c = r.u32("leaf count")?;
            }
            Ok(DecisionNode::Leaf {
                label,
                class_counts,
            })
        }
        1 => {
            let feature = r.u32("split feature")?;
            let threshold = r.scalar("split threshold")?;
            let left = read_node(r, depth + 1)?;
            let right = read_node(r, depth + 1)?;
            Ok(DecisionNode::Split {
                feature,
                threshold,
                left: Box::new(left),
                right: Box::new(right),
            })
        }
        v => Err(StoreError::Malformed(format!("unknown node tag {v}"))),
    }
}

fn write_rf<S: Scalar>(w: &mut Writer, model: &RandomForestModel<S>) {
    let params = model.params();
    w.u64(params.n_trees as u64);
    w.u64(params.seed);
    match params.features_per_split {
        None => w.u8(0),
        Some(k) => {
            w.u8(1);
            w.u64(k as u64);
        }
    }
    w.bool(params.bootstrap);
    w.u64(params.min_samples_split as u64);
    w.u64(model.num_features() as u64);
    w.u64(model.trees().len() as u64);
    for tree in model.trees() {
        write_node(w, tree);
    }
}

fn read_rf<S: Scalar>(r: &mut Reader) -> Result<RandomForestModel<S>, StoreError> {
    let n_trees = r.len("n_trees")?;
    let seed = r.u64("forest seed")?;
    let features_per_split = match r.u8("features_per_split tag")? {
        0 => None,
        1 => Some(r.len("features_per_split")?),
        v => return Err(StoreError::Malformed(format!("bad option tag {v}"))),
    };
    let bootstrap = r.bool("bootstrap")?;
    let min_samples_split = r.len("min_samples_split")?;
    let num_features = r.len("num_features")?;
    let tree_count = r.len("tree count")?;
    if tree_count != n_trees {
        return Err(StoreError::Malformed(format!(
            "tree count {tree_count} does not match n_trees {n_trees}"
        )));
    }
    let mut trees = Vec::with_capacity(tree_count);
    for _ in 0..tree_count {
        trees.push(read_node(r, 0)?);
    }
    Ok(RandomForestModel::from_parts(
        trees,
        RandomForestParams {
            n_trees,
            seed,
            features_per_split,
            bootstrap,
            min_samples_split,
        },
        num_features,
    ))
}

fn write_mat<S: Scalar>(w: &mut Writer, mat: &Mat<S>) {
    w.u64(mat.rows() as u64);
    w.u64(mat.cols() as u64);
    for &v in mat.data() {
        w.scalar(v);
    }
}

fn read_mat<S: Scalar>(r: &mut Reader, what: &str) -> Result<Mat<S>, StoreError> {
    let rows = r.len(what)?;
    let cols = r.len(what)?;
    if (rows as u64).saturating_mul(cols as u64) > MAX_ELEMENTS {
        return Err(StoreError::Malformed(format!("implausible {what} size")));
    }
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        data.push(r.scalar(what)?);
    }
    Ok(Mat::from_data(rows, cols, data))
}

fn write_gate<S: Scalar>(w: &mut Writer, gate: &GateWeights<S>) {
    write_mat(w, &gate.w);
    write_mat(w, &gate.u);
    w.u64(gate.b.len() as u64);
    for &v in &gate.b {
        w.scalar(v);
    }
}

fn read_gate<S: Scalar>(r: &mut Reader) -> Result<GateWeights<S>, StoreError> {
    let w_mat = read_mat(r, "gate W")?;
    let u_mat = read_mat(r, "gate U")?;
    let n = r.len("gate bias")?;
    let mut b = Vec::with_capacity(n);
    for _ in 0..n {
        b.push(r.scalar("gate bias")?);
    }
    Ok(GateWeights {
        w: w_mat,
        u: u_mat,
        b,
    })
}

fn write_recurrent<S: Scalar>(w: &mut Writer, model: &RecurrentModel<S>) {
    let dims = model.dims();
    w.u64(dims.vocab as u64);
    w.u64(dims.embed as u64);
    w.u64(dims.hidden as u64);
    w.u64(dims.classes as u64);
    let weights = model.weights();
    write_mat(w, &weights.embedding);
    match &weights.cell {
        CellWeights::Simple(g) => write_gate(w, g),
        CellWeights::Lstm {
            input,
            forget,
            output,
            candidate,
        } => {
            for g in [input, forget, output, candidate] {
                write_gate(w, g);
            }
        }
        CellWeights::Gru {
            update,
            reset,
            candidate,
        } => {
            for g in [update, reset, candidate] {
                write_gate(w, g);
            }
        }
    }
    write_mat(w, &weights.w_out);
    w.u64(weights.b_out.len() as u64);
    for &v in &weights.b_out {
        w.scalar(v);
    }
}

fn read_recurrent<S: Scalar>(
    r: &mut Reader,
    kind: CellKind,
) -> Result<RecurrentModel<S>, StoreError> {
    let dims = Dims {
        vocab: r.len("dims.vocab")?,
        embed: r.len("dims.embed")?,
        hidden: r.len("dims.hidden")?,
        classes: r.len("dims.classes")?,
    };
    let embedding = read_mat(r, "embedding")?;
    let cell = match kind {
        CellKind::Simple => CellWeights::Simple(read_gate(r)?),
        CellKind::Lstm => CellWeights::Lstm {
            input: read_gate(r)?,
            forget: read_gate(r)?,
            output: read_gate(r)?,
            candidate: read_gate(r)?,
        },
        CellKind::Gru => CellWeights::Gru {
            update: read_gate(r)?,
            reset: read_gate(r)?,
            candidate: read_gate(r)?,
        },
    };
    let w_out = read_mat(r, "w_out")?;
    let n = r.len("b_out")?;
    let mut b_out = Vec::with_capacity(n);
    for _ in 0..n {
        b_out.push(r.scalar("b_out")?);
    }
    if embedding.rows() != dims.vocab
        || embedding.cols() != dims.embed
        || w_out.rows() != dims.classes
        || w_out.cols() != dims.hidden
        || b_out.len() != dims.classes
        || cell.hidden() != dims.hidden
        || cell.embed() != dims.embed
    {
        return Err(StoreError::Malformed(
            "weight shapes do not match dims".to_string(),
        ));
    }
    Ok(RecurrentModel::from_parts(
        kind,
        dims,
        WeightSet {
            embedding,
            cell,
            w_out,
            b_out,
        },
    ))
}

fn write_training_config(w: &mut Writer, cfg: &TrainingConfig) {
    w.u64(cfg.epochs as u64);
    w.u64(cfg.batch_size as u64);
    w.f64(cfg.learning_rate);
    w.u64(cfg.lr_step as u64);
    w.f64(cfg.lr_gamma);
    match &cfg.class_weights {
        None => w.u8(0),
        Some(weights) => {
            w.u8(1);
            w.u64(weights.len() as u64);
            for &v in weights {
                w.f64(v);
            }
        }
    }
    w.u64(cfg.max_vocab as u64);
    w.f64(cfg.split_ratio);
    w.u64(cfg.seed);
    w.u64(cfg.max_len as u64);
}

fn read_training_config(r: &mut Reader) -> Result<TrainingConfig, StoreError> {
    let epochs = r.len("epochs")?;
    let batch_size = r.len("batch_size")?;
    let learning_rate = r.f64("learning_rate")?;
    let lr_step = r.len("lr_step")?;
    let lr_gamma = r.f64("lr_gamma")?;
    let class_weights = match r.u8("class_weights tag")? {
        0 => None,
        1 => {
            let n = r.len("class_weights")?;
            let mut weights = Vec::with_capacity(n);
            for _ in 0..n {
                weights.push(r.f64("class weight")?);
            }
            Some(weights)
        }
        v => return Err(StoreError::Malformed(format!("bad option tag {v}"))),
    };
    Ok(TrainingConfig {
        epochs,
        batch_size,
        learning_rate,
        lr_step,
        lr_gamma,
        class_weights,
        max_vocab: r.len("max_vocab")?,
        split_ratio: r.f64("split_ratio")?,
        seed: r.u64("seed")?,
        max_len: r.len("max_len")?,
    })
}

fn write_classic_meta(w: &mut Writer, meta: &ClassicMeta) {
    w.u64(meta.seed);
    w.f64(meta.split_ratio);
}

fn read_classic_meta(r: &mut Reader) -> Result<ClassicMeta, StoreError> {
    Ok(ClassicMeta {
        seed: r.u64("meta seed")?,
        split_ratio: r.f64("meta split_ratio")?,
    })
}

// ---- top-level save / load --------------------------------------------

fn encode_sections<S: Scalar>(bundle: &ModelBundle<S>) -> Vec<Vec<u8>> {
    let mut pipeline = Writer::default();
    write_pipeline(&mut pipeline, &bundle.pipeline, bundle.field);

    let mut features = Writer::default();
    let mut weights = Writer::default();
    let mut training = Writer::default();
    match &bundle.payload {
        ModelPayload::NaiveBayes { tfidf, model, meta } => {
            write_tfidf(&mut features, tfidf);
            write_nb(&mut weights, model);
            write_classic_meta(&mut training, meta);
        }
        ModelPayload::RandomForest { tfidf, model, meta } => {
            write_tfidf(&mut features, tfidf);
            write_rf(&mut weights, model);
            write_classic_meta(&mut training, meta);
        }
        ModelPayload::Recurrent {
            vocab,
            model,
            config,
        } => {
            features.u64(config.max_len as u64);
            write_vocab(&mut features, vocab);
            write_recurrent(&mut weights, model);
            write_training_config(&mut training, config);
        }
    }
    vec![pipeline.buf, features.buf, weights.buf, training.buf]
}

/// Serializes the bundle to `path`. Byte-for-byte deterministic: saving
/// the same bundle twice produces identical files.
pub fn save<S: Scalar>(bundle: &ModelBundle<S>, path: &Path) -> Result<(), StoreError> {
    let mut file = Vec::new();
    file.extend_from_slice(MAGIC);
    file.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    file.push(bundle.kind_byte());

    let mut body = Vec::new();
    for section in encode_sections(bundle) {
        body.extend_from_slice(&(section.len() as u32).to_le_bytes());
        body.extend_from_slice(&section);
    }
    let checksum = crc32fast::hash(&body);
    file.extend_from_slice(&body);
    file.extend_from_slice(&checksum.to_le_bytes());

    fs::write(path, &file).map_err(|source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads and fully validates a bundle: magic, version, section
/// structure, checksum, then content.
pub fn load<S: Scalar>(path: &Path) -> Result<ModelBundle<S>, StoreError> {
    let data = fs::read(path).map_err(|source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    if data.len() < 4 {
        return Err(StoreError::Truncated("shorter than the magic".to_string()));
    }
    if &data[..4] != MAGIC {
        return Err(StoreError::BadMagic);
    }
    if data.len() < HEADER_LEN {
        return Err(StoreError::Truncated("incomplete header".to_string()));
    }
    let version = u32::from_le_bytes(data[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(StoreError::UnsupportedVersion {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    let kind = data[8];
    if data.len() < HEADER_LEN + 4 {
        return Err(StoreError::Truncated(
            "missing checksum trailer".to_string(),
        ));
    }

    let body = &data[HEADER_LEN..data.len() - 4];
    // structural walk first so truncation is reported as truncation, not
    // as a checksum failure
    let mut sections: Vec<&[u8]> = Vec::with_capacity(SECTION_COUNT);
    {
        let mut walker = Reader::new(body);
        for i in 0..SECTION_COUNT {
            let len = walker.u32(&format!("section {i} length"))? as usize;
            sections.push(walker.take(len, &format!("section {i}"))?);
        }
        if !walker.done() {
            return Err(StoreError::Malformed(
                "trailing bytes after the last section".to_string(),
            ));
        }
    }

    let stored = u32::from_le_bytes(data[data.len() - 4..].try_into().unwrap());
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(StoreError::ChecksumMismatch { stored, computed });
    }

    let (pipeline, field) = {
        let mut r = Reader::new(sections[0]);
        let out = read_pipeline(&mut r)?;
        section_fully_read(&r, "pipeline")?;
        out
    };

    let payload = match kind {
        0 => {
            let tfidf = section_scope(sections[1], "features", read_tfidf)?;
            let model = section_scope(sections[2], "weights", read_nb)?;
            let meta = section_scope(sections[3], "training", |r| read_classic_meta(r))?;
            nb_consistent(&tfidf, &model)?;
            ModelPayload::NaiveBayes { tfidf, model, meta }
        }
        1 => {
            let tfidf = section_scope(sections[1], "features", read_tfidf)?;
            let model: RandomForestModel<S> = section_scope(sections[2], "weights", read_rf)?;
            let meta = section_scope(sections[3], "training", |r| read_classic_meta(r))?;
            if model.num_features() != tfidf.num_features() {
                return Err(StoreError::Malformed(format!(
                    "forest features {} do not match TF-IDF features {}",
                    model.num_features(),
                    tfidf.num_features()
                )));
            }
            ModelPayload::RandomForest { tfidf, model, meta }
        }
        2..=4 => {
            let cell_kind = match kind {
                2 => CellKind::Simple,
                3 => CellKind::Lstm,
                _ => CellKind::Gru,
            };
            let (max_len, vocab) = section_scope(sections[1], "features", |r| {
                let max_len = r.len("max_len")?;
                let vocab = read_vocab(r)?;
                Ok((max_len, vocab))
            })?;
            let model = section_scope(sections[2], "weights", |r| read_recurrent(r, cell_kind))?;
            let mut config = section_scope(sections[3], "training", read_training_config)?;
            config.max_len = max_len;
            if model.dims().vocab != vocab.len() {
                return Err(StoreError::Malformed(format!(
                    "model vocabulary {} does not match stored vocabulary {}",
                    model.dims().vocab,
                    vocab.len()
                )));
            }
            ModelPayload::Recurrent {
                vocab,
                model,
                config,
            }
        }
        v => return Err(StoreError::Malformed(format!("unknown model kind {v}"))),
    };

    Ok(ModelBundle {
        pipeline,
        field,
        payload,
    })
}

fn section_scope<'a, T>(
    data: &'a [u8],
    name: &str,
    parse: impl FnOnce(&mut Reader<'a>) -> Result<T, StoreError>,
) -> Result<T, StoreError> {
    let mut r = Reader::new(data);
    let out = parse(&mut r)?;
    section_fully_read(&r, name)?;
    Ok(out)
}

fn section_fully_read(r: &Reader, name: &str) -> Result<(), StoreError> {
    if r.done() {
        Ok(())
    } else {
        Err(StoreError::Malformed(format!(
            "unread bytes at the end of the {name} section"
        )))
    }
}

fn nb_consistent<S: Scalar>(
    tfidf: &TfIdfModel<S>,
    model: &NaiveBayesModel<S>,
) -> Result<(), StoreError> {
    if model.vocab_size() != tfidf.num_features() {
        return Err(StoreError::Malformed(format!(
            "NB vocabulary {} does not match TF-IDF features {}",
            model.vocab_size(),
            tfidf.num_features()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classic::{nb_predict, nb_train, rf_predict, rf_train};
    use crate::features::{
        build_vocabulary, encode_sequence, tfidf_fit, tfidf_transform, SparseVector,
    };
    use crate::recurrent::forward_sequence;
    use crate::textprep::TokenList;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn doc(words: &[&str]) -> TokenList {
        TokenList::from_tokens(words.iter().map(|w| w.to_string()).collect())
    }

    fn small_corpus() -> Vec<TokenList> {
        vec![
            doc(&["crash", "panic", "stack"]),
            doc(&["docs", "missing", "crash"]),
            doc(&["feature", "request", "docs"]),
            doc(&["panic", "stack", "trace"]),
        ]
    }

    fn nb_bundle() -> ModelBundle<f64> {
        let corpus = small_corpus();
        let tfidf = tfidf_fit(&corpus, None).unwrap();
        let examples: Vec<(SparseVector<f64>, Label)> = corpus
            .iter()
            .enumerate()
            .map(|(i, d)| {
                let label = if i % 2 == 0 {
                    Label::Bug
                } else {
                    Label::Documentation
                };
                (tfidf_transform(&tfidf, d), label)
            })
            .collect();
        let model = nb_train(&examples, tfidf.num_features(), 1.0).unwrap();
        ModelBundle {
            pipeline: PipelineConfig::default(),
            field: FieldSelector::Title,
            payload: ModelPayload::NaiveBayes {
                tfidf,
                model,
                meta: ClassicMeta {
                    seed: 11,
                    split_ratio: 0.8,
                },
            },
        }
    }

    fn rf_bundle() -> ModelBundle<f64> {
        let corpus = small_corpus();
        let tfidf = tfidf_fit(&corpus, None).unwrap();
        let examples: Vec<(SparseVector<f64>, Label)> = corpus
            .iter()
            .enumerate()
            .map(|(i, d)| {
                let label = if i % 2 == 0 {
                    Label::Bug
                } else {
                    Label::Question
                };
                (tfidf_transform(&tfidf, d), label)
            })
            .collect();
        let model = rf_train(
            &examples,
            tfidf.num_features(),
            crate::classic::RandomForestParams {
                n_trees: 5,
                seed: 3,
                ..Default::default()
            },
        )
        .unwrap();
        ModelBundle {
            pipeline: PipelineConfig::default(),
            field: FieldSelector::Body,
            payload: ModelPayload::RandomForest {
                tfidf,
                model,
                meta: ClassicMeta {
                    seed: 3,
                    split_ratio: 0.8,
                },
            },
        }
    }

    fn recurrent_bundle(kind: CellKind) -> ModelBundle<f64> {
        let corpus = small_corpus();
        let vocab = build_vocabulary(&corpus, 50, VocabMode::Sequence).unwrap();
        let dims = Dims {
            vocab: vocab.len(),
            embed: 6,
            hidden: 5,
            classes: NUM_LABELS,
        };
        let model = RecurrentModel::new(kind, dims, 42);
        ModelBundle {
            pipeline: PipelineConfig::default(),
            field: FieldSelector::Both,
            payload: ModelPayload::Recurrent {
                vocab,
                model,
                config: TrainingConfig {
                    epochs: 5,
                    seed: 42,
                    max_len: 16,
                    class_weights: Some(vec![1.0; NUM_LABELS]),
                    ..TrainingConfig::default()
                },
            },
        }
    }

    fn save_to_temp(bundle: &ModelBundle<f64>) -> (tempfile::TempDir, PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ghic");
        save(bundle, &path).unwrap();
        (dir, path)
    }

    #[test]
    fn every_kind_round_trips_structurally() {
        let bundles = vec![
            nb_bundle(),
            rf_bundle(),
            recurrent_bundle(CellKind::Simple),
            recurrent_bundle(CellKind::Lstm),
            recurrent_bundle(CellKind::Gru),
        ];
        for bundle in bundles {
            let (_dir, path) = save_to_temp(&bundle);
            let loaded: ModelBundle<f64> = load(&path).unwrap();
            assert_eq!(loaded, bundle, "{}", bundle.kind_name());
        }
    }

    #[test]
    fn loaded_nb_predicts_identically_on_random_inputs() {
        let bundle = nb_bundle();
        let (_dir, path) = save_to_temp(&bundle);
        let loaded: ModelBundle<f64> = load(&path).unwrap();
        let (
            ModelPayload::NaiveBayes {
                model: a, tfidf, ..
            },
            ModelPayload::NaiveBayes { model: b, .. },
        ) = (&bundle.payload, &loaded.payload)
        else {
            panic!("kind changed in round trip");
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let v = tfidf.num_features() as u32;
        for _ in 0..1000 {
            let x = SparseVector::from_parts(vec![(
                rng.random_range(0..v),
                rng.random_range(0.0..2.0),
            )]);
            let pa = nb_predict(a, &x);
            let pb = nb_predict(b, &x);
            assert_eq!(pa.label, pb.label);
            assert_eq!(pa.posteriors, pb.posteriors);
        }
    }

    #[test]
    fn loaded_rf_predicts_identically_on_random_inputs() {
        let bundle = rf_bundle();
        let (_dir, path) = save_to_temp(&bundle);
        let loaded: ModelBundle<f64> = load(&path).unwrap();
        let (
            ModelPayload::RandomForest {
                model: a, tfidf, ..
            },
            ModelPayload::RandomForest { model: b, .. },
        ) = (&bundle.payload, &loaded.payload)
        else {
            panic!("kind changed in round trip");
        };
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let v = tfidf.num_features() as u32;
        for _ in 0..1000 {
            let x = SparseVector::from_parts(vec![(
                rng.random_range(0..v),
                rng.random_range(0.0..2.0),
            )]);
            assert_eq!(rf_predict(a, &x), rf_predict(b, &x));
        }
    }

    #[test]
    fn loaded_recurrent_produces_identical_logits() {
        for kind in [CellKind::Simple, CellKind::Lstm, CellKind::Gru] {
            let bundle = recurrent_bundle(kind);
            let (_dir, path) = save_to_temp(&bundle);
            let loaded: ModelBundle<f64> = load(&path).unwrap();
            let (
                ModelPayload::Recurrent {
                    model: a,
                    vocab,
                    config,
                },
                ModelPayload::Recurrent { model: b, .. },
            ) = (&bundle.payload, &loaded.payload)
            else {
                panic!("kind changed in round trip");
            };
            let seq = encode_sequence(vocab, &doc(&["crash", "docs", "unseen"]), config.max_len);
            let (la, _) = forward_sequence(a, &seq).unwrap();
            let (lb, _) = forward_sequence(b, &seq).unwrap();
            assert_eq!(la, lb, "{kind:?}");
        }
    }

    #[test]
    fn saving_twice_is_byte_identical() {
        let bundle = rf_bundle();
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.ghic");
        let b = dir.path().join("b.ghic");
        save(&bundle, &a).unwrap();
        save(&bundle, &b).unwrap();
        assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
    }

    #[test]
    fn flipped_payload_byte_fails_the_checksum() {
        let bundle = nb_bundle();
        let (_dir, path) = save_to_temp(&bundle);
        let mut bytes = fs::read(&path).unwrap();
        // flip a byte deep inside the weights, away from section lengths
        let target = bytes.len() - 32;
        bytes[target] ^= 0x40;
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load::<f64>(&path),
            Err(StoreError::ChecksumMismatch { .. })
        ));
    }

    #[test]
    fn bad_magic_and_future_version_are_distinct_errors() {
        let bundle = nb_bundle();
        let (_dir, path) = save_to_temp(&bundle);
        let bytes = fs::read(&path).unwrap();

        let mut not_ours = bytes.clone();
        not_ours[..4].copy_from_slice(b"ZIPX");
        fs::write(&path, &not_ours).unwrap();
        assert!(matches!(load::<f64>(&path), Err(StoreError::BadMagic)));

        let mut future = bytes.clone();
        future[4..8].copy_from_slice(&99u32.to_le_bytes());
        fs::write(&path, &future).unwrap();
        match load::<f64>(&path) {
            Err(StoreError::UnsupportedVersion { found, supported }) => {
                assert_eq!(found, 99);
                assert_eq!(supported, FORMAT_VERSION);
            }
            other => panic!("expected version error, got {other:?}"),
        }
    }

    #[test]
    fn truncation_is_reported_as_truncation() {
        let bundle = recurrent_bundle(CellKind::Gru);
        let (_dir, path) = save_to_temp(&bundle);
        let bytes = fs::read(&path).unwrap();

        // cut at a section boundary: header + first section (length+body)
        let first_len =
            u32::from_le_bytes(bytes[HEADER_LEN..HEADER_LEN + 4].try_into().unwrap()) as usize;
        let cut = HEADER_LEN + 4 + first_len;
        fs::write(&path, &bytes[..cut]).unwrap();
        assert!(matches!(load::<f64>(&path), Err(StoreError::Truncated(_))));

        // cut mid-header
        fs::write(&path, &bytes[..6]).unwrap();
        assert!(matches!(load::<f64>(&path), Err(StoreError::Truncated(_))));

        // empty file
        fs::write(&path, b"").unwrap();
        assert!(matches!(load::<f64>(&path), Err(StoreError::Truncated(_))));
    }

    #[test]
    fn bundle_always_carries_preprocessing_and_vocabulary() {
        let bundle = recurrent_bundle(CellKind::Lstm);
        let (_dir, path) = save_to_temp(&bundle);
        let loaded: ModelBundle<f64> = load(&path).unwrap();
        assert_eq!(loaded.pipeline, bundle.pipeline);
        assert_eq!(loaded.field, FieldSelector::Both);
        if let ModelPayload::Recurrent { vocab, config, .. } = &loaded.payload {
            assert!(vocab.len() > 2);
            assert_eq!(config.max_len, 16);
        } else {
            panic!("wrong payload kind");
        }
    }

    #[test]
    fn f32_bundles_round_trip_through_f64_storage() {
        let corpus = small_corpus();
        let tfidf: TfIdfModel<f32> = tfidf_fit(&corpus, None).unwrap();
        let examples: Vec<(SparseVector<f32>, Label)> = corpus
            .iter()
            .map(|d| (tfidf_transform(&tfidf, d), Label::Bug))
            .collect();
        let model = nb_train(&examples, tfidf.num_features(), 1.0).unwrap();
        let bundle = ModelBundle::<f32> {
            pipeline: PipelineConfig::default(),
            field: FieldSelector::Title,
            payload: ModelPayload::NaiveBayes {
                tfidf,
                model,
                meta: ClassicMeta {
                    seed: 0,
                    split_ratio: 0.8,
                },
            },
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ghic");
        save(&bundle, &path).unwrap();
        let loaded: ModelBundle<f32> = load(&path).unwrap();
        assert_eq!(loaded, bundle);
    }
}
