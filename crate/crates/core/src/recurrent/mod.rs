//! From-scratch recurrent sequence classifiers: simple RNN, LSTM, and
//! GRU cells, exact backpropagation through time, weighted cross-entropy,
//! and a step-decayed mini-batch training loop.

mod bptt;
mod loss;
mod mat;
mod train;

pub use bptt::{backward, BatchGradients};
pub use loss::{
    batch_loss, compute_class_weights, compute_class_weights_for, softmax_stable,
    weighted_cross_entropy,
};
pub use mat::Mat;
pub use train::{train, LossCurve, TrainingConfig};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::TokenIdSequence;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    Simple,
    Lstm,
    Gru,
}

impl CellKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CellKind::Simple => "rnn",
            CellKind::Lstm => "lstm",
            CellKind::Gru => "gru",
        }
    }
}

/// Layer sizes. Defaults follow the training setup: embedding and hidden
/// width 100, nine output classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub vocab: usize,
    pub embed: usize,
    pub hidden: usize,
    pub classes: usize,
}

impl Dims {
    pub fn new(vocab: usize) -> Self {
        Dims {
            vocab,
            embed: 100,
            hidden: 100,
            classes: 9,
        }
    }
}

#[derive(Debug, Error)]
pub enum RecurrentError {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("cell state mismatch: the c vector is present iff the cell is an LSTM")]
    StateMismatch,
    #[error("token id {id} out of range for vocabulary of {vocab}")]
    TokenOutOfRange { id: u32, vocab: usize },
    #[error("class {index} has zero examples; drop or merge that class before weighting")]
    ZeroClassCount { index: usize },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("non-finite loss at epoch {epoch}, batch {batch}; training aborted")]
    NonFiniteLoss { epoch: usize, batch: usize },
}

/// One gate's parameters: `W` maps the input (H x E), `U` maps the
/// recurrent state (H x H), `b` is the bias (H).
#[derive(Debug, Clone, PartialEq)]
pub struct GateWeights<S: Scalar> {
    pub w: Mat<S>,
    pub u: Mat<S>,
    pub b: Vec<S>,
}

impl<S: Scalar> GateWeights<S> {
    fn init(hidden: usize, embed: usize, rng: &mut impl FnMut() -> S) -> Self {
        GateWeights {
            w: Mat::from_fn(hidden, embed, &mut *rng),
            u: Mat::from_fn(hidden, hidden, &mut *rng),
            b: (0..hidden).map(|_| rng()).collect(),
        }
    }

    fn zeros(hidden: usize, embed: usize) -> Self {
        GateWeights {
            w: Mat::zeros(hidden, embed),
            u: Mat::zeros(hidden, hidden),
            b: vec![S::zero(); hidden],
        }
    }

    /// pre = W x + U h + b
    fn affine(&self, x: &[S], h: &[S], out: &mut [S]) {
        out.copy_from_slice(&self.b);
        self.w.matvec_acc(x, out);
        self.u.matvec_acc(h, out);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CellWeights<S: Scalar> {
    Simple(GateWeights<S>),
    Lstm {
        input: GateWeights<S>,
        forget: GateWeights<S>,
        output: GateWeights<S>,
        candidate: GateWeights<S>,
    },
    Gru {
        update: GateWeights<S>,
        reset: GateWeights<S>,
        candidate: GateWeights<S>,
    },
}

impl<S: Scalar> CellWeights<S> {
    pub fn kind(&self) -> CellKind {
        match self {
            CellWeights::Simple(_) => CellKind::Simple,
            CellWeights::Lstm { .. } => CellKind::Lstm,
            CellWeights::Gru { .. } => CellKind::Gru,
        }
    }

    pub fn hidden(&self) -> usize {
        match self {
            CellWeights::Simple(g) => g.b.len(),
            CellWeights::Lstm { input, .. } => input.b.len(),
            CellWeights::Gru { update, .. } => update.b.len(),
        }
    }

    pub fn embed(&self) -> usize {
        match self {
            CellWeights::Simple(g) => g.w.cols(),
            CellWeights::Lstm { input, .. } => input.w.cols(),
            CellWeights::Gru { update, .. } => update.w.cols(),
        }
    }

    fn init(kind: CellKind, hidden: usize, embed: usize, rng: &mut impl FnMut() -> S) -> Self {
        match kind {
            CellKind::Simple => CellWeights::Simple(GateWeights::init(hidden, embed, rng)),
            CellKind::Lstm => CellWeights::Lstm {
                input: GateWeights::init(hidden, embed, rng),
                forget: GateWeights::init(hidden, embed, rng),
                output: GateWeights::init(hidden, embed, rng),
                candidate: GateWeights::init(hidden, embed, rng),
            },
            CellKind::Gru => CellWeights::Gru {
                update: GateWeights::init(hidden, embed, rng),
                reset: GateWeights::init(hidden, embed, rng),
                candidate: GateWeights::init(hidden, embed, rng),
            },
        }
    }

    fn zeros(kind: CellKind, hidden: usize, embed: usize) -> Self {
        match kind {
            CellKind::Simple => CellWeights::Simple(GateWeights::zeros(hidden, embed)),
            CellKind::Lstm => CellWeights::Lstm {
                input: GateWeights::zeros(hidden, embed),
                forget: GateWeights::zeros(hidden, embed),
                output: GateWeights::zeros(hidden, embed),
                candidate: GateWeights::zeros(hidden, embed),
            },
            CellKind::Gru => CellWeights::Gru {
                update: GateWeights::zeros(hidden, embed),
                reset: GateWeights::zeros(hidden, embed),
                candidate: GateWeights::zeros(hidden, embed),
            },
        }
    }

    fn gates(&self) -> Vec<&GateWeights<S>> {
        match self {
            CellWeights::Simple(g) => vec![g],
            CellWeights::Lstm {
                input,
                forget,
                output,
                candidate,
            } => vec![input, forget, output, candidate],
            CellWeights::Gru {
                update,
                reset,
                candidate,
            } => vec![update, reset, candidate],
        }
    }

    fn gates_mut(&mut self) -> Vec<&mut GateWeights<S>> {
        match self {
            CellWeights::Simple(g) => vec![g],
            CellWeights::Lstm {
                input,
                forget,
                output,
                candidate,
            } => vec![input, forget, output, candidate],
            CellWeights::Gru {
                update,
                reset,
                candidate,
            } => vec![update, reset, candidate],
        }
    }
}

/// Every trainable array of a model, in a fixed order. Gradients reuse
/// this struct, so they always have exactly the model's shape.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSet<S: Scalar> {
    /// V x E token embeddings.
    pub embedding: Mat<S>,
    pub cell: CellWeights<S>,
    /// K x H readout map.
    pub w_out: Mat<S>,
    /// K readout bias.
    pub b_out: Vec<S>,
}

impl<S: Scalar> WeightSet<S> {
    pub fn zeros_like(&self) -> Self {
        WeightSet {
            embedding: Mat::zeros(self.embedding.rows(), self.embedding.cols()),
            cell: CellWeights::zeros(self.cell.kind(), self.cell.hidden(), self.cell.embed()),
            w_out: Mat::zeros(self.w_out.rows(), self.w_out.cols()),
            b_out: vec![S::zero(); self.b_out.len()],
        }
    }

    /// All parameter slices in declaration order.
    pub fn slices(&self) -> Vec<&[S]> {
        let mut out: Vec<&[S]> = vec![self.embedding.data()];
        for gate in self.cell.gates() {
            out.push(gate.w.data());
            out.push(gate.u.data());
            out.push(&gate.b);
        }
        out.push(self.w_out.data());
        out.push(&self.b_out);
        out
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [S]> {
        let mut out: Vec<&mut [S]> = vec![self.embedding.data_mut()];
        for gate in self.cell.gates_mut() {
            out.push(gate.w.data_mut());
            out.push(gate.u.data_mut());
            out.push(&mut gate.b);
        }
        out.push(self.w_out.data_mut());
        out.push(&mut self.b_out);
        out
    }

    pub fn num_params(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }
}

/// Recurrent sequence classifier: embedding lookup, one recurrent cell
/// iterated over the sequence, and a linear readout from the last
/// non-PAD hidden state.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentModel<S: Scalar> {
    kind: CellKind,
    dims: Dims,
    weights: WeightSet<S>,
}

impl<S: Scalar> RecurrentModel<S> {
    /// Fresh model with all weights drawn uniformly from [-0.08, 0.08]
    /// using the given seed.
    pub fn new(kind: CellKind, dims: Dims, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = move || S::cast(rng.random::<f64>() * 0.16 - 0.08);
        let weights = WeightSet {
            embedding: Mat::from_fn(dims.vocab, dims.embed, &mut draw),
            cell: CellWeights::init(kind, dims.hidden, dims.embed, &mut draw),
            w_out: Mat::from_fn(dims.classes, dims.hidden, &mut draw),
            b_out: (0..dims.classes).map(|_| draw()).collect(),
        };
        RecurrentModel {
            kind,
            dims,
            weights,
        }
    }

    pub fn kind(&self) -> CellKind {
        self.kind
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn weights(&self) -> &WeightSet<S> {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut WeightSet<S> {
        &mut self.weights
    }

    pub fn from_parts(kind: CellKind, dims: Dims, weights: WeightSet<S>) -> Self {
        RecurrentModel {
            kind,
            dims,
            weights,
        }
    }
}

/// Recurrent state after one step; `c` is present iff the cell is an LSTM.
#[derive(Debug, Clone, PartialEq)]
pub struct CellState<S: Scalar> {
    pub h: Vec<S>,
    pub c: Option<Vec<S>>,
}

impl<S: Scalar> CellState<S> {
    pub fn zero(kind: CellKind, hidden: usize) -> Self {
        CellState {
            h: vec![S::zero(); hidden],
            c: matches!(kind, CellKind::Lstm).then(|| vec![S::zero(); hidden]),
        }
    }
}

fn sigmoid<S: Scalar>(x: S) -> S {
    if x >= S::zero() {
        S::one() / (S::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (S::one() + e)
    }
}

/// Per-step activations cached for backpropagation.
#[derive(Debug, Clone)]
pub(crate) enum StepCache<S: Scalar> {
    Simple {
        h: Vec<S>,
    },
    Lstm {
        i: Vec<S>,
        f: Vec<S>,
        o: Vec<S>,
        g: Vec<S>,
        c: Vec<S>,
        tanh_c: Vec<S>,
        h: Vec<S>,
    },
    Gru {
        z: Vec<S>,
        r: Vec<S>,
        cand: Vec<S>,
        h: Vec<S>,
    },
}

impl<S: Scalar> StepCache<S> {
    pub(crate) fn h(&self) -> &[S] {
        match self {
            StepCache::Simple { h } => h,
            StepCache::Lstm { h, .. } => h,
            StepCache::Gru { h, .. } => h,
        }
    }

    fn c(&self) -> Option<&[S]> {
        match self {
            StepCache::Lstm { c, .. } => Some(c),
            _ => None,
        }
    }
}

fn step<S: Scalar>(
    cell: &CellWeights<S>,
    x: &[S],
    h_prev: &[S],
    c_prev: Option<&[S]>,
) -> StepCache<S> {
    let hidden = cell.hidden();
    match cell {
        CellWeights::Simple(gate) => {
            let mut a = vec![S::zero(); hidden];
            gate.affine(x, h_prev, &mut a);
            StepCache::Simple {
                h: a.into_iter().map(|v| v.tanh()).collect(),
            }
        }
        CellWeights::Lstm {
            input,
            forget,
            output,
            candidate,
        } => {
            let c_prev = c_prev.expect("LSTM step requires a cell state");
            let mut a_i = vec![S::zero(); hidden];
            let mut a_f = vec![S::zero(); hidden];
            let mut a_o = vec![S::zero(); hidden];
            let mut a_g = vec![S::zero(); hidden];
            input.affine(x, h_prev, &mut a_i);
            forget.affine(x, h_prev, &mut a_f);
            output.affine(x, h_prev, &mut a_o);
            candidate.affine(x, h_prev, &mut a_g);
            let i: Vec<S> = a_i.into_iter().map(sigmoid).collect();
            let f: Vec<S> = a_f.into_iter().map(sigmoid).collect();
            let o: Vec<S> = a_o.into_iter().map(sigmoid).collect();
            let g: Vec<S> = a_g.into_iter().map(|v| v.tanh()).collect();
            #[allow(clippy::needless_range_loop)]
            let c: Vec<S> = (0..hidden)
                .map(|j| f[j] * c_prev[j] + i[j] * g[j])
                .collect();
            let tanh_c: Vec<S> = c.iter().map(|v| v.tanh()).collect();
            let h: Vec<S> = (0..hidden).map(|j| o[j] * tanh_c[j]).collect();
            StepCache::Lstm {
                i,
                f,
                o,
                g,
                c,
                tanh_c,
                h,
            }
        }
        CellWeights::Gru {
            update,
            reset,
            candidate,
        } => {
            let mut a_z = vec![S::zero(); hidden];
            let mut a_r = vec![S::zero(); hidden];
            update.affine(x, h_prev, &mut a_z);
            reset.affine(x, h_prev, &mut a_r);
            let z: Vec<S> = a_z.into_iter().map(sigmoid).collect();
            let r: Vec<S> = a_r.into_iter().map(sigmoid).collect();
            let rh: Vec<S> = (0..hidden).map(|j| r[j] * h_prev[j]).collect();
            let mut a_c = vec![S::zero(); hidden];
            candidate.affine(x, &rh, &mut a_c);
            let cand: Vec<S> = a_c.into_iter().map(|v| v.tanh()).collect();
            let h: Vec<S> = (0..hidden)
                .map(|j| (S::one() - z[j]) * h_prev[j] + z[j] * cand[j])
                .collect();
            StepCache::Gru { z, r, cand, h }
        }
    }
}

/// One recurrence step. For the LSTM the previous state must carry `c`;
/// for the other kinds it must not.
pub fn cell_forward<S: Scalar>(
    cell: &CellWeights<S>,
    x: &[S],
    prev: &CellState<S>,
) -> Result<CellState<S>, RecurrentError> {
    if x.len() != cell.embed() {
        return Err(RecurrentError::DimensionMismatch {
            what: "cell input",
            expected: cell.embed(),
            got: x.len(),
        });
    }
    if prev.h.len() != cell.hidden() {
        return Err(RecurrentError::DimensionMismatch {
            what: "hidden state",
            expected: cell.hidden(),
            got: prev.h.len(),
        });
    }
    let is_lstm = matches!(cell, CellWeights::Lstm { .. });
    if is_lstm != prev.c.is_some() {
        return Err(RecurrentError::StateMismatch);
    }
    if let Some(c) = &prev.c {
        if c.len() != cell.hidden() {
            return Err(RecurrentError::DimensionMismatch {
                what: "cell state",
                expected: cell.hidden(),
                got: c.len(),
            });
        }
    }
    let cache = step(cell, x, &prev.h, prev.c.as_deref());
    Ok(CellState {
        h: cache.h().to_vec(),
        c: cache.c().map(|c| c.to_vec()),
    })
}

/// Forward pass over one encoded sequence, caching activations.
#[derive(Debug, Clone)]
pub struct SequenceCache<S: Scalar> {
    pub(crate) ids: Vec<u32>,
    pub(crate) steps: Vec<StepCache<S>>,
    pub(crate) last_h: Vec<S>,
}

/// Runs the recurrence over the non-PAD prefix of `seq` from a zero
/// initial state and reads logits off the final hidden state. PAD
/// positions never enter the recurrence; a zero-length sequence yields
/// the readout of the zero state.
pub fn forward_sequence<S: Scalar>(
    model: &RecurrentModel<S>,
    seq: &TokenIdSequence,
) -> Result<(Vec<S>, SequenceCache<S>), RecurrentError> {
    let dims = model.dims;
    let weights = &model.weights;
    let mut steps = Vec::with_capacity(seq.true_length());
    let mut h = vec![S::zero(); dims.hidden];
    let mut c = vec![S::zero(); dims.hidden];
    for &id in seq.active_ids() {
        if id as usize >= dims.vocab {
            return Err(RecurrentError::TokenOutOfRange {
                id,
                vocab: dims.vocab,
            });
        }
        let x = weights.embedding.row(id as usize);
        let cache = step(&weights.cell, x, &h, Some(&c));
        h.copy_from_slice(cache.h());
        if let Some(next_c) = cache.c() {
            c.copy_from_slice(next_c);
        }
        steps.push(cache);
    }
    let mut logits = weights.b_out.clone();
    weights.w_out.matvec_acc(&h, &mut logits);
    Ok((
        logits,
        SequenceCache {
            ids: seq.active_ids().to_vec(),
            steps,
            last_h: h,
        },
    ))
}
