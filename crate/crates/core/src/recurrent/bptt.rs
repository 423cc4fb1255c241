//! Exact backpropagation through time over the full unrolled sequence.
//! Gradients are taken of the weight-normalized batch loss, including the
//! embedding rows of every observed token.

use super::{
    forward_sequence, loss::softmax_stable, CellWeights, GateWeights, RecurrentError,
    RecurrentModel, SequenceCache, StepCache, WeightSet,
};
use crate::features::TokenIdSequence;
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct BatchGradients<S: Scalar> {
    /// Gradient of the batch loss w.r.t. every model weight.
    pub grads: WeightSet<S>,
    /// Sum of `w_i * loss_i` over the batch.
    pub loss_sum: S,
    /// Sum of the applied class weights over the batch.
    pub weight_sum: S,
}

impl<S: Scalar> BatchGradients<S> {
    pub fn mean_loss(&self) -> S {
        self.loss_sum / self.weight_sum
    }
}

fn acc_gate<S: Scalar>(grad: &mut GateWeights<S>, da: &[S], x: &[S], h_in: &[S]) {
    grad.w.add_outer(da, x);
    grad.u.add_outer(da, h_in);
    for (b, &d) in grad.b.iter_mut().zip(da) {
        *b += d;
    }
}

/// Computes gradients of the batch loss `sum_i w_i * nll_i / sum_i w_i`
/// for a batch of `(sequence, target-class)` pairs.
pub fn backward<S: Scalar>(
    model: &RecurrentModel<S>,
    batch: &[(&TokenIdSequence, usize)],
    class_weights: Option<&[S]>,
) -> Result<BatchGradients<S>, RecurrentError> {
    if batch.is_empty() {
        return Err(RecurrentError::InvalidConfig("empty batch".to_string()));
    }
    let mut grads = model.weights().zeros_like();
    let mut loss_sum = S::zero();
    let mut weight_sum = S::zero();

    for &(seq, target) in batch {
        let (logits, cache) = forward_sequence(model, seq)?;
        if target >= logits.len() {
            return Err(RecurrentError::DimensionMismatch {
                what: "target class",
                expected: logits.len(),
                got: target,
            });
        }
        let weight = class_weights.map_or(S::one(), |w| w[target]);
        // same stable log-sum-exp path as the loss function; taking
        // ln(softmax) here instead would underflow under hard saturation
        loss_sum += super::loss::weighted_cross_entropy(&logits, target, class_weights);
        weight_sum += weight;
        let probs = softmax_stable(&logits);

        // d(w * nll)/dlogits = w * (softmax - onehot)
        let mut dlogits = probs;
        dlogits[target] -= S::one();
        for v in &mut dlogits {
            *v *= weight;
        }

        let weights = model.weights();
        grads.w_out.add_outer(&dlogits, &cache.last_h);
        for (b, &d) in grads.b_out.iter_mut().zip(&dlogits) {
            *b += d;
        }
        let mut dh = vec![S::zero(); weights.cell.hidden()];
        weights.w_out.matvec_t_acc(&dlogits, &mut dh);

        backprop_steps(weights, &mut grads, &cache, dh);
    }

    let inv = S::one() / weight_sum;
    for slice in grads.slices_mut() {
        for g in slice {
            *g *= inv;
        }
    }
    Ok(BatchGradients {
        grads,
        loss_sum,
        weight_sum,
    })
}

fn backprop_steps<S: Scalar>(
    weights: &WeightSet<S>,
    grads: &mut WeightSet<S>,
    cache: &SequenceCache<S>,
    mut dh: Vec<S>,
) {
    let hidden = weights.cell.hidden();
    let zeros = vec![S::zero(); hidden];
    let mut dc = vec![S::zero(); hidden];

    for t in (0..cache.steps.len()).rev() {
        let x = weights.embedding.row(cache.ids[t] as usize);
        let h_prev: &[S] = if t > 0 {
            cache.steps[t - 1].h()
        } else {
            &zeros
        };
        let mut dx = vec![S::zero(); weights.cell.embed()];
        let mut dh_prev = vec![S::zero(); hidden];

        match (&weights.cell, &mut grads.cell, &cache.steps[t]) {
            (
                CellWeights::Simple(gate),
                CellWeights::Simple(gate_grad),
                StepCache::Simple { h },
            ) => {
                let da: Vec<S> = (0..hidden)
                    .map(|j| dh[j] * (S::one() - h[j] * h[j]))
                    .collect();
                acc_gate(gate_grad, &da, x, h_prev);
                gate.u.matvec_t_acc(&da, &mut dh_prev);
                gate.w.matvec_t_acc(&da, &mut dx);
            }
            (
                CellWeights::Lstm {
                    input,
                    forget,
                    output,
                    candidate,
                },
                CellWeights::Lstm {
                    input: g_input,
                    forget: g_forget,
                    output: g_output,
                    candidate: g_candidate,
                },
                StepCache::Lstm {
                    i, f, o, g, tanh_c, ..
                },
            ) => {
                let c_prev: &[S] = if t > 0 {
                    match &cache.steps[t - 1] {
                        StepCache::Lstm { c, .. } => c,
                        _ => unreachable!("LSTM cache mixes step kinds"),
                    }
                } else {
                    &zeros
                };
                let mut da_i = vec![S::zero(); hidden];
                let mut da_f = vec![S::zero(); hidden];
                let mut da_o = vec![S::zero(); hidden];
                let mut da_g = vec![S::zero(); hidden];
                let mut dc_prev = vec![S::zero(); hidden];
                for j in 0..hidden {
                    let d_o = dh[j] * tanh_c[j];
                    da_o[j] = d_o * o[j] * (S::one() - o[j]);
                    let dc_total = dc[j] + dh[j] * o[j] * (S::one() - tanh_c[j] * tanh_c[j]);
                    let d_i = dc_total * g[j];
                    da_i[j] = d_i * i[j] * (S::one() - i[j]);
                    let d_f = dc_total * c_prev[j];
                    da_f[j] = d_f * f[j] * (S::one() - f[j]);
                    let d_g = dc_total * i[j];
                    da_g[j] = d_g * (S::one() - g[j] * g[j]);
                    dc_prev[j] = dc_total * f[j];
                }
                acc_gate(g_input, &da_i, x, h_prev);
                acc_gate(g_forget, &da_f, x, h_prev);
                acc_gate(g_output, &da_o, x, h_prev);
                acc_gate(g_candidate, &da_g, x, h_prev);
                input.u.matvec_t_acc(&da_i, &mut dh_prev);
                forget.u.matvec_t_acc(&da_f, &mut dh_prev);
                output.u.matvec_t_acc(&da_o, &mut dh_prev);
                candidate.u.matvec_t_acc(&da_g, &mut dh_prev);
                input.w.matvec_t_acc(&da_i, &mut dx);
                forget.w.matvec_t_acc(&da_f, &mut dx);
                output.w.matvec_t_acc(&da_o, &mut dx);
                candidate.w.matvec_t_acc(&da_g, &mut dx);
                dc = dc_prev;
            }
            (
                CellWeights::Gru {
                    update,
                    reset,
                    candidate,
                },
                CellWeights::Gru {
                    update: g_update,
                    reset: g_reset,
                    candidate: g_candidate,
                },
                StepCache::Gru { z, r, cand, .. },
            ) => {
                let mut da_z = vec![S::zero(); hidden];
                let mut da_c = vec![S::zero(); hidden];
                let rh: Vec<S> = (0..hidden).map(|j| r[j] * h_prev[j]).collect();
                for j in 0..hidden {
                    let d_z = dh[j] * (cand[j] - h_prev[j]);
                    da_z[j] = d_z * z[j] * (S::one() - z[j]);
                    let d_cand = dh[j] * z[j];
                    da_c[j] = d_cand * (S::one() - cand[j] * cand[j]);
                    dh_prev[j] = dh[j] * (S::one() - z[j]);
                }
                let mut drh = vec![S::zero(); hidden];
                candidate.u.matvec_t_acc(&da_c, &mut drh);
                let mut da_r = vec![S::zero(); hidden];
                for j in 0..hidden {
                    let d_r = drh[j] * h_prev[j];
                    da_r[j] = d_r * r[j] * (S::one() - r[j]);
                    dh_prev[j] += drh[j] * r[j];
                }
                acc_gate(g_update, &da_z, x, h_prev);
                acc_gate(g_reset, &da_r, x, h_prev);
                acc_gate(g_candidate, &da_c, x, &rh);
                update.u.matvec_t_acc(&da_z, &mut dh_prev);
                reset.u.matvec_t_acc(&da_r, &mut dh_prev);
                update.w.matvec_t_acc(&da_z, &mut dx);
                reset.w.matvec_t_acc(&da_r, &mut dx);
                candidate.w.matvec_t_acc(&da_c, &mut dx);
            }
            _ => unreachable!("cell weights, gradients, and cache share one kind"),
        }

        let row = grads.embedding.row_mut(cache.ids[t] as usize);
        for (g, &d) in row.iter_mut().zip(&dx) {
            *g += d;
        }
        dh = dh_prev;
    }
}
