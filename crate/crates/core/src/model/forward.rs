//! The forward pass.
//!
//! Written so that causal suffix-independence holds bit-exactly, not just
//! mathematically: every computation is per-position, every reduction runs in
//! a fixed order, and masked keys are skipped rather than zeroed. The hidden
//! state at position `p` under a causal mask is therefore computed by the
//! identical instruction sequence whether the input has `p + 1` tokens or
//! more, which is what lets Jacobi iteration reproduce AR decoding exactly.

use super::{LogitRow, MaskMode, ModelError, TokenId, ToyModel};

const RMS_EPS: f32 = 1e-5;

/// Fixed-order dot product over eight accumulator lanes; the lane pattern
/// lets LLVM vectorize it while the summation order stays deterministic.
#[inline]
fn dot(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f32; 8];
    let mut chunks_a = a.chunks_exact(8);
    let mut chunks_b = b.chunks_exact(8);
    for (ca, cb) in chunks_a.by_ref().zip(chunks_b.by_ref()) {
        for i in 0..8 {
            acc[i] += ca[i] * cb[i];
        }
    }
    let mut sum = 0.0f32;
    for lane in acc {
        sum += lane;
    }
    for (x, y) in chunks_a.remainder().iter().zip(chunks_b.remainder()) {
        sum += x * y;
    }
    sum
}

/// `out[o] = dot(x, w[o])` for a row-major `[out][in]` weight matrix.
#[inline]
fn matvec(out: &mut [f32], w: &[f32], x: &[f32]) {
    let n = x.len();
    for (o, slot) in out.iter_mut().enumerate() {
        *slot = dot(&w[o * n..(o + 1) * n], x);
    }
}

/// RMS-normalize `x` and scale by per-channel gains.
#[inline]
fn rms_norm(out: &mut [f32], x: &[f32], gain: &[f32]) {
    let mean_sq = dot(x, x) / x.len() as f32;
    let inv = 1.0 / (mean_sq + RMS_EPS).sqrt();
    for ((slot, &v), &g) in out.iter_mut().zip(x).zip(gain) {
        *slot = v * inv * g;
    }
}

#[inline]
fn silu(v: f32) -> f32 {
    v / (1.0 + (-v).exp())
}

/// Which key positions a query position may attend to. Both variants are
/// contiguous ranges starting at zero.
#[derive(Clone, Copy)]
enum AttnPlan {
    /// Query `q` attends to keys `0..=q`.
    Causal,
    /// Queries at or after the given position attend to the whole sequence;
    /// earlier queries stay causal. Used for the response-bidirectional mask,
    /// where the boundary is the first position a response row is read from.
    OpenFrom(usize),
}

impl AttnPlan {
    #[inline]
    fn allowed(&self, query: usize, seq_len: usize) -> usize {
        match *self {
            AttnPlan::Causal => query + 1,
            AttnPlan::OpenFrom(first_open) => {
                if query >= first_open {
                    seq_len
                } else {
                    query + 1
                }
            }
        }
    }
}

impl ToyModel {
    /// Logit rows for each response slot: row `i` is read at the position
    /// preceding slot `i`'s own position, under the mode's mask.
    pub(super) fn forward_response_rows(
        &self,
        prompt: &[TokenId],
        response: &[TokenId],
        mode: MaskMode,
    ) -> Result<Vec<LogitRow>, ModelError> {
        if prompt.is_empty() {
            return Err(ModelError::Config("prompt must be nonempty".into()));
        }
        let tokens: Vec<TokenId> = prompt.iter().chain(response).copied().collect();
        let plan = match mode {
            MaskMode::Causal => AttnPlan::Causal,
            // Response rows are read from positions prompt_len-1 onward;
            // opening attention from there lets every slot's update, the
            // first included, condition on the full current iterate.
            MaskMode::ResponseBidirectional => AttnPlan::OpenFrom(prompt.len() - 1),
        };
        let hidden = self.hidden_states(&tokens, plan)?;
        let rows = (prompt.len() - 1..prompt.len() - 1 + response.len())
            .map(|pos| self.head_row(&hidden, pos))
            .collect();
        Ok(rows)
    }

    /// Next-token row from a ctx-only causal forward.
    pub(super) fn forward_next_row(&self, ctx: &[TokenId]) -> Result<LogitRow, ModelError> {
        if ctx.is_empty() {
            return Err(ModelError::Config("prompt must be nonempty".into()));
        }
        let hidden = self.hidden_states(ctx, AttnPlan::Causal)?;
        Ok(self.head_row(&hidden, ctx.len() - 1))
    }

    /// Run the transformer stack; returns `[seq][d_model]` hidden states.
    fn hidden_states(&self, tokens: &[TokenId], plan: AttnPlan) -> Result<Vec<f32>, ModelError> {
        let spec = &self.spec;
        let d = spec.d_model;
        let seq = tokens.len();
        if seq > spec.max_seq {
            return Err(ModelError::Capacity {
                needed: seq,
                max_seq: spec.max_seq,
            });
        }
        for &t in tokens {
            if t as usize >= spec.vocab_size {
                return Err(ModelError::TokenOutOfRange {
                    token: t,
                    vocab_size: spec.vocab_size,
                });
            }
        }

        let mut x = vec![0.0f32; seq * d];
        for (p, &t) in tokens.iter().enumerate() {
            let tok = &self.tok_embed[t as usize * d..(t as usize + 1) * d];
            let pos = &self.pos_embed[p * d..(p + 1) * d];
            for (slot, (&a, &b)) in x[p * d..(p + 1) * d].iter_mut().zip(tok.iter().zip(pos)) {
                *slot = a + b;
            }
        }

        let n_heads = spec.n_heads;
        let dh = spec.head_dim();
        let scale = 1.0 / (dh as f32).sqrt();
        let mut normed = vec![0.0f32; seq * d];
        let mut q = vec![0.0f32; seq * d];
        let mut k = vec![0.0f32; seq * d];
        let mut v = vec![0.0f32; seq * d];
        let mut ctx = vec![0.0f32; d];
        let mut proj = vec![0.0f32; d];
        let mut scores = vec![0.0f32; seq];
        let mut ff = vec![0.0f32; spec.d_ff];

        for layer in &self.layers {
            for p in 0..seq {
                rms_norm(
                    &mut normed[p * d..(p + 1) * d],
                    &x[p * d..(p + 1) * d],
                    &layer.attn_norm,
                );
            }
            for p in 0..seq {
                let n = &normed[p * d..(p + 1) * d];
                matvec(&mut q[p * d..(p + 1) * d], &layer.wq, n);
                matvec(&mut k[p * d..(p + 1) * d], &layer.wk, n);
                matvec(&mut v[p * d..(p + 1) * d], &layer.wv, n);
            }
            for p in 0..seq {
                let allowed = plan.allowed(p, seq);
                for h in 0..n_heads {
                    let h0 = h * dh;
                    let qh = &q[p * d + h0..p * d + h0 + dh];
                    let row = &mut scores[..allowed];
                    let mut max = f32::NEG_INFINITY;
                    for (j, slot) in row.iter_mut().enumerate() {
                        let s = dot(qh, &k[j * d + h0..j * d + h0 + dh]) * scale;
                        *slot = s;
                        if s > max {
                            max = s;
                        }
                    }
                    let mut denom = 0.0f32;
                    for slot in row.iter_mut() {
                        *slot = (*slot - max).exp();
                        denom += *slot;
                    }
                    let inv = 1.0 / denom;
                    let out = &mut ctx[h0..h0 + dh];
                    out.fill(0.0);
                    for (j, &w) in row.iter().enumerate() {
                        let weight = w * inv;
                        let vh = &v[j * d + h0..j * d + h0 + dh];
                        for (slot, &val) in out.iter_mut().zip(vh) {
                            *slot += weight * val;
                        }
                    }
                }
                matvec(&mut proj, &layer.wo, &ctx);
                for (slot, &add) in x[p * d..(p + 1) * d].iter_mut().zip(&proj) {
                    *slot += add;
                }
            }
            for p in 0..seq {
                rms_norm(&mut normed[..d], &x[p * d..(p + 1) * d], &layer.ffn_norm);
                matvec(&mut ff, &layer.w1, &normed[..d]);
                for f in ff.iter_mut() {
                    *f = silu(*f);
                }
                matvec(&mut proj, &layer.w2, &ff);
                for (slot, &add) in x[p * d..(p + 1) * d].iter_mut().zip(&proj) {
                    *slot += add;
                }
            }
        }
        Ok(x)
    }

    /// Head logits at one position.
    fn head_row(&self, hidden: &[f32], pos: usize) -> LogitRow {
        let d = self.spec.d_model;
        let mut normed = vec![0.0f32; d];
        rms_norm(
            &mut normed,
            &hidden[pos * d..(pos + 1) * d],
            &self.head_norm,
        );
        let mut row = vec![0.0f32; self.spec.vocab_size];
        matvec(&mut row, &self.head_out, &normed);
        debug_assert!(row.iter().all(|s| s.is_finite()));
        row
    }
}
