//! A deterministic, seeded toy decoder-only transformer.
//!
//! The model exists to give the decoding procedures a real next-token map
//! `p(y | Y, x)` to iterate against: two pre-norm transformer layers with
//! learned absolute position embeddings, RMS normalization, SiLU feed-forward
//! and a linear head. Weights come from a counter-based stream (see
//! [`crate::rng`]), so the same [`ModelSpec`] yields bit-identical weights on
//! every platform, with no training anywhere.
//!
//! All floating point work is 32-bit. Decoding correctness is always judged
//! on argmax token ids, never on raw float comparisons.

mod forward;
pub mod io;
pub mod testing;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::rng::Stream;

/// A token id. The vocabulary is a contiguous range `0..vocab_size`.
pub type TokenId = u32;

/// An ordered sequence of token ids (a prompt or a response region).
pub type TokenSequence = Vec<TokenId>;

/// Per-vocabulary-entry scores for one prediction slot.
pub type LogitRow = Vec<f32>;

/// All weights are drawn uniformly from `[-WEIGHT_LIMIT, WEIGHT_LIMIT)`.
pub const WEIGHT_LIMIT: f32 = 0.08;

/// Shape of the toy transformer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default = "default_vocab_size")]
    pub vocab_size: usize,
    #[serde(default = "default_d_model")]
    pub d_model: usize,
    #[serde(default = "default_n_layers")]
    pub n_layers: usize,
    #[serde(default = "default_n_heads")]
    pub n_heads: usize,
    #[serde(default = "default_d_ff")]
    pub d_ff: usize,
    #[serde(default = "default_max_seq")]
    pub max_seq: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_vocab_size() -> usize {
    512
}
fn default_d_model() -> usize {
    64
}
fn default_n_layers() -> usize {
    2
}
fn default_n_heads() -> usize {
    4
}
fn default_d_ff() -> usize {
    128
}
fn default_max_seq() -> usize {
    128
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            vocab_size: default_vocab_size(),
            d_model: default_d_model(),
            n_layers: default_n_layers(),
            n_heads: default_n_heads(),
            d_ff: default_d_ff(),
            max_seq: default_max_seq(),
            seed: 0,
        }
    }
}

/// The vocabulary must host the 256-token action block plus begin/end tokens.
pub const MIN_VOCAB: usize = 256 + 2;

impl ModelSpec {
    pub fn with_seed(seed: u64) -> Self {
        ModelSpec {
            seed,
            ..ModelSpec::default()
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.d_model == 0 || self.n_layers == 0 || self.n_heads == 0 || self.d_ff == 0 {
            return Err(ModelError::Config(
                "d_model, n_layers, n_heads and d_ff must be positive".into(),
            ));
        }
        if !self.d_model.is_multiple_of(self.n_heads) {
            return Err(ModelError::Config(format!(
                "d_model ({}) must be divisible by n_heads ({})",
                self.d_model, self.n_heads
            )));
        }
        if self.vocab_size < MIN_VOCAB {
            return Err(ModelError::Config(format!(
                "vocab_size ({}) must be at least {MIN_VOCAB} to host the action block plus begin/end tokens",
                self.vocab_size
            )));
        }
        if self.max_seq == 0 {
            return Err(ModelError::Config("max_seq must be positive".into()));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }
}

/// Attention masking mode for a forward pass over `(prompt, response)`.
///
/// `Causal` is the standard lower-triangular mask. `ResponseBidirectional`
/// unmasks attention for the response prediction region: every query position
/// from which a response row is read attends to the whole sequence, so each
/// slot's prediction conditions on the entire current response iterate.
/// Prompt positions before that region stay causal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskMode {
    Causal,
    ResponseBidirectional,
}

/// What a model reports about itself in bench output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelIdentity {
    pub weights_sha256: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spec: Option<ModelSpec>,
}

/// A deterministic next-token scorer the decoders can iterate against.
///
/// `forward_logits` returns one row per response slot: row `i` is read at
/// absolute position `prompt_len + i - 1` (1-indexed slots), i.e. at the
/// position of the preceding token. Under `Causal` masking row `i` is a pure
/// function of the prompt and response slots before `i`; under
/// `ResponseBidirectional` it may depend on every response slot.
pub trait LogitModel {
    fn vocab_size(&self) -> usize;
    fn max_seq(&self) -> usize;

    /// One logit row per response slot, under the given mask mode.
    fn forward_logits(
        &self,
        prompt: &[TokenId],
        response: &[TokenId],
        mode: MaskMode,
    ) -> Result<Vec<LogitRow>, ModelError>;

    /// The next-token row after `ctx`, from a ctx-only forward pass.
    fn next_token_row(&self, ctx: &[TokenId]) -> Result<LogitRow, ModelError>;

    /// Identity recorded in bench reports.
    fn identity(&self) -> ModelIdentity {
        ModelIdentity {
            weights_sha256: String::from("unspecified"),
            spec: None,
        }
    }
}

/// Index of the maximal score; ties break to the lowest token id.
pub fn greedy_argmax(row: &[f32]) -> TokenId {
    debug_assert!(!row.is_empty());
    debug_assert!(row.iter().all(|v| v.is_finite()));
    let mut best = 0usize;
    let mut best_score = row[0];
    for (i, &score) in row.iter().enumerate().skip(1) {
        if score > best_score {
            best = i;
            best_score = score;
        }
    }
    best as TokenId
}

/// Per-layer weight tensors, all row-major `[out][in]`.
#[derive(Debug, Clone)]
pub(crate) struct LayerWeights {
    pub attn_norm: Vec<f32>,
    pub wq: Vec<f32>,
    pub wk: Vec<f32>,
    pub wv: Vec<f32>,
    pub wo: Vec<f32>,
    pub ffn_norm: Vec<f32>,
    pub w1: Vec<f32>,
    pub w2: Vec<f32>,
}

/// The built model. Immutable after construction; forward passes take `&self`
/// and may run concurrently.
#[derive(Debug, Clone)]
pub struct ToyModel {
    spec: ModelSpec,
    tok_embed: Vec<f32>,
    pos_embed: Vec<f32>,
    layers: Vec<LayerWeights>,
    head_norm: Vec<f32>,
    head_out: Vec<f32>,
}

/// Name and shape of one tensor; order in the returned catalog is the
/// serialization order of the weight file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorDesc {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

impl TensorDesc {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl ToyModel {
    /// Build the model with weights from the spec's seeded stream. Each
    /// tensor gets its own substream keyed by name, so generation order
    /// does not matter.
    pub fn build(spec: ModelSpec) -> Result<Self, ModelError> {
        spec.validate()?;
        let root = Stream::new(spec.seed);
        Self::assemble(spec, |desc| {
            let stream = root.with_label(&desc.name);
            (0..desc.len() as u64)
                .map(|i| stream.symmetric_f32_at(i, WEIGHT_LIMIT))
                .collect()
        })
    }

    /// Build with every weight set to `value`. With `value = 0.0` all logit
    /// rows are constant, which makes decoding outcomes fully predictable;
    /// used as a diagnostic and a speedup witness.
    pub fn constant(spec: ModelSpec, value: f32) -> Result<Self, ModelError> {
        spec.validate()?;
        Self::assemble(spec, |desc| vec![value; desc.len()])
    }

    fn assemble(
        spec: ModelSpec,
        mut gen: impl FnMut(&TensorDesc) -> Vec<f32>,
    ) -> Result<Self, ModelError> {
        let catalog = Self::tensor_catalog(&spec);
        let mut data: Vec<Vec<f32>> = catalog.iter().map(&mut gen).collect();
        let mut take = |_: &str| data.remove(0);

        let tok_embed = take("embed.token");
        let pos_embed = take("embed.pos");
        let mut layers = Vec::with_capacity(spec.n_layers);
        for _ in 0..spec.n_layers {
            layers.push(LayerWeights {
                attn_norm: take("attn.norm"),
                wq: take("attn.wq"),
                wk: take("attn.wk"),
                wv: take("attn.wv"),
                wo: take("attn.wo"),
                ffn_norm: take("ffn.norm"),
                w1: take("ffn.w1"),
                w2: take("ffn.w2"),
            });
        }
        let head_norm = take("head.norm");
        let head_out = take("head.out");
        debug_assert!(data.is_empty());

        Ok(ToyModel {
            spec,
            tok_embed,
            pos_embed,
            layers,
            head_norm,
            head_out,
        })
    }

    /// Canonical tensor order: embeddings, then per-layer attention and FFN
    /// tensors, then the output head.
    pub fn tensor_catalog(spec: &ModelSpec) -> Vec<TensorDesc> {
        let d = spec.d_model;
        let mut catalog = vec![
            TensorDesc {
                name: "embed.token".into(),
                rows: spec.vocab_size,
                cols: d,
            },
            TensorDesc {
                name: "embed.pos".into(),
                rows: spec.max_seq,
                cols: d,
            },
        ];
        for layer in 0..spec.n_layers {
            let t = |suffix: &str, rows: usize, cols: usize| TensorDesc {
                name: format!("layer{layer}.{suffix}"),
                rows,
                cols,
            };
            catalog.push(t("attn.norm", d, 1));
            catalog.push(t("attn.wq", d, d));
            catalog.push(t("attn.wk", d, d));
            catalog.push(t("attn.wv", d, d));
            catalog.push(t("attn.wo", d, d));
            catalog.push(t("ffn.norm", d, 1));
            catalog.push(t("ffn.w1", spec.d_ff, d));
            catalog.push(t("ffn.w2", d, spec.d_ff));
        }
        catalog.push(TensorDesc {
            name: "head.norm".into(),
            rows: d,
            cols: 1,
        });
        catalog.push(TensorDesc {
            name: "head.out".into(),
            rows: spec.vocab_size,
            cols: d,
        });
        catalog
    }

    /// Tensor data slices in catalog order.
    pub(crate) fn tensor_data(&self) -> Vec<&[f32]> {
        let mut out: Vec<&[f32]> = vec![&self.tok_embed, &self.pos_embed];
        for layer in &self.layers {
            out.push(&layer.attn_norm);
            out.push(&layer.wq);
            out.push(&layer.wk);
            out.push(&layer.wv);
            out.push(&layer.wo);
            out.push(&layer.ffn_norm);
            out.push(&layer.w1);
            out.push(&layer.w2);
        }
        out.push(&self.head_norm);
        out.push(&self.head_out);
        out
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }
}

impl LogitModel for ToyModel {
    fn vocab_size(&self) -> usize {
        self.spec.vocab_size
    }

    fn max_seq(&self) -> usize {
        self.spec.max_seq
    }

    fn forward_logits(
        &self,
        prompt: &[TokenId],
        response: &[TokenId],
        mode: MaskMode,
    ) -> Result<Vec<LogitRow>, ModelError> {
        self.forward_response_rows(prompt, response, mode)
    }

    fn next_token_row(&self, ctx: &[TokenId]) -> Result<LogitRow, ModelError> {
        self.forward_next_row(ctx)
    }

    fn identity(&self) -> ModelIdentity {
        ModelIdentity {
            weights_sha256: self.weights_sha256(),
            spec: Some(self.spec.clone()),
        }
    }
}
