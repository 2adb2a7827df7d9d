//! Parallel (Jacobi fixed-point) decoding for autoregressive action-chunk
//! token models.
//!
//! The library pairs a deterministic seeded toy transformer with three
//! decoding procedures — greedy autoregressive, causal Jacobi fixed-point
//! iteration, and a bidirectional-mask variant — plus an action codec that
//! frames 7-DoF action chunks as token sequences, and a benchmark harness
//! that verifies causal Jacobi output equals greedy AR output token-for-token
//! while counting how many forward passes each procedure spends.
//!
//! Module map:
//! - [`model`]: the seeded toy transformer and the [`model::LogitModel`]
//!   trait the decoders work against.
//! - [`codec`]: 256-bin action quantization and chunk framing (`l = 7m + 2`).
//! - [`decoder`]: AR, Jacobi and blocked decoding with full per-pass traces.
//! - [`bench`]: experiment grids, oracle verification, reports.
//! - [`rng`]: the counter-based streams behind every seeded choice.

pub mod bench;
pub mod codec;
pub mod decoder;
pub mod error;
pub mod model;
pub mod rng;

pub use bench::{run_grid, seeded_prompts, verify_oracle, BenchReport, GridParams, TrialRecord};
pub use codec::{decode_chunk, encode_chunk, ActionChunk, ActionVector, CodecConfig};
pub use decoder::{
    decode, decode_ar, decode_blocked, decode_jacobi, fixed_token_count, verify_fixed_point,
    DecodeMode, DecodeOutcome, DecodeTrace, DecoderConfig, InitPolicy,
};
pub use error::{BenchError, CodecError, DecodeError, ModelError};
pub use model::{greedy_argmax, LogitModel, MaskMode, ModelSpec, TokenId, TokenSequence, ToyModel};
