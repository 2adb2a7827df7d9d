//! Error types shared across the crate.

use crate::decoder::DecodeTrace;

/// Errors produced by model construction and forward passes.
#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    /// A configuration invariant was violated; the message names it.
    #[error("invalid configuration: {0}")]
    Config(String),
    /// A sequence would not fit in the model's positional table.
    #[error("sequence of {needed} tokens exceeds max_seq {max_seq}")]
    Capacity { needed: usize, max_seq: usize },
    /// A token id is outside the vocabulary.
    #[error("token id {token} out of range for vocab_size {vocab_size}")]
    TokenOutOfRange { token: u32, vocab_size: usize },
    /// Weight file I/O or format problems.
    #[error("weight file error: {0}")]
    WeightFile(String),
    /// The sidecar manifest does not match the weight file contents.
    #[error("manifest checksum mismatch: {0}")]
    ChecksumMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Errors produced by the action codec.
#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CodecError {
    /// A configuration invariant was violated; the message names it.
    #[error("invalid codec configuration: {0}")]
    Config(String),
    /// A bin index outside 0..255.
    #[error("bin index {0} out of range 0..256")]
    BinOutOfRange(usize),
    /// Token sequence does not have the begin/interior/end frame shape.
    #[error("framing error: {0}")]
    Framing(String),
    /// An interior token outside the action-token block. The position is the
    /// 0-based index into the full token sequence.
    #[error("non-action token {token} at position {position}")]
    AlienToken { position: usize, token: u32 },
}

/// Errors produced by the decoding procedures.
#[derive(Debug, thiserror::Error)]
pub enum DecodeError {
    /// A decoder configuration invariant was violated.
    #[error("invalid decoder configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    /// The pass cap was exhausted before reaching a fixed point. Carries the
    /// full trace up to the point of failure; `block` is set when the failure
    /// happened inside a blocked decode.
    #[error("no fixed point within {max_passes} passes{}", block_suffix(.block))]
    NonConvergence {
        max_passes: usize,
        block: Option<usize>,
        trace: Box<DecodeTrace>,
    },
    /// An iterate repeated without being a fixed point, so the iteration
    /// would loop forever.
    #[error("iterate cycle detected at pass {pass}{}", block_suffix(.block))]
    CycleDetected {
        pass: usize,
        block: Option<usize>,
        trace: Box<DecodeTrace>,
    },
    /// A trace query with an out-of-range pass index.
    #[error("pass index {pass} out of range (passes_total {passes_total})")]
    PassOutOfRange { pass: usize, passes_total: usize },
}

impl DecodeError {
    /// The trace carried by a nonconvergence or cycle error, if any.
    pub fn trace(&self) -> Option<&DecodeTrace> {
        match self {
            DecodeError::NonConvergence { trace, .. } => Some(trace),
            DecodeError::CycleDetected { trace, .. } => Some(trace),
            _ => None,
        }
    }
}

/// Errors produced by the benchmark harness.
#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    /// Grid or trial parameters are invalid.
    #[error("invalid bench configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    /// A causal-mode decode disagreed with the AR oracle. This aborts report
    /// generation; mismatches are never aggregated away.
    #[error(
        "oracle mismatch: prompt {prompt_index} (seed {seed}) horizon {horizon}, first diff at slot {first_diff}"
    )]
    OracleMismatch {
        prompt_index: usize,
        seed: u64,
        horizon: usize,
        first_diff: usize,
        expected: Vec<u32>,
        actual: Vec<u32>,
    },
    /// A causal trace violated prefix-fixing or a pass bound.
    #[error("trace invariant violated: {0}")]
    TraceInvariant(String),
    /// Two trial records with different response lengths cannot be compared.
    #[error("cannot compare trials with total_length {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    /// The requested verification has no guarantee to verify.
    #[error("oracle verification is defined for causal modes only")]
    NoOracleForMode,
}

fn block_suffix(block: &Option<usize>) -> String {
    match block {
        Some(b) => format!(" (block {b})"),
        None => String::new(),
    }
}
