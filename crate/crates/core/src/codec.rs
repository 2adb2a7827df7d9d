//! Action tokenization: continuous 7-DoF action chunks to and from token
//! sequences.
//!
//! Each action dimension is quantized into 256 uniform bins mapped onto a
//! reserved block at the top of the vocabulary. A chunk of `m` actions is
//! framed as `[begin] + 7m action tokens + [end]`, so the response length is
//! always `l = 7m + 2`. Decoding is strict: any off-frame token is an error,
//! never repaired, because an invalid frame is exactly the signal that a
//! decoder emitted an invalid action.

use serde::{Deserialize, Serialize};

use crate::error::CodecError;
use crate::model::{TokenId, TokenSequence};
use crate::rng::Stream;

/// Number of quantization bins per dimension.
pub const N_BINS: usize = 256;

/// Dimensions per action: x, y, z, phi, theta, psi, gripper.
pub const ACTION_DIMS: usize = 7;

/// A closed value range `[lo, hi]` with `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "(f64, f64)", into = "(f64, f64)")]
pub struct Range {
    lo: f64,
    hi: f64,
}

impl Range {
    pub fn new(lo: f64, hi: f64) -> Result<Self, CodecError> {
        if !lo.is_finite() || !hi.is_finite() || lo >= hi {
            return Err(CodecError::Config(format!(
                "degenerate range [{lo}, {hi}]: lo must be finite and strictly below hi"
            )));
        }
        Ok(Range { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn clamp(&self, value: f64) -> f64 {
        value.clamp(self.lo, self.hi)
    }
}

impl TryFrom<(f64, f64)> for Range {
    type Error = CodecError;
    fn try_from((lo, hi): (f64, f64)) -> Result<Self, Self::Error> {
        Range::new(lo, hi)
    }
}

impl From<Range> for (f64, f64) {
    fn from(r: Range) -> (f64, f64) {
        (r.lo, r.hi)
    }
}

/// One 7-DoF action: end-effector position, rotation, gripper state.
/// The gripper is semantically binary (0 close, 1 open) but carried as a
/// real and quantized like every other dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub phi: f64,
    pub theta: f64,
    pub psi: f64,
    pub g: f64,
}

impl ActionVector {
    pub fn from_array(values: [f64; ACTION_DIMS]) -> Self {
        let [x, y, z, phi, theta, psi, g] = values;
        ActionVector {
            x,
            y,
            z,
            phi,
            theta,
            psi,
            g,
        }
    }

    pub fn to_array(self) -> [f64; ACTION_DIMS] {
        [
            self.x, self.y, self.z, self.phi, self.theta, self.psi, self.g,
        ]
    }
}

/// An ordered run of `m` consecutive actions, predicted in one inference.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionChunk {
    pub actions: Vec<ActionVector>,
}

impl ActionChunk {
    pub fn new(actions: Vec<ActionVector>) -> Self {
        ActionChunk { actions }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// JSON form used for chunk I/O: an array of 7-element rows.
    pub fn to_rows(&self) -> Vec<[f64; ACTION_DIMS]> {
        self.actions.iter().map(|a| a.to_array()).collect()
    }

    pub fn from_rows(rows: Vec<[f64; ACTION_DIMS]>) -> Self {
        ActionChunk {
            actions: rows.into_iter().map(ActionVector::from_array).collect(),
        }
    }
}

/// Codec configuration: per-dimension ranges, the reserved token block and
/// the frame tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodecConfig {
    /// Per-dimension value ranges in order x, y, z, phi, theta, psi, g.
    pub ranges: [Range; ACTION_DIMS],
    /// First token id of the 256-wide action block (vocab_size - 256).
    pub action_token_base: TokenId,
    pub begin_token: TokenId,
    pub end_token: TokenId,
    /// Chunk size m.
    pub chunk_size: usize,
}

impl CodecConfig {
    /// Default ranges: position within half a meter per axis, rotation within
    /// pi radians per axis, gripper in [0, 1].
    pub fn default_ranges() -> [Range; ACTION_DIMS] {
        let pos = Range::new(-0.5, 0.5).expect("static");
        let rot = Range::new(-std::f64::consts::PI, std::f64::consts::PI).expect("static");
        let grip = Range::new(0.0, 1.0).expect("static");
        [pos, pos, pos, rot, rot, rot, grip]
    }

    /// Default codec for a vocabulary of the given size: action block at the
    /// top, begin/end tokens at ids 1 and 2, chunk size 5.
    pub fn for_vocab(vocab_size: usize) -> Result<Self, CodecError> {
        if vocab_size < N_BINS + 2 {
            return Err(CodecError::Config(format!(
                "vocab_size {vocab_size} cannot host the action block plus begin/end tokens"
            )));
        }
        let cfg = CodecConfig {
            ranges: Self::default_ranges(),
            action_token_base: (vocab_size - N_BINS) as TokenId,
            begin_token: 1,
            end_token: 2,
            chunk_size: 5,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CodecError> {
        if self.chunk_size == 0 {
            return Err(CodecError::Config("chunk_size must be at least 1".into()));
        }
        let block = self.action_token_base..self.action_token_base + N_BINS as TokenId;
        for (label, token) in [
            ("begin_token", self.begin_token),
            ("end_token", self.end_token),
        ] {
            if block.contains(&token) {
                return Err(CodecError::Config(format!(
                    "{label} {token} lies inside the action block {block:?}"
                )));
            }
        }
        if self.begin_token == self.end_token {
            return Err(CodecError::Config(
                "begin_token and end_token must differ".into(),
            ));
        }
        Ok(())
    }

    /// Response length `l = 7m + 2`.
    pub fn response_length(&self) -> usize {
        ACTION_DIMS * self.chunk_size + 2
    }

    pub fn is_action_token(&self, token: TokenId) -> bool {
        token >= self.action_token_base && token < self.action_token_base + N_BINS as TokenId
    }
}

/// Bin index of a value: uniform bins over `[lo, hi]`, values clamped into
/// the range first, the exact upper edge folded into bin 255.
pub fn quantize(value: f64, range: Range) -> usize {
    let clamped = range.clamp(value);
    let bin = ((clamped - range.lo()) / range.width() * N_BINS as f64).floor() as usize;
    bin.min(N_BINS - 1)
}

/// Midpoint of a bin: `lo + width * (bin + 0.5) / 256`.
pub fn dequantize(bin: usize, range: Range) -> Result<f64, CodecError> {
    if bin >= N_BINS {
        return Err(CodecError::BinOutOfRange(bin));
    }
    Ok(range.lo() + range.width() * (bin as f64 + 0.5) / N_BINS as f64)
}

/// Tokenize a chunk: `[begin] + 7 tokens per action + [end]`.
pub fn encode_chunk(chunk: &ActionChunk, cfg: &CodecConfig) -> Result<TokenSequence, CodecError> {
    if chunk.len() != cfg.chunk_size {
        return Err(CodecError::Config(format!(
            "chunk has {} actions, codec expects chunk_size {}",
            chunk.len(),
            cfg.chunk_size
        )));
    }
    let mut tokens = Vec::with_capacity(cfg.response_length());
    tokens.push(cfg.begin_token);
    for action in &chunk.actions {
        for (value, range) in action.to_array().into_iter().zip(cfg.ranges) {
            tokens.push(cfg.action_token_base + quantize(value, range) as TokenId);
        }
    }
    tokens.push(cfg.end_token);
    debug_assert_eq!(tokens.len(), cfg.response_length());
    Ok(tokens)
}

/// Strict inverse of [`encode_chunk`]: checks the frame shape, rejects any
/// interior token outside the action block (reporting its position in the
/// full sequence), and reconstructs bin midpoints.
pub fn decode_chunk(tokens: &[TokenId], cfg: &CodecConfig) -> Result<ActionChunk, CodecError> {
    let expected = cfg.response_length();
    if tokens.len() != expected {
        return Err(CodecError::Framing(format!(
            "expected {expected} tokens (7*{} + 2), got {}",
            cfg.chunk_size,
            tokens.len()
        )));
    }
    if tokens[0] != cfg.begin_token {
        return Err(CodecError::Framing(format!(
            "first token {} is not begin_token {}",
            tokens[0], cfg.begin_token
        )));
    }
    if tokens[expected - 1] != cfg.end_token {
        return Err(CodecError::Framing(format!(
            "last token {} is not end_token {}",
            tokens[expected - 1],
            cfg.end_token
        )));
    }
    let interior = &tokens[1..expected - 1];
    for (offset, &token) in interior.iter().enumerate() {
        if !cfg.is_action_token(token) {
            return Err(CodecError::AlienToken {
                position: offset + 1,
                token,
            });
        }
    }
    let mut actions = Vec::with_capacity(cfg.chunk_size);
    for row in interior.chunks_exact(ACTION_DIMS) {
        let mut values = [0.0f64; ACTION_DIMS];
        for ((slot, &token), range) in values.iter_mut().zip(row).zip(cfg.ranges) {
            let bin = (token - cfg.action_token_base) as usize;
            *slot = dequantize(bin, range)?;
        }
        actions.push(ActionVector::from_array(values));
    }
    Ok(ActionChunk { actions })
}

/// Summary of a randomized round-trip check over the codec.
#[derive(Debug, Clone, Serialize)]
pub struct FuzzReport {
    pub samples: usize,
    pub seed: u64,
    /// Worst observed `|dequantize(quantize(v)) - clamp(v)|` per dimension.
    pub max_abs_error: [f64; ACTION_DIMS],
    /// Half a bin width per dimension, the guaranteed bound.
    pub error_bound: [f64; ACTION_DIMS],
    pub bijection_cases: usize,
    pub failures: usize,
}

impl FuzzReport {
    /// The error bound holds mathematically; values clamped exactly to a
    /// range edge can overshoot it by an ulp of f64 arithmetic, so the check
    /// allows one part in 1e9 of slack.
    pub fn passed(&self) -> bool {
        self.failures == 0
            && self
                .max_abs_error
                .iter()
                .zip(&self.error_bound)
                .all(|(e, b)| *e <= b * (1.0 + 1e-9))
    }
}

/// Randomized + exhaustive codec checks shared by the CLI fuzz command and
/// the acceptance suite. Samples values well outside each range to exercise
/// clamping, fuzzes chunk round-trips, and sweeps the 7 x 256 bin bijection.
pub fn fuzz_roundtrip(samples: usize, seed: u64, cfg: &CodecConfig) -> FuzzReport {
    let stream = Stream::new(seed).with_label("codec.fuzz");
    let mut max_abs_error = [0.0f64; ACTION_DIMS];
    let mut error_bound = [0.0f64; ACTION_DIMS];
    let mut failures = 0usize;

    for (d, range) in cfg.ranges.iter().enumerate() {
        error_bound[d] = range.width() / (2.0 * N_BINS as f64);
    }

    for i in 0..samples {
        let d = i % ACTION_DIMS;
        let range = cfg.ranges[d];
        // Span three range-widths centered on the range to hit both clamps.
        let u = stream.unit_f64_at(i as u64);
        let value = range.lo() - range.width() + u * 3.0 * range.width();
        let bin = quantize(value, range);
        match dequantize(bin, range) {
            Ok(back) => {
                let err = (back - range.clamp(value)).abs();
                if err > max_abs_error[d] {
                    max_abs_error[d] = err;
                }
            }
            Err(_) => failures += 1,
        }
    }

    let mut bijection_cases = 0usize;
    for range in cfg.ranges {
        for bin in 0..N_BINS {
            bijection_cases += 1;
            match dequantize(bin, range) {
                Ok(mid) if quantize(mid, range) == bin => {}
                _ => failures += 1,
            }
        }
    }

    FuzzReport {
        samples,
        seed,
        max_abs_error,
        error_bound,
        bijection_cases,
        failures,
    }
}
