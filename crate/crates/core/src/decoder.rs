//! Decoding procedures: greedy autoregressive, parallel Jacobi fixed-point,
//! and blocked decoding for horizons shorter than the response.
//!
//! Greedy AR emits one token per forward pass. Jacobi decoding treats the
//! `n` unknown slots as a nonlinear system `y_i = argmax p(y | Y_i, x)` and
//! updates all slots simultaneously from the previous iterate until two
//! consecutive iterates are identical (the fixed point). With a causal mask
//! the fixed point provably equals the AR output and arrives in at most
//! `n + 1` passes, because slot `i` depends only on slots before it: after
//! pass `j` the first `j` slots are final and never move again
//! (prefix-fixing). The bidirectional mask has no such guarantee, so that
//! mode gets a pass cap and cycle detection instead, and failures carry the
//! full trace.
//!
//! A horizon `n < l` partitions the response into `ceil(l / n)` blocks,
//! each solved by Jacobi conditioned on the finalized earlier blocks (a
//! Gauss-Seidel step between blocks, pure Jacobi within).

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::DecodeError;
use crate::model::{greedy_argmax, LogitModel, MaskMode, TokenId, TokenSequence};
use crate::rng::Stream;

/// Which decoding procedure to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecodeMode {
    Ar,
    JacobiCausal,
    JacobiBidirectional,
}

impl DecodeMode {
    pub fn mask_mode(self) -> MaskMode {
        match self {
            // AR reads next-token rows, which is causal by construction.
            DecodeMode::Ar | DecodeMode::JacobiCausal => MaskMode::Causal,
            DecodeMode::JacobiBidirectional => MaskMode::ResponseBidirectional,
        }
    }

    pub fn is_causal(self) -> bool {
        self != DecodeMode::JacobiBidirectional
    }
}

impl std::fmt::Display for DecodeMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            DecodeMode::Ar => "ar",
            DecodeMode::JacobiCausal => "jacobi-causal",
            DecodeMode::JacobiBidirectional => "jacobi-bidirectional",
        };
        f.write_str(s)
    }
}

/// How the initial iterate `Y^(0)` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "policy")]
pub enum InitPolicy {
    /// Every slot starts as the given token.
    ConstantToken { token: TokenId },
    /// Slot `i` starts as a seeded uniform draw from the 256-wide action
    /// block at `action_token_base`. The draw depends only on `(seed, i)`,
    /// so blocking does not change initialization.
    SeededUniformActionBlock {
        seed: u64,
        action_token_base: TokenId,
    },
}

impl InitPolicy {
    pub fn token_at(&self, slot: usize) -> TokenId {
        match *self {
            InitPolicy::ConstantToken { token } => token,
            InitPolicy::SeededUniformActionBlock {
                seed,
                action_token_base,
            } => {
                let draw = Stream::new(seed)
                    .with_label("decoder.init")
                    .bounded_at(slot as u64, 256);
                action_token_base + draw as TokenId
            }
        }
    }

    fn max_token(&self) -> TokenId {
        match *self {
            InitPolicy::ConstantToken { token } => token,
            InitPolicy::SeededUniformActionBlock {
                action_token_base, ..
            } => action_token_base + 255,
        }
    }
}

/// Configuration for one decode call.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecoderConfig {
    pub mode: DecodeMode,
    /// Tokens solved per Jacobi system.
    pub horizon: usize,
    /// Response length l.
    pub total_length: usize,
    pub init: InitPolicy,
    /// Per-block pass cap. Defaults to `horizon + 1` for causal modes
    /// (provably sufficient) and `4 * horizon` for bidirectional (a cap that
    /// turns livelock into a reportable error).
    pub max_passes: Option<usize>,
    /// Defaults to on for bidirectional mode; causal iteration cannot cycle.
    pub cycle_detection: Option<bool>,
}

impl DecoderConfig {
    pub fn new(mode: DecodeMode, horizon: usize, total_length: usize, init: InitPolicy) -> Self {
        DecoderConfig {
            mode,
            horizon,
            total_length,
            init,
            max_passes: None,
            cycle_detection: None,
        }
    }

    pub fn validate(&self, vocab_size: usize) -> Result<(), DecodeError> {
        if self.total_length == 0 {
            return Err(DecodeError::Config(
                "total_length must be at least 1".into(),
            ));
        }
        if self.horizon == 0 || self.horizon > self.total_length {
            return Err(DecodeError::Config(format!(
                "horizon {} must satisfy 1 <= horizon <= total_length {}",
                self.horizon, self.total_length
            )));
        }
        if let Some(cap) = self.max_passes {
            if cap < 2 {
                return Err(DecodeError::Config("max_passes must be at least 2".into()));
            }
        }
        if self.init.max_token() as usize >= vocab_size {
            return Err(DecodeError::Config(format!(
                "init policy can produce token {} outside vocab_size {vocab_size}",
                self.init.max_token()
            )));
        }
        Ok(())
    }

    pub fn effective_max_passes(&self) -> usize {
        self.max_passes.unwrap_or(match self.mode {
            DecodeMode::Ar | DecodeMode::JacobiCausal => self.horizon + 1,
            DecodeMode::JacobiBidirectional => 4 * self.horizon,
        })
    }

    pub fn effective_cycle_detection(&self) -> bool {
        self.cycle_detection
            .unwrap_or(self.mode == DecodeMode::JacobiBidirectional)
    }

    /// Block extents for this horizon: `ceil(l / n)` consecutive blocks, the
    /// last possibly short.
    pub fn block_extents(&self) -> Vec<(usize, usize)> {
        let mut blocks = Vec::new();
        let mut start = 0;
        while start < self.total_length {
            let end = (start + self.horizon).min(self.total_length);
            blocks.push((start, end));
            start = end;
        }
        blocks
    }
}

/// Per-block accounting inside a trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockStats {
    pub start: usize,
    pub end: usize,
    /// Global iterate index of this block's local iterate 0.
    pub pass_start: usize,
    pub passes_total: usize,
    pub passes_changing: usize,
    pub converged: bool,
    /// Slots of this block already equal to the block's final output after
    /// the block's first update pass.
    pub fixed_first_pass: usize,
    /// Same count two passes before the certifying pass, i.e. just before
    /// the iterate became fully correct. This is where preemptively-correct
    /// tokens show up.
    pub fixed_pre_convergence: usize,
}

/// Complete per-iteration record of one decode call.
///
/// For Jacobi modes `iterates[0]` is the initialization and every iterate is
/// a full-length snapshot; when converged the last two iterates are
/// identical (the fixed-point certificate). For AR, `iterates[j]` is the
/// emitted prefix of length `j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeTrace {
    pub mode: DecodeMode,
    pub horizon: usize,
    pub total_length: usize,
    pub iterates: Vec<TokenSequence>,
    /// Per update pass: global slot indices that changed.
    pub changed_positions: Vec<Vec<usize>>,
    /// Per iterate: slots equal to the final output.
    pub fixed_token_counts: Vec<usize>,
    pub passes_total: usize,
    pub passes_changing: usize,
    pub converged: bool,
    pub block_boundaries: Vec<(usize, usize)>,
    pub block_stats: Vec<BlockStats>,
}

/// Decoded tokens plus their trace.
#[derive(Debug, Clone)]
pub struct DecodeOutcome {
    pub tokens: TokenSequence,
    pub trace: DecodeTrace,
}

fn matching_count(iterate: &[TokenId], reference: &[TokenId]) -> usize {
    iterate
        .iter()
        .zip(reference)
        .filter(|(a, b)| a == b)
        .count()
}

fn longest_matching_prefix(iterate: &[TokenId], reference: &[TokenId]) -> usize {
    iterate
        .iter()
        .zip(reference)
        .take_while(|(a, b)| a == b)
        .count()
}

/// Count of slots in iterate `pass` that already equal the final output.
pub fn fixed_token_count(trace: &DecodeTrace, pass: usize) -> Result<usize, DecodeError> {
    if pass > trace.passes_total {
        return Err(DecodeError::PassOutOfRange {
            pass,
            passes_total: trace.passes_total,
        });
    }
    let reference = trace
        .iterates
        .last()
        .expect("trace has at least the initial iterate");
    Ok(matching_count(&trace.iterates[pass], reference))
}

/// Greedy AR decoding: `l` tokens, one full forward pass each.
pub fn decode_ar<M: LogitModel>(
    model: &M,
    prompt: &[TokenId],
    total_length: usize,
) -> Result<DecodeOutcome, DecodeError> {
    if total_length == 0 {
        return Err(DecodeError::Config(
            "total_length must be at least 1".into(),
        ));
    }
    check_capacity(model, prompt, total_length)?;

    let mut ctx = prompt.to_vec();
    ctx.reserve(total_length);
    let mut iterates = Vec::with_capacity(total_length + 1);
    let mut changed_positions = Vec::with_capacity(total_length);
    iterates.push(Vec::new());
    for slot in 0..total_length {
        let row = model.next_token_row(&ctx)?;
        ctx.push(greedy_argmax(&row));
        iterates.push(ctx[prompt.len()..].to_vec());
        changed_positions.push(vec![slot]);
    }
    let tokens = ctx[prompt.len()..].to_vec();

    let fixed_token_counts: Vec<usize> = (0..=total_length).collect();
    let block_stats = vec![BlockStats {
        start: 0,
        end: total_length,
        pass_start: 0,
        passes_total: total_length,
        passes_changing: total_length,
        converged: true,
        fixed_first_pass: 1,
        fixed_pre_convergence: total_length.saturating_sub(2),
    }];
    let trace = DecodeTrace {
        mode: DecodeMode::Ar,
        horizon: total_length,
        total_length,
        iterates,
        changed_positions,
        fixed_token_counts,
        passes_total: total_length,
        passes_changing: total_length,
        converged: true,
        block_boundaries: vec![(0, total_length)],
        block_stats,
    };
    Ok(DecodeOutcome { tokens, trace })
}

/// Single-system Jacobi decoding; requires `horizon == total_length`.
pub fn decode_jacobi<M: LogitModel>(
    model: &M,
    prompt: &[TokenId],
    cfg: &DecoderConfig,
) -> Result<DecodeOutcome, DecodeError> {
    if cfg.horizon != cfg.total_length {
        return Err(DecodeError::Config(format!(
            "decode_jacobi requires horizon == total_length ({} != {}); use decode_blocked",
            cfg.horizon, cfg.total_length
        )));
    }
    decode_parallel(model, prompt, cfg)
}

/// Blocked decoding for `horizon < total_length`.
pub fn decode_blocked<M: LogitModel>(
    model: &M,
    prompt: &[TokenId],
    cfg: &DecoderConfig,
) -> Result<DecodeOutcome, DecodeError> {
    if cfg.horizon >= cfg.total_length {
        return Err(DecodeError::Config(format!(
            "decode_blocked requires horizon < total_length ({} >= {}); use decode_jacobi",
            cfg.horizon, cfg.total_length
        )));
    }
    decode_parallel(model, prompt, cfg)
}

/// Dispatch on the configured mode and horizon.
pub fn decode<M: LogitModel>(
    model: &M,
    prompt: &[TokenId],
    cfg: &DecoderConfig,
) -> Result<DecodeOutcome, DecodeError> {
    cfg.validate(model.vocab_size())?;
    match cfg.mode {
        DecodeMode::Ar => decode_ar(model, prompt, cfg.total_length),
        _ => decode_parallel(model, prompt, cfg),
    }
}

fn check_capacity<M: LogitModel>(
    model: &M,
    prompt: &[TokenId],
    total_length: usize,
) -> Result<(), DecodeError> {
    if prompt.is_empty() {
        return Err(DecodeError::Config("prompt must be nonempty".into()));
    }
    let needed = prompt.len() + total_length;
    if needed > model.max_seq() {
        return Err(crate::error::ModelError::Capacity {
            needed,
            max_seq: model.max_seq(),
        }
        .into());
    }
    Ok(())
}

/// One Jacobi solve per block, Gauss-Seidel between blocks.
fn decode_parallel<M: LogitModel>(
    model: &M,
    prompt: &[TokenId],
    cfg: &DecoderConfig,
) -> Result<DecodeOutcome, DecodeError> {
    cfg.validate(model.vocab_size())?;
    if cfg.mode == DecodeMode::Ar {
        return Err(DecodeError::Config(
            "decode_parallel does not handle AR mode".into(),
        ));
    }
    check_capacity(model, prompt, cfg.total_length)?;

    let l = cfg.total_length;
    let mask = cfg.mode.mask_mode();
    let max_passes = cfg.effective_max_passes();
    let cycle_detection = cfg.effective_cycle_detection();
    let blocks = cfg.block_extents();

    let init: TokenSequence = (0..l).map(|slot| cfg.init.token_at(slot)).collect();
    let mut response = init;
    let mut iterates: Vec<TokenSequence> = vec![response.clone()];
    let mut changed_positions: Vec<Vec<usize>> = Vec::new();
    let mut block_stats: Vec<BlockStats> = Vec::new();
    let mut ctx = prompt.to_vec();
    ctx.reserve(l);

    let mut failure: Option<(usize, DecodeErrorKind)> = None;

    'blocks: for (block_index, &(start, end)) in blocks.iter().enumerate() {
        let width = end - start;
        let pass_start = iterates.len() - 1;
        let mut current = response[start..end].to_vec();
        let mut seen: HashSet<TokenSequence> = HashSet::new();
        if cycle_detection {
            seen.insert(current.clone());
        }
        let mut passes = 0usize;
        let mut changing = 0usize;
        let mut converged = false;

        while passes < max_passes {
            let rows = model.forward_logits(&ctx, &current, mask)?;
            debug_assert_eq!(rows.len(), width);
            let next: TokenSequence = rows.iter().map(|row| greedy_argmax(row)).collect();
            passes += 1;
            let changed: Vec<usize> = (0..width)
                .filter(|&i| next[i] != current[i])
                .map(|i| start + i)
                .collect();
            let is_fixed_point = changed.is_empty();
            if !is_fixed_point {
                changing += 1;
            }
            response[start..end].copy_from_slice(&next);
            iterates.push(response.clone());
            changed_positions.push(changed);
            if is_fixed_point {
                converged = true;
                break;
            }
            if cycle_detection && !seen.insert(next.clone()) {
                // A repeated iterate under a deterministic update means the
                // iteration is in a cycle and will never reach a fixed point.
                failure = Some((block_index, DecodeErrorKind::Cycle { pass: passes }));
                finish_block_stats(
                    &mut block_stats,
                    &iterates,
                    start,
                    end,
                    pass_start,
                    passes,
                    changing,
                    false,
                );
                break 'blocks;
            }
            current = next;
        }

        if !converged && failure.is_none() {
            failure = Some((block_index, DecodeErrorKind::NonConvergence));
            finish_block_stats(
                &mut block_stats,
                &iterates,
                start,
                end,
                pass_start,
                passes,
                changing,
                false,
            );
            break 'blocks;
        }
        if converged {
            finish_block_stats(
                &mut block_stats,
                &iterates,
                start,
                end,
                pass_start,
                passes,
                changing,
                true,
            );
            ctx.extend_from_slice(&response[start..end]);
        }
    }

    let passes_total = iterates.len() - 1;
    let passes_changing = block_stats.iter().map(|b| b.passes_changing).sum();
    let reference = iterates.last().expect("at least the init iterate").clone();
    let fixed_token_counts = iterates
        .iter()
        .map(|it| matching_count(it, &reference))
        .collect();
    let converged = failure.is_none();
    let trace = DecodeTrace {
        mode: cfg.mode,
        horizon: cfg.horizon,
        total_length: l,
        iterates,
        changed_positions,
        fixed_token_counts,
        passes_total,
        passes_changing,
        converged,
        block_boundaries: blocks,
        block_stats,
    };

    let multi_block = trace.block_boundaries.len() > 1;
    match failure {
        None => {
            debug_assert!(
                !trace.mode.is_causal() || trace.check_causal_invariants().is_ok(),
                "causal trace invariant violated: {:?}",
                trace.check_causal_invariants()
            );
            Ok(DecodeOutcome {
                tokens: response,
                trace,
            })
        }
        Some((block, DecodeErrorKind::NonConvergence)) => Err(DecodeError::NonConvergence {
            max_passes,
            block: multi_block.then_some(block),
            trace: Box::new(trace),
        }),
        Some((block, DecodeErrorKind::Cycle { pass })) => Err(DecodeError::CycleDetected {
            pass,
            block: multi_block.then_some(block),
            trace: Box::new(trace),
        }),
    }
}

enum DecodeErrorKind {
    NonConvergence,
    Cycle { pass: usize },
}

#[allow(clippy::too_many_arguments)]
fn finish_block_stats(
    block_stats: &mut Vec<BlockStats>,
    iterates: &[TokenSequence],
    start: usize,
    end: usize,
    pass_start: usize,
    passes_total: usize,
    passes_changing: usize,
    converged: bool,
) {
    let local = |pass: usize| &iterates[pass_start + pass][start..end];
    let reference = local(passes_total).to_vec();
    let fixed_first_pass = matching_count(local(passes_total.min(1)), &reference);
    let fixed_pre_convergence = matching_count(local(passes_total.saturating_sub(2)), &reference);
    block_stats.push(BlockStats {
        start,
        end,
        pass_start,
        passes_total,
        passes_changing,
        converged,
        fixed_first_pass,
        fixed_pre_convergence,
    });
}

/// Re-verify a claimed fixed point by applying one more update pass per
/// block and checking nothing moves. Used by tests and the bench harness
/// rather than trusting the loop's own termination test.
pub fn verify_fixed_point<M: LogitModel>(
    model: &M,
    prompt: &[TokenId],
    tokens: &[TokenId],
    cfg: &DecoderConfig,
) -> Result<bool, DecodeError> {
    let mask = cfg.mode.mask_mode();
    let mut ctx = prompt.to_vec();
    for &(start, end) in &cfg.block_extents() {
        let rows = model.forward_logits(&ctx, &tokens[start..end], mask)?;
        for (i, row) in rows.iter().enumerate() {
            if greedy_argmax(row) != tokens[start + i] {
                return Ok(false);
            }
        }
        ctx.extend_from_slice(&tokens[start..end]);
    }
    Ok(true)
}

impl DecodeTrace {
    /// Mean over blocks of the fixed-token count after each block's first
    /// update pass.
    pub fn mean_fixed_first_pass(&self) -> f64 {
        mean(self.block_stats.iter().map(|b| b.fixed_first_pass as f64))
    }

    /// Mean over blocks of the fixed-token count just before convergence.
    pub fn mean_fixed_pre_convergence(&self) -> f64 {
        mean(
            self.block_stats
                .iter()
                .map(|b| b.fixed_pre_convergence as f64),
        )
    }

    /// Structural and causal-mode invariants. Violations name the failing
    /// check; `Ok` means the trace is internally consistent and, for causal
    /// modes, prefix-fixing and the pass bounds hold.
    pub fn check_causal_invariants(&self) -> Result<(), String> {
        self.check_structure()?;
        if !self.mode.is_causal() {
            return Ok(());
        }
        if self.mode == DecodeMode::Ar {
            return self.check_ar_shape();
        }
        let reference = self.iterates.last().expect("nonempty");

        for (b, stats) in self.block_stats.iter().enumerate() {
            let width = stats.end - stats.start;
            if stats.passes_total > width + 1 {
                return Err(format!(
                    "block {b}: passes_total {} exceeds width+1 {}",
                    stats.passes_total,
                    width + 1
                ));
            }
            if stats.passes_changing > width {
                return Err(format!(
                    "block {b}: passes_changing {} exceeds width {}",
                    stats.passes_changing, width
                ));
            }
            let block_final =
                &self.iterates[stats.pass_start + stats.passes_total][stats.start..stats.end];
            for pass in 0..=stats.passes_total {
                let iterate = &self.iterates[stats.pass_start + pass][stats.start..stats.end];
                let required = pass.min(width);
                if iterate[..required] != block_final[..required] {
                    return Err(format!(
                        "block {b}: prefix of length {required} not fixed after pass {pass}"
                    ));
                }
            }
        }

        let mut prev_prefix = 0usize;
        for (j, iterate) in self.iterates.iter().enumerate() {
            let prefix = longest_matching_prefix(iterate, reference);
            if prefix < prev_prefix {
                return Err(format!(
                    "matching prefix shrank from {prev_prefix} to {prefix} at pass {j}"
                ));
            }
            prev_prefix = prefix;
        }
        Ok(())
    }

    fn check_structure(&self) -> Result<(), String> {
        if self.iterates.len() != self.passes_total + 1 {
            return Err(format!(
                "iterates has {} entries for {} passes",
                self.iterates.len(),
                self.passes_total
            ));
        }
        if self.changed_positions.len() != self.passes_total {
            return Err("changed_positions length mismatch".into());
        }
        if self.fixed_token_counts.len() != self.passes_total + 1 {
            return Err("fixed_token_counts length mismatch".into());
        }
        let reference = self.iterates.last().expect("nonempty");
        for (j, (&count, iterate)) in self
            .fixed_token_counts
            .iter()
            .zip(&self.iterates)
            .enumerate()
        {
            if count != matching_count(iterate, reference) {
                return Err(format!(
                    "fixed_token_counts[{j}] does not match its iterate"
                ));
            }
        }
        if self.converged {
            if *self.fixed_token_counts.last().expect("nonempty") != self.total_length {
                return Err("converged trace does not end fully fixed".into());
            }
            if self.mode != DecodeMode::Ar && self.passes_total >= 1 {
                let last = &self.iterates[self.passes_total];
                let prev = &self.iterates[self.passes_total - 1];
                if last != prev {
                    return Err("converged trace lacks the fixed-point certificate".into());
                }
            }
        }
        Ok(())
    }

    fn check_ar_shape(&self) -> Result<(), String> {
        for (j, iterate) in self.iterates.iter().enumerate() {
            if iterate.len() != j {
                return Err(format!("AR iterate {j} has length {}", iterate.len()));
            }
        }
        for (j, changed) in self.changed_positions.iter().enumerate() {
            if changed.as_slice() != [j] {
                return Err(format!("AR pass {j} changed {changed:?}, expected [{j}]"));
            }
        }
        Ok(())
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for v in values {
        sum += v;
        count += 1;
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::testing::ShiftModel;
    use crate::model::{ModelSpec, ToyModel};

    fn toy(seed: u64) -> ToyModel {
        ToyModel::build(ModelSpec {
            max_seq: 64,
            seed,
            ..ModelSpec::default()
        })
        .unwrap()
    }

    fn seeded_init() -> InitPolicy {
        InitPolicy::SeededUniformActionBlock {
            seed: 7,
            action_token_base: 256,
        }
    }

    #[test]
    fn ar_uses_one_pass_per_token() {
        let model = toy(1);
        let out = decode_ar(&model, &[5, 6, 7], 37).unwrap();
        assert_eq!(out.tokens.len(), 37);
        assert_eq!(out.trace.passes_total, 37);
        assert!(out.trace.converged);
        assert!(out.trace.check_causal_invariants().is_ok());
        for (j, changed) in out.trace.changed_positions.iter().enumerate() {
            assert_eq!(changed, &vec![j]);
        }
    }

    #[test]
    fn ar_single_token_matches_prompt_only_row() {
        let model = toy(2);
        let prompt = vec![10, 11, 12];
        let out = decode_ar(&model, &prompt, 1).unwrap();
        let row = crate::model::LogitModel::next_token_row(&model, &prompt).unwrap();
        assert_eq!(out.tokens, vec![greedy_argmax(&row)]);
    }

    #[test]
    fn constant_logit_model_emits_token_zero() {
        let model = ToyModel::constant(ModelSpec::default(), 0.0).unwrap();
        let out = decode_ar(&model, &[3, 4], 37).unwrap();
        assert!(out.tokens.iter().all(|&t| t == 0));
    }

    #[test]
    fn constant_logit_jacobi_converges_in_two_passes() {
        let model = ToyModel::constant(ModelSpec::default(), 0.0).unwrap();
        let cfg = DecoderConfig::new(DecodeMode::JacobiCausal, 37, 37, seeded_init());
        let out = decode_jacobi(&model, &[3, 4], &cfg).unwrap();
        assert_eq!(out.tokens, vec![0u32; 37]);
        assert_eq!(out.trace.passes_total, 2);
        assert_eq!(out.trace.passes_changing, 1);
    }

    #[test]
    fn constant_logit_jacobi_with_matching_init_certifies_in_one_pass() {
        let model = ToyModel::constant(ModelSpec::default(), 0.0).unwrap();
        let cfg = DecoderConfig::new(
            DecodeMode::JacobiCausal,
            37,
            37,
            InitPolicy::ConstantToken { token: 0 },
        );
        let out = decode_jacobi(&model, &[3, 4], &cfg).unwrap();
        assert_eq!(out.trace.passes_total, 1);
        assert_eq!(out.trace.passes_changing, 0);
    }

    #[test]
    fn causal_jacobi_matches_ar() {
        for seed in [1u64, 2, 3] {
            let model = toy(seed);
            let prompt = vec![40, 41, 42, 43];
            let ar = decode_ar(&model, &prompt, 37).unwrap();
            let cfg = DecoderConfig::new(DecodeMode::JacobiCausal, 37, 37, seeded_init());
            let jac = decode_jacobi(&model, &prompt, &cfg).unwrap();
            assert_eq!(jac.tokens, ar.tokens, "seed {seed}");
            assert!(jac.trace.passes_changing <= 37);
            assert!(jac.trace.passes_total <= 38);
            assert!(jac.trace.check_causal_invariants().is_ok());
        }
    }

    #[test]
    fn blocked_partitions_as_ceil() {
        let cfg = DecoderConfig::new(DecodeMode::JacobiCausal, 16, 37, seeded_init());
        assert_eq!(cfg.block_extents(), vec![(0, 16), (16, 32), (32, 37)]);
        let cfg7 = DecoderConfig::new(DecodeMode::JacobiCausal, 7, 37, seeded_init());
        assert_eq!(
            cfg7.block_extents(),
            vec![(0, 7), (7, 14), (14, 21), (21, 28), (28, 35), (35, 37)]
        );
    }

    #[test]
    fn blocked_causal_matches_ar_for_every_horizon() {
        let model = toy(4);
        let prompt = vec![100, 101, 102];
        let ar = decode_ar(&model, &prompt, 23).unwrap();
        for horizon in 1..=23 {
            let cfg = DecoderConfig::new(DecodeMode::JacobiCausal, horizon, 23, seeded_init());
            let out = decode(&model, &prompt, &cfg).unwrap();
            assert_eq!(out.tokens, ar.tokens, "horizon {horizon}");
            assert!(
                out.trace.check_causal_invariants().is_ok(),
                "horizon {horizon}"
            );
            assert_eq!(out.trace.block_boundaries.len(), 23_usize.div_ceil(horizon));
        }
    }

    #[test]
    fn full_horizon_blocked_equals_jacobi() {
        let model = toy(5);
        let prompt = vec![9, 9, 9];
        let cfg = DecoderConfig::new(DecodeMode::JacobiCausal, 16, 16, seeded_init());
        let a = decode_jacobi(&model, &prompt, &cfg).unwrap();
        let b = decode(&model, &prompt, &cfg).unwrap();
        assert_eq!(a.tokens, b.tokens);
        assert_eq!(a.trace, b.trace);
        assert!(decode_blocked(&model, &prompt, &cfg).is_err());
    }

    #[test]
    fn shift_model_hits_sequential_worst_case() {
        let model = ShiftModel::new(512, 128);
        let n = 24;
        let cfg = DecoderConfig::new(
            DecodeMode::JacobiCausal,
            n,
            n,
            InitPolicy::ConstantToken { token: 400 },
        );
        let out = decode_jacobi(&model, &[10], &cfg).unwrap();
        let expected: Vec<u32> = (11..11 + n as u32).collect();
        assert_eq!(out.tokens, expected);
        assert_eq!(
            out.trace.passes_changing, n,
            "every pass must change a slot"
        );
        assert_eq!(out.trace.passes_total, n + 1);
        assert!(out.trace.check_causal_invariants().is_ok());
    }

    #[test]
    fn init_independence_on_causal_mode() {
        let model = toy(6);
        let prompt = vec![77, 78];
        let mut outputs = Vec::new();
        for init in [
            InitPolicy::ConstantToken { token: 0 },
            InitPolicy::ConstantToken { token: 300 },
            InitPolicy::SeededUniformActionBlock {
                seed: 1,
                action_token_base: 256,
            },
            InitPolicy::SeededUniformActionBlock {
                seed: 2,
                action_token_base: 256,
            },
        ] {
            let cfg = DecoderConfig::new(DecodeMode::JacobiCausal, 16, 16, init);
            outputs.push(decode_jacobi(&model, &prompt, &cfg).unwrap().tokens);
        }
        assert!(outputs.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn fixed_token_count_queries() {
        let model = toy(8);
        let cfg = DecoderConfig::new(DecodeMode::JacobiCausal, 16, 16, seeded_init());
        let out = decode_jacobi(&model, &[1, 2, 3], &cfg).unwrap();
        assert_eq!(
            fixed_token_count(&out.trace, out.trace.passes_total).unwrap(),
            16
        );
        for j in 0..=out.trace.passes_total {
            assert_eq!(
                fixed_token_count(&out.trace, j).unwrap(),
                out.trace.fixed_token_counts[j]
            );
            assert!(fixed_token_count(&out.trace, j).unwrap() >= j.min(16));
        }
        assert!(matches!(
            fixed_token_count(&out.trace, out.trace.passes_total + 1),
            Err(DecodeError::PassOutOfRange { .. })
        ));
    }

    #[test]
    fn bidirectional_converges_or_reports_with_trace() {
        for seed in 0..20u64 {
            let model = toy(seed);
            let prompt = vec![50, 51, 52];
            let cfg = DecoderConfig::new(
                DecodeMode::JacobiBidirectional,
                16,
                16,
                InitPolicy::SeededUniformActionBlock {
                    seed,
                    action_token_base: 256,
                },
            );
            match decode_jacobi(&model, &prompt, &cfg) {
                Ok(out) => {
                    assert!(out.trace.converged);
                    assert!(verify_fixed_point(&model, &prompt, &out.tokens, &cfg).unwrap());
                }
                Err(
                    err @ (DecodeError::NonConvergence { .. } | DecodeError::CycleDetected { .. }),
                ) => {
                    let trace = err.trace().expect("failure carries trace");
                    assert_eq!(trace.iterates.len(), trace.passes_total + 1);
                    assert!(!trace.converged);
                }
                Err(other) => panic!("unexpected error: {other}"),
            }
        }
    }

    #[test]
    fn blocked_bidirectional_failures_name_the_block() {
        let mut tagged = 0usize;
        for seed in 0..30u64 {
            let model = toy(seed);
            let mut cfg = DecoderConfig::new(
                DecodeMode::JacobiBidirectional,
                8,
                24,
                InitPolicy::SeededUniformActionBlock {
                    seed,
                    action_token_base: 256,
                },
            );
            cfg.max_passes = Some(3);
            cfg.cycle_detection = Some(false);
            match decode_blocked(&model, &[60, 61], &cfg) {
                Ok(out) => assert_eq!(out.trace.block_boundaries.len(), 3),
                Err(DecodeError::NonConvergence { block, trace, .. }) => {
                    let failing = block.expect("multi-block failure carries its block index");
                    assert!(failing < 3);
                    assert_eq!(trace.block_stats.len(), failing + 1);
                    tagged += 1;
                }
                Err(other) => panic!("unexpected error: {other}"),
            }
        }
        assert!(tagged > 0, "a 3-pass cap must trip on some seed");
    }

    #[test]
    fn nonconvergence_cap_is_honored() {
        let model = toy(3);
        let mut cfg = DecoderConfig::new(DecodeMode::JacobiBidirectional, 37, 37, seeded_init());
        cfg.max_passes = Some(2);
        cfg.cycle_detection = Some(false);
        match decode_jacobi(&model, &[1, 2, 3], &cfg) {
            Ok(out) => assert!(out.trace.passes_total <= 2),
            Err(DecodeError::NonConvergence {
                max_passes, trace, ..
            }) => {
                assert_eq!(max_passes, 2);
                assert_eq!(trace.passes_total, 2);
            }
            Err(other) => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn config_validation() {
        let bad = DecoderConfig::new(DecodeMode::JacobiCausal, 0, 10, seeded_init());
        assert!(bad.validate(512).is_err());
        let bad = DecoderConfig::new(DecodeMode::JacobiCausal, 11, 10, seeded_init());
        assert!(bad.validate(512).is_err());
        let mut bad = DecoderConfig::new(DecodeMode::JacobiCausal, 5, 10, seeded_init());
        bad.max_passes = Some(1);
        assert!(bad.validate(512).is_err());
        let bad = DecoderConfig::new(
            DecodeMode::JacobiCausal,
            5,
            10,
            InitPolicy::ConstantToken { token: 512 },
        );
        assert!(bad.validate(512).is_err());
    }

    #[test]
    fn capacity_errors_surface() {
        let model = toy(1);
        let prompt = vec![1u32; 40];
        assert!(decode_ar(&model, &prompt, 37).is_err());
        let cfg = DecoderConfig::new(DecodeMode::JacobiCausal, 37, 37, seeded_init());
        assert!(decode_jacobi(&model, &prompt, &cfg).is_err());
    }
}
