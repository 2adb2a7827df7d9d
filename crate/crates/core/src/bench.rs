//! Benchmark harness: controlled grids over modes and horizons, oracle
//! verification at scale, and machine-readable reports.
//!
//! Pass counts are the primary metric here; they are exact and
//! platform-independent, while wall-clock numbers at desk scale depend on
//! allocator and scheduler noise. Wall time, tokens/s and execution
//! frequency are measured on a monotonic clock and reported, but acceptance
//! logic never keys on them. Every causal-mode trial is checked against the
//! greedy AR oracle and its trace invariants; a single mismatch aborts the
//! grid rather than becoming a statistic.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::codec::{decode_chunk, CodecConfig};
use crate::decoder::{decode, decode_ar, DecodeMode, DecodeOutcome, DecoderConfig, InitPolicy};
use crate::error::{BenchError, DecodeError};
use crate::model::{LogitModel, ModelIdentity, TokenSequence};
use crate::rng::Stream;

/// Synthetic seeded prompts over the non-action vocabulary region
/// `0..action_token_base`. Prompt `i` depends only on `(seed, i)`.
pub fn seeded_prompts(
    count: usize,
    len: usize,
    seed: u64,
    non_action_limit: u32,
) -> Vec<TokenSequence> {
    let root = Stream::new(seed).with_label("bench.prompts");
    (0..count)
        .map(|i| {
            let stream = root.with_index(i as u64);
            (0..len)
                .map(|p| stream.bounded_at(p as u64, u64::from(non_action_limit)) as u32)
                .collect()
        })
        .collect()
}

/// Stable identity for a prompt set: sha256 over lengths and token bytes.
pub fn prompt_fingerprint(prompts: &[TokenSequence]) -> String {
    let mut hasher = Sha256::new();
    for prompt in prompts {
        hasher.update((prompt.len() as u64).to_le_bytes());
        for &t in prompt {
            hasher.update(t.to_le_bytes());
        }
    }
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// One measured decode.
#[derive(Debug, Clone, Serialize)]
pub struct TrialRecord {
    pub mode: DecodeMode,
    /// Decoding horizon; equals the response length for AR.
    pub horizon: usize,
    pub prompt_index: usize,
    /// Derived seed identifying the prompt.
    pub seed: u64,
    pub trial: usize,
    pub total_length: usize,
    pub chunk_size: usize,
    pub passes_total: usize,
    pub passes_changing: usize,
    /// Monotonic-clock duration of the decode call.
    pub wall_nanos: u64,
    pub converged: bool,
    /// Causal Jacobi trials only; `None` for AR (the oracle itself) and for
    /// bidirectional mode, which has no equivalence guarantee.
    pub matched_oracle: Option<bool>,
    /// Whether the output parsed as a valid action chunk. Alien-token and
    /// framing failures are counted, never repaired.
    pub chunk_valid: bool,
    pub mean_fixed_tokens_at_first_pass: f64,
    pub mean_fixed_tokens_pre_convergence: f64,
}

impl TrialRecord {
    pub fn wall_seconds(&self) -> f64 {
        self.wall_nanos as f64 * 1e-9
    }

    /// `l / wall_seconds`, recomputed from `wall_nanos` on every call so the
    /// two can never disagree.
    pub fn tokens_per_second(&self) -> f64 {
        self.total_length as f64 / self.wall_seconds()
    }

    /// `m / wall_seconds`: action chunks deliverable per second, counting
    /// decode time only.
    pub fn frequency_hz(&self) -> f64 {
        self.chunk_size as f64 / self.wall_seconds()
    }
}

/// Ratio of AR forward passes to Jacobi forward passes for the same prompt
/// and response length. Values below 1.0 are reported as honest slowdowns.
pub fn pass_reduction(ar: &TrialRecord, jacobi: &TrialRecord) -> Result<f64, BenchError> {
    if ar.total_length != jacobi.total_length {
        return Err(BenchError::LengthMismatch {
            left: ar.total_length,
            right: jacobi.total_length,
        });
    }
    Ok(ar.passes_total as f64 / jacobi.passes_total as f64)
}

/// Wall-clock ratio for the same pair; kept separate from [`pass_reduction`]
/// so the two are never conflated.
pub fn wall_clock_ratio(ar: &TrialRecord, jacobi: &TrialRecord) -> Result<f64, BenchError> {
    if ar.total_length != jacobi.total_length {
        return Err(BenchError::LengthMismatch {
            left: ar.total_length,
            right: jacobi.total_length,
        });
    }
    Ok(ar.wall_seconds() / jacobi.wall_seconds())
}

/// Grid parameters; prompt metadata fields are carried into the report.
#[derive(Debug, Clone, Serialize)]
pub struct GridParams {
    pub modes: Vec<DecodeMode>,
    pub horizons: Vec<usize>,
    pub trials: usize,
    pub warmup: usize,
    pub init_seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prompt_seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prompt_len: Option<usize>,
}

impl GridParams {
    pub fn new(modes: Vec<DecodeMode>, horizons: Vec<usize>, trials: usize, warmup: usize) -> Self {
        GridParams {
            modes,
            horizons,
            trials,
            warmup,
            init_seed: 0,
            prompt_seed: None,
            prompt_len: None,
        }
    }
}

/// Default horizons studied by the grid.
pub const DEFAULT_HORIZONS: [usize; 3] = [7, 16, 37];
pub const DEFAULT_TRIALS: usize = 20;
pub const DEFAULT_WARMUP: usize = 3;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Summary {
    pub min: f64,
    pub mean: f64,
    pub median: f64,
    pub max: f64,
}

impl Summary {
    fn from_values(values: &[f64]) -> Summary {
        let mut sorted: Vec<f64> = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
        };
        Summary {
            min: sorted[0],
            mean: sorted.iter().sum::<f64>() / n as f64,
            median,
            max: sorted[n - 1],
        }
    }
}

/// Timing aggregates for one cell; everything here varies run to run and is
/// excluded from determinism comparisons.
#[derive(Debug, Clone, Serialize)]
pub struct CellTiming {
    pub tokens_per_second: Summary,
    pub frequency_hz: Summary,
    pub wall_nanos_median: f64,
    /// Median wall time of the AR cell over this cell's; `None` for the AR
    /// cell itself or when no AR cell ran.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_speedup_vs_ar: Option<f64>,
}

/// Aggregates for one `(mode, horizon)` cell.
#[derive(Debug, Clone, Serialize)]
pub struct CellReport {
    pub mode: DecodeMode,
    /// `None` for the AR baseline cell.
    pub horizon: Option<usize>,
    pub total_length: usize,
    pub trials: usize,
    pub converged_rate: f64,
    /// `Some(1.0)` is the only value a causal Jacobi cell can carry; a
    /// mismatch aborts the grid before a report exists.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_match_rate: Option<f64>,
    pub chunk_valid_rate: f64,
    pub passes_mean: f64,
    pub passes_min: usize,
    pub passes_max: usize,
    pub passes_per_token_mean: f64,
    pub fixed_tokens_at_first_pass_mean: f64,
    pub fixed_tokens_pre_convergence_mean: f64,
    /// AR mean passes over this cell's mean passes (exact arithmetic on
    /// deterministic pass counts); `None` for the AR cell.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pass_reduction_vs_ar: Option<f64>,
    pub timing: CellTiming,
}

/// Horizon trends over the causal Jacobi cells, ordered by horizon.
#[derive(Debug, Clone, Serialize)]
pub struct TrendReport {
    pub horizons: Vec<usize>,
    pub fixed_tokens_pre_convergence: Vec<f64>,
    /// The acceleration-phenomenon trend: preemptively-fixed tokens do not
    /// decrease as the horizon grows.
    pub fixed_tokens_trend_non_decreasing: bool,
    pub passes_per_token: Vec<f64>,
    /// Set when mean passes per emitted token is not non-increasing in the
    /// horizon; flagged rather than hidden.
    pub passes_per_token_inversion: bool,
}

/// Grid metadata recorded alongside the cells.
#[derive(Debug, Clone, Serialize)]
pub struct GridMeta {
    pub prompt_count: usize,
    pub prompt_fingerprint: String,
    #[serde(flatten)]
    pub params: GridParams,
}

/// The full report for one grid run.
#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub schema_version: u32,
    pub model: ModelIdentity,
    pub codec: CodecConfig,
    pub grid: GridMeta,
    pub cells: Vec<CellReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trend: Option<TrendReport>,
}

pub const REPORT_SCHEMA_VERSION: u32 = 1;

impl BenchReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization is infallible")
    }

    /// One CSV row per cell with the deterministic aggregates and the
    /// tokens/s summary.
    pub fn cells_csv(&self) -> String {
        let mut out = String::from(
            "mode,horizon,total_length,trials,converged_rate,oracle_match_rate,chunk_valid_rate,\
             passes_mean,passes_min,passes_max,passes_per_token_mean,\
             fixed_tokens_at_first_pass_mean,fixed_tokens_pre_convergence_mean,\
             pass_reduction_vs_ar,tps_min,tps_mean,tps_median,tps_max\n",
        );
        for cell in &self.cells {
            let horizon = cell
                .horizon
                .map(|h| h.to_string())
                .unwrap_or_else(|| "ar".into());
            let opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                cell.mode,
                horizon,
                cell.total_length,
                cell.trials,
                cell.converged_rate,
                opt(cell.oracle_match_rate),
                cell.chunk_valid_rate,
                cell.passes_mean,
                cell.passes_min,
                cell.passes_max,
                cell.passes_per_token_mean,
                cell.fixed_tokens_at_first_pass_mean,
                cell.fixed_tokens_pre_convergence_mean,
                opt(cell.pass_reduction_vs_ar),
                cell.timing.tokens_per_second.min,
                cell.timing.tokens_per_second.mean,
                cell.timing.tokens_per_second.median,
                cell.timing.tokens_per_second.max,
            ));
        }
        out
    }

    /// Speed-distribution CSV: min/mean/max tokens per second per cell.
    pub fn speed_csv(&self) -> String {
        let mut out = String::from("mode,horizon,tps_min,tps_mean,tps_max\n");
        for cell in &self.cells {
            let horizon = cell
                .horizon
                .map(|h| h.to_string())
                .unwrap_or_else(|| "ar".into());
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                cell.mode,
                horizon,
                cell.timing.tokens_per_second.min,
                cell.timing.tokens_per_second.mean,
                cell.timing.tokens_per_second.max,
            ));
        }
        out
    }
}

fn derived_prompt_seed(init_seed: u64, prompt_index: usize) -> u64 {
    Stream::new(init_seed)
        .with_label("bench.trial")
        .with_index(prompt_index as u64)
        .u64_at(0)
}

fn trial_init(init_seed: u64, prompt_index: usize, trial: usize, base: u32) -> InitPolicy {
    let seed = Stream::new(init_seed)
        .with_label("bench.init")
        .with_index(prompt_index as u64)
        .u64_at(trial as u64);
    InitPolicy::SeededUniformActionBlock {
        seed,
        action_token_base: base,
    }
}

#[allow(clippy::too_many_arguments)]
fn record_trial(
    mode: DecodeMode,
    horizon: usize,
    prompt_index: usize,
    seed: u64,
    trial: usize,
    codec: &CodecConfig,
    outcome: &DecodeOutcome,
    wall_nanos: u64,
    matched_oracle: Option<bool>,
) -> TrialRecord {
    TrialRecord {
        mode,
        horizon,
        prompt_index,
        seed,
        trial,
        total_length: outcome.trace.total_length,
        chunk_size: codec.chunk_size,
        passes_total: outcome.trace.passes_total,
        passes_changing: outcome.trace.passes_changing,
        wall_nanos,
        converged: outcome.trace.converged,
        matched_oracle,
        chunk_valid: decode_chunk(&outcome.tokens, codec).is_ok(),
        mean_fixed_tokens_at_first_pass: outcome.trace.mean_fixed_first_pass(),
        mean_fixed_tokens_pre_convergence: outcome.trace.mean_fixed_pre_convergence(),
    }
}

/// Run the full grid and aggregate a report.
///
/// For each cell, every prompt gets `warmup` unmeasured decodes and `trials`
/// measured ones, sequentially, on a monotonic clock. AR outputs are
/// computed once per prompt and cached as the oracle; any causal-mode
/// mismatch or trace-invariant violation aborts the run.
pub fn run_grid<M: LogitModel>(
    model: &M,
    prompts: &[TokenSequence],
    codec: &CodecConfig,
    params: &GridParams,
) -> Result<BenchReport, BenchError> {
    let cells = collect_cells(model, prompts, codec, params)?;
    let total_length = codec.response_length();

    let ar_cell = cells.iter().find(|(mode, _, _)| *mode == DecodeMode::Ar);
    let ar_passes_mean =
        ar_cell.map(|(_, _, records)| mean(records.iter().map(|r| r.passes_total as f64)));
    let ar_wall_median = ar_cell.map(|(_, _, records)| {
        Summary::from_values(
            &records
                .iter()
                .map(|r| r.wall_nanos as f64)
                .collect::<Vec<_>>(),
        )
        .median
    });

    let mut reports = Vec::with_capacity(cells.len());
    for (mode, horizon, records) in &cells {
        reports.push(aggregate_cell(
            *mode,
            *horizon,
            total_length,
            records,
            ar_passes_mean,
            ar_wall_median,
        ));
    }

    let trend = build_trend(&reports);
    Ok(BenchReport {
        schema_version: REPORT_SCHEMA_VERSION,
        model: model.identity(),
        codec: codec.clone(),
        grid: GridMeta {
            prompt_count: prompts.len(),
            prompt_fingerprint: prompt_fingerprint(prompts),
            params: params.clone(),
        },
        cells: reports,
        trend,
    })
}

type CellRecords = (DecodeMode, Option<usize>, Vec<TrialRecord>);

fn collect_cells<M: LogitModel>(
    model: &M,
    prompts: &[TokenSequence],
    codec: &CodecConfig,
    params: &GridParams,
) -> Result<Vec<CellRecords>, BenchError> {
    if prompts.is_empty() {
        return Err(BenchError::Config("prompt set must be nonempty".into()));
    }
    if params.trials == 0 {
        return Err(BenchError::Config("trials must be at least 1".into()));
    }
    let total_length = codec.response_length();
    for &h in &params.horizons {
        if h == 0 || h > total_length {
            return Err(BenchError::Config(format!(
                "horizon {h} must satisfy 1 <= horizon <= response length {total_length}"
            )));
        }
    }
    if params.modes.is_empty() {
        return Err(BenchError::Config("at least one mode is required".into()));
    }

    // Oracle cache: one greedy AR output per prompt, computed unmeasured.
    let needs_oracle = params
        .modes
        .iter()
        .any(|m| matches!(m, DecodeMode::Ar | DecodeMode::JacobiCausal));
    let mut oracle: Vec<TokenSequence> = Vec::new();
    if needs_oracle {
        for prompt in prompts {
            oracle.push(decode_ar(model, prompt, total_length)?.tokens);
        }
    }

    let mut cells: Vec<CellRecords> = Vec::new();
    for &mode in &params.modes {
        let horizons: Vec<Option<usize>> = match mode {
            DecodeMode::Ar => vec![None],
            _ => params.horizons.iter().copied().map(Some).collect(),
        };
        for horizon in horizons {
            let records = run_cell(model, prompts, codec, params, mode, horizon, &oracle)?;
            cells.push((mode, horizon, records));
        }
    }
    Ok(cells)
}

fn run_cell<M: LogitModel>(
    model: &M,
    prompts: &[TokenSequence],
    codec: &CodecConfig,
    params: &GridParams,
    mode: DecodeMode,
    horizon: Option<usize>,
    oracle: &[TokenSequence],
) -> Result<Vec<TrialRecord>, BenchError> {
    let total_length = codec.response_length();
    let n = horizon.unwrap_or(total_length);
    let mut records = Vec::with_capacity(prompts.len() * params.trials);

    for (prompt_index, prompt) in prompts.iter().enumerate() {
        let seed = derived_prompt_seed(params.init_seed, prompt_index);
        for warm in 0..params.warmup {
            let _ = run_one(model, prompt, codec, params, mode, n, prompt_index, warm)?;
        }
        for trial in 0..params.trials {
            let started = Instant::now();
            let outcome = run_one(model, prompt, codec, params, mode, n, prompt_index, trial)?;
            let wall_nanos = started.elapsed().as_nanos() as u64;

            let matched_oracle = match (mode, &outcome) {
                (DecodeMode::JacobiCausal, Ok(out)) => {
                    let matches = out.tokens == oracle[prompt_index];
                    if !matches {
                        let first_diff = out
                            .tokens
                            .iter()
                            .zip(&oracle[prompt_index])
                            .position(|(a, b)| a != b)
                            .unwrap_or(0);
                        return Err(BenchError::OracleMismatch {
                            prompt_index,
                            seed,
                            horizon: n,
                            first_diff,
                            expected: oracle[prompt_index].clone(),
                            actual: out.tokens.clone(),
                        });
                    }
                    Some(true)
                }
                (DecodeMode::Ar, Ok(out)) => {
                    if out.tokens != oracle[prompt_index] {
                        return Err(BenchError::TraceInvariant(format!(
                            "AR decode of prompt {prompt_index} is not reproducible"
                        )));
                    }
                    None
                }
                _ => None,
            };

            let record = match outcome {
                Ok(out) => {
                    if mode.is_causal() {
                        out.trace
                            .check_causal_invariants()
                            .map_err(BenchError::TraceInvariant)?;
                    }
                    record_trial(
                        mode,
                        n,
                        prompt_index,
                        seed,
                        trial,
                        codec,
                        &out,
                        wall_nanos,
                        matched_oracle,
                    )
                }
                Err(failed) => {
                    // Bidirectional nonconvergence and cycles are data, not
                    // aborts: record the trial from the carried trace.
                    let trace = failed.trace().expect("failure carries trace");
                    TrialRecord {
                        mode,
                        horizon: n,
                        prompt_index,
                        seed,
                        trial,
                        total_length,
                        chunk_size: codec.chunk_size,
                        passes_total: trace.passes_total,
                        passes_changing: trace.passes_changing,
                        wall_nanos,
                        converged: false,
                        matched_oracle: None,
                        chunk_valid: false,
                        mean_fixed_tokens_at_first_pass: trace.mean_fixed_first_pass(),
                        mean_fixed_tokens_pre_convergence: trace.mean_fixed_pre_convergence(),
                    }
                }
            };
            records.push(record);
        }
    }
    Ok(records)
}

type TrialOutcome = Result<DecodeOutcome, DecodeError>;

#[allow(clippy::too_many_arguments)]
fn run_one<M: LogitModel>(
    model: &M,
    prompt: &[u32],
    codec: &CodecConfig,
    params: &GridParams,
    mode: DecodeMode,
    horizon: usize,
    prompt_index: usize,
    trial: usize,
) -> Result<TrialOutcome, BenchError> {
    let total_length = codec.response_length();
    if mode == DecodeMode::Ar {
        return Ok(Ok(decode_ar(model, prompt, total_length)?));
    }
    let cfg = DecoderConfig::new(
        mode,
        horizon,
        total_length,
        trial_init(
            params.init_seed,
            prompt_index,
            trial,
            codec.action_token_base,
        ),
    );
    match decode(model, prompt, &cfg) {
        Ok(out) => Ok(Ok(out)),
        Err(err @ (DecodeError::NonConvergence { .. } | DecodeError::CycleDetected { .. }))
            if mode == DecodeMode::JacobiBidirectional =>
        {
            Ok(Err(err))
        }
        Err(other) => Err(other.into()),
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

fn aggregate_cell(
    mode: DecodeMode,
    horizon: Option<usize>,
    total_length: usize,
    records: &[TrialRecord],
    ar_passes_mean: Option<f64>,
    ar_wall_median: Option<f64>,
) -> CellReport {
    let tps: Vec<f64> = records.iter().map(TrialRecord::tokens_per_second).collect();
    let hz: Vec<f64> = records.iter().map(TrialRecord::frequency_hz).collect();
    let wall: Vec<f64> = records.iter().map(|r| r.wall_nanos as f64).collect();
    let wall_summary = Summary::from_values(&wall);
    let passes_mean = mean(records.iter().map(|r| r.passes_total as f64));
    let oracle_match_rate = if mode == DecodeMode::JacobiCausal {
        Some(mean(records.iter().map(|r| {
            if r.matched_oracle == Some(true) {
                1.0
            } else {
                0.0
            }
        })))
    } else {
        None
    };
    CellReport {
        mode,
        horizon,
        total_length,
        trials: records.len(),
        converged_rate: mean(records.iter().map(|r| if r.converged { 1.0 } else { 0.0 })),
        oracle_match_rate,
        chunk_valid_rate: mean(
            records
                .iter()
                .map(|r| if r.chunk_valid { 1.0 } else { 0.0 }),
        ),
        passes_mean,
        passes_min: records.iter().map(|r| r.passes_total).min().unwrap_or(0),
        passes_max: records.iter().map(|r| r.passes_total).max().unwrap_or(0),
        passes_per_token_mean: passes_mean / total_length as f64,
        fixed_tokens_at_first_pass_mean: mean(
            records.iter().map(|r| r.mean_fixed_tokens_at_first_pass),
        ),
        fixed_tokens_pre_convergence_mean: mean(
            records.iter().map(|r| r.mean_fixed_tokens_pre_convergence),
        ),
        pass_reduction_vs_ar: match (mode, ar_passes_mean) {
            (DecodeMode::Ar, _) | (_, None) => None,
            (_, Some(ar)) => Some(ar / passes_mean),
        },
        timing: CellTiming {
            tokens_per_second: Summary::from_values(&tps),
            frequency_hz: Summary::from_values(&hz),
            wall_nanos_median: wall_summary.median,
            wall_speedup_vs_ar: match (mode, ar_wall_median) {
                (DecodeMode::Ar, _) | (_, None) => None,
                (_, Some(ar)) => Some(ar / wall_summary.median),
            },
        },
    }
}

fn build_trend(cells: &[CellReport]) -> Option<TrendReport> {
    let mut causal: Vec<&CellReport> = cells
        .iter()
        .filter(|c| c.mode == DecodeMode::JacobiCausal && c.horizon.is_some())
        .collect();
    if causal.len() < 2 {
        return None;
    }
    causal.sort_by_key(|c| c.horizon.expect("filtered"));
    let horizons: Vec<usize> = causal
        .iter()
        .map(|c| c.horizon.expect("filtered"))
        .collect();
    let fixed: Vec<f64> = causal
        .iter()
        .map(|c| c.fixed_tokens_pre_convergence_mean)
        .collect();
    let ppt: Vec<f64> = causal.iter().map(|c| c.passes_per_token_mean).collect();
    Some(TrendReport {
        horizons,
        fixed_tokens_trend_non_decreasing: fixed.windows(2).all(|w| w[1] >= w[0]),
        fixed_tokens_pre_convergence: fixed,
        passes_per_token_inversion: !ppt.windows(2).all(|w| w[1] <= w[0]),
        passes_per_token: ppt,
    })
}

/// One oracle-equivalence failure.
#[derive(Debug, Clone, Serialize)]
pub struct OracleMismatchRecord {
    pub prompt_index: usize,
    pub seed: u64,
    pub horizon: usize,
    pub init_variant: usize,
    pub first_diff: usize,
    pub expected: TokenSequence,
    pub actual: TokenSequence,
}

/// Outcome of an exhaustive equivalence sweep.
#[derive(Debug, Clone, Serialize)]
pub struct OracleVerification {
    pub trials_run: usize,
    /// Output disagreements; data, not exceptions.
    pub mismatches: Vec<OracleMismatchRecord>,
    /// Prefix-fixing or pass-bound violations found on any trace.
    pub trace_violations: Vec<String>,
}

impl OracleVerification {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty() && self.trace_violations.is_empty()
    }
}

/// Sweep every `(prompt, horizon, init variant)` combination in causal
/// Jacobi mode and compare against greedy AR token-for-token. Variant 0
/// initializes with a constant token, the rest with distinct seeded
/// action-block draws, which doubles as an init-independence check.
///
/// Prompts are verified on parallel workers (each worker owns its decodes;
/// the model is shared read-only); results are merged in prompt order, so
/// the outcome is deterministic.
///
/// Refuses bidirectional mode: there is no guarantee to verify.
pub fn verify_oracle<M: LogitModel + Sync>(
    model: &M,
    prompts: &[TokenSequence],
    horizons: &[usize],
    init_variants: usize,
    mode: DecodeMode,
    codec: &CodecConfig,
) -> Result<OracleVerification, BenchError> {
    if mode != DecodeMode::JacobiCausal {
        return Err(BenchError::NoOracleForMode);
    }
    if init_variants == 0 {
        return Err(BenchError::Config(
            "init_variants must be at least 1".into(),
        ));
    }
    let total_length = codec.response_length();

    let per_prompt: Result<Vec<OracleVerification>, BenchError> = prompts
        .par_iter()
        .enumerate()
        .map(|(prompt_index, prompt)| {
            let mut partial = OracleVerification {
                trials_run: 0,
                mismatches: Vec::new(),
                trace_violations: Vec::new(),
            };
            let seed = derived_prompt_seed(0, prompt_index);
            let ar = decode_ar(model, prompt, total_length)?;
            for &horizon in horizons {
                for variant in 0..init_variants {
                    let init = if variant == 0 {
                        InitPolicy::ConstantToken {
                            token: codec.action_token_base,
                        }
                    } else {
                        trial_init(0xfeed, prompt_index, variant, codec.action_token_base)
                    };
                    let cfg =
                        DecoderConfig::new(DecodeMode::JacobiCausal, horizon, total_length, init);
                    let out = decode(model, prompt, &cfg)?;
                    partial.trials_run += 1;
                    if out.tokens != ar.tokens {
                        let first_diff = out
                            .tokens
                            .iter()
                            .zip(&ar.tokens)
                            .position(|(a, b)| a != b)
                            .unwrap_or(0);
                        partial.mismatches.push(OracleMismatchRecord {
                            prompt_index,
                            seed,
                            horizon,
                            init_variant: variant,
                            first_diff,
                            expected: ar.tokens.clone(),
                            actual: out.tokens.clone(),
                        });
                    }
                    if let Err(violation) = out.trace.check_causal_invariants() {
                        partial.trace_violations.push(format!(
                            "prompt {prompt_index} horizon {horizon} variant {variant}: {violation}"
                        ));
                    }
                }
            }
            Ok(partial)
        })
        .collect();

    let mut verification = OracleVerification {
        trials_run: 0,
        mismatches: Vec::new(),
        trace_violations: Vec::new(),
    };
    for partial in per_prompt? {
        verification.trials_run += partial.trials_run;
        verification.mismatches.extend(partial.mismatches);
        verification
            .trace_violations
            .extend(partial.trace_violations);
    }
    Ok(verification)
}
