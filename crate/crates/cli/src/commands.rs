//! Subcommand implementations.

use std::path::{Path, PathBuf};

use serde::Serialize;

use pardec_core::bench::{run_grid, seeded_prompts, verify_oracle, GridParams};
use pardec_core::codec::{decode_chunk, fuzz_roundtrip};
use pardec_core::decoder::{decode, DecodeMode, DecodeTrace, DecoderConfig, InitPolicy};
use pardec_core::error::DecodeError;
use pardec_core::model::{ModelSpec, ToyModel};

use crate::config::RunConfig;
use crate::CliError;

/// Build the model from the config and write the weight container plus its
/// manifest. Validation runs before any file is touched.
pub fn init_model(
    config: &RunConfig,
    out: &Path,
    seed_override: Option<u64>,
) -> Result<(), CliError> {
    let mut spec = config.model.clone();
    if let Some(seed) = seed_override {
        spec.seed = seed;
    }
    config.resolve_codec()?;
    let model = build_model(spec)?;
    let manifest = model
        .save(out)
        .map_err(|e| CliError::Io(format!("writing {}: {e}", out.display())))?;
    println!("wrote {}", out.display());
    println!("weights sha256 {}", manifest.weights_sha256);
    println!("file bytes {}", manifest.file_bytes);
    Ok(())
}

fn build_model(spec: ModelSpec) -> Result<ToyModel, CliError> {
    ToyModel::build(spec).map_err(|e| CliError::Validation(e.to_string()))
}

fn load_model(path: &Path) -> Result<ToyModel, CliError> {
    ToyModel::load(path).map_err(|e| CliError::Io(format!("loading {}: {e}", path.display())))
}

/// What `decode` prints on stdout. Mode-independent on purpose: for any two
/// causal decoders the whole document is byte-identical exactly when the
/// token sequences agree.
#[derive(Serialize)]
struct DecodeStdout {
    tokens: Vec<u32>,
    /// Rows of 7 action values when the tokens parse as a chunk.
    chunk: Option<Vec<[f64; 7]>>,
    codec_error: Option<CodecErrorReport>,
}

#[derive(Serialize)]
struct CodecErrorReport {
    message: String,
    /// Index into the token sequence for alien-token errors.
    position: Option<usize>,
}

/// Versioned trace dump; iterates are large and only included on request.
#[derive(Serialize)]
struct TraceDump<'a> {
    schema_version: u32,
    mode: DecodeMode,
    horizon: usize,
    total_length: usize,
    passes_total: usize,
    passes_changing: usize,
    converged: bool,
    block_boundaries: &'a [(usize, usize)],
    changed_positions: &'a [Vec<usize>],
    fixed_token_counts: &'a [usize],
    block_stats: &'a [pardec_core::decoder::BlockStats],
    #[serde(skip_serializing_if = "Option::is_none")]
    iterates: Option<&'a [Vec<u32>]>,
}

fn dump_trace(path: &Path, trace: &DecodeTrace, include_iterates: bool) -> Result<(), CliError> {
    let dump = TraceDump {
        schema_version: 1,
        mode: trace.mode,
        horizon: trace.horizon,
        total_length: trace.total_length,
        passes_total: trace.passes_total,
        passes_changing: trace.passes_changing,
        converged: trace.converged,
        block_boundaries: &trace.block_boundaries,
        changed_positions: &trace.changed_positions,
        fixed_token_counts: &trace.fixed_token_counts,
        block_stats: &trace.block_stats,
        iterates: include_iterates.then_some(trace.iterates.as_slice()),
    };
    let json = serde_json::to_string_pretty(&dump).expect("trace serialization is infallible");
    std::fs::write(path, json).map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))
}

pub struct DecodeArgs {
    pub model_path: PathBuf,
    pub mode: Option<DecodeMode>,
    pub horizon: Option<usize>,
    pub prompt_seed: u64,
    pub prompt_len: Option<usize>,
    pub init_seed: Option<u64>,
    pub max_passes: Option<usize>,
    pub trace: Option<PathBuf>,
    pub include_iterates: bool,
}

/// One-shot decode: synthesize the seeded prompt, run the configured
/// decoder, print the chunk document on stdout and pass counts on stderr.
pub fn decode_cmd(config: &RunConfig, args: &DecodeArgs) -> Result<(), CliError> {
    let codec = config.resolve_codec()?;
    let model = load_model(&args.model_path)?;
    require_model_match(&model, config)?;

    let total_length = codec.response_length();
    let mode = args.mode.unwrap_or(config.decoder.mode);
    let horizon = match args.horizon.or(config.decoder.horizon) {
        Some(h) => h,
        None => total_length,
    };
    let prompt_len = args.prompt_len.unwrap_or(config.bench.prompt_len);
    if prompt_len == 0 {
        return Err(CliError::Usage("prompt length must be at least 1".into()));
    }
    let prompt = seeded_prompts(1, prompt_len, args.prompt_seed, codec.action_token_base).remove(0);

    let init = match config.decoder.constant_init_token {
        Some(token) => InitPolicy::ConstantToken { token },
        None => InitPolicy::SeededUniformActionBlock {
            seed: args.init_seed.unwrap_or(config.decoder.init_seed),
            action_token_base: codec.action_token_base,
        },
    };
    let mut cfg = DecoderConfig::new(mode, horizon, total_length, init);
    cfg.max_passes = args.max_passes.or(config.decoder.max_passes);

    let outcome = match decode(&model, &prompt, &cfg) {
        Ok(out) => out,
        Err(err @ (DecodeError::NonConvergence { .. } | DecodeError::CycleDetected { .. })) => {
            let trace = err.trace().expect("failure carries the full trace");
            eprintln!("decode failed: {err}");
            eprintln!(
                "passes {} (changing {}), converged false",
                trace.passes_total, trace.passes_changing
            );
            if let Some(path) = &args.trace {
                dump_trace(path, trace, args.include_iterates)?;
                eprintln!("trace written to {}", path.display());
            }
            return Err(CliError::NonConvergence(err.to_string()));
        }
        Err(other) => return Err(CliError::Validation(other.to_string())),
    };

    if let Some(path) = &args.trace {
        dump_trace(path, &outcome.trace, args.include_iterates)?;
        eprintln!("trace written to {}", path.display());
    }
    eprintln!(
        "mode {mode} horizon {horizon}: passes {} (changing {}), converged {}",
        outcome.trace.passes_total, outcome.trace.passes_changing, outcome.trace.converged
    );

    let parse = decode_chunk(&outcome.tokens, &codec);
    let stdout_doc = DecodeStdout {
        tokens: outcome.tokens.clone(),
        chunk: parse.as_ref().ok().map(|c| c.to_rows()),
        codec_error: parse.as_ref().err().map(|e| CodecErrorReport {
            message: e.to_string(),
            position: match e {
                pardec_core::error::CodecError::AlienToken { position, .. } => Some(*position),
                _ => None,
            },
        }),
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&stdout_doc).expect("infallible")
    );

    match parse {
        Ok(_) => Ok(()),
        Err(e) => Err(CliError::Codec(e.to_string())),
    }
}

// A weight file from one spec with a config describing another is almost
// always an operator error; refuse rather than guess.
fn require_model_match(model: &ToyModel, config: &RunConfig) -> Result<(), CliError> {
    if model.spec().vocab_size != config.model.vocab_size
        || model.spec().max_seq != config.model.max_seq
    {
        return Err(CliError::Validation(format!(
            "weight file spec (vocab {}, max_seq {}) does not match config (vocab {}, max_seq {})",
            model.spec().vocab_size,
            model.spec().max_seq,
            config.model.vocab_size,
            config.model.max_seq
        )));
    }
    Ok(())
}

pub struct VerifyArgs {
    pub model_path: PathBuf,
    pub trials: usize,
    pub horizons: Option<Vec<usize>>,
    pub init_variants: usize,
    pub prompt_seed: Option<u64>,
    pub prompt_len: Option<usize>,
}

/// Exhaustive oracle-equivalence sweep; exit 0 only on zero mismatches and
/// zero trace violations.
pub fn verify_cmd(config: &RunConfig, args: &VerifyArgs) -> Result<(), CliError> {
    if args.trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    if args.init_variants == 0 {
        return Err(CliError::Usage("--init-variants must be at least 1".into()));
    }
    let codec = config.resolve_codec()?;
    let model = load_model(&args.model_path)?;
    require_model_match(&model, config)?;

    let horizons = args
        .horizons
        .clone()
        .unwrap_or_else(|| config.bench.horizons.clone());
    let prompt_len = args.prompt_len.unwrap_or(config.bench.prompt_len);
    let prompt_seed = args.prompt_seed.unwrap_or(config.bench.prompt_seed);
    let prompts = seeded_prompts(
        args.trials,
        prompt_len,
        prompt_seed,
        codec.action_token_base,
    );

    let verification = verify_oracle(
        &model,
        &prompts,
        &horizons,
        args.init_variants,
        DecodeMode::JacobiCausal,
        &codec,
    )
    .map_err(|e| CliError::Validation(e.to_string()))?;

    println!(
        "verified {} decode trials over {} prompts x horizons {horizons:?} x {} init variants",
        verification.trials_run,
        prompts.len(),
        args.init_variants
    );
    println!("mismatches: {}", verification.mismatches.len());
    println!("trace violations: {}", verification.trace_violations.len());
    if verification.passed() {
        println!("oracle equivalence holds");
        Ok(())
    } else {
        for m in verification.mismatches.iter().take(5) {
            eprintln!(
                "mismatch: prompt {} horizon {} variant {} first diff at slot {}",
                m.prompt_index, m.horizon, m.init_variant, m.first_diff
            );
        }
        for v in verification.trace_violations.iter().take(5) {
            eprintln!("trace violation: {v}");
        }
        Err(CliError::OracleMismatch(format!(
            "{} mismatches, {} trace violations",
            verification.mismatches.len(),
            verification.trace_violations.len()
        )))
    }
}

pub struct BenchArgs {
    pub model_path: PathBuf,
    pub out: Option<PathBuf>,
    pub cells_csv: Option<PathBuf>,
    pub speed_csv: Option<PathBuf>,
    pub trials: Option<usize>,
    pub warmup: Option<usize>,
    pub prompt_count: Option<usize>,
    pub prompt_seed: Option<u64>,
    pub horizons: Option<Vec<usize>>,
    pub modes: Option<Vec<DecodeMode>>,
}

/// Run the experiment grid and write the report (JSON) plus optional CSVs.
pub fn bench_cmd(config: &RunConfig, args: &BenchArgs) -> Result<(), CliError> {
    let codec = config.resolve_codec()?;
    let model = load_model(&args.model_path)?;
    require_model_match(&model, config)?;

    let bench = &config.bench;
    let trials = args.trials.unwrap_or(bench.trials);
    let warmup = args.warmup.unwrap_or(bench.warmup);
    let prompt_count = args.prompt_count.unwrap_or(bench.prompt_count);
    let prompt_seed = args.prompt_seed.unwrap_or(bench.prompt_seed);
    let horizons = args
        .horizons
        .clone()
        .unwrap_or_else(|| bench.horizons.clone());
    let modes = args.modes.clone().unwrap_or_else(|| bench.modes.clone());
    if prompt_count == 0 {
        return Err(CliError::Usage("prompt count must be at least 1".into()));
    }

    let prompts = seeded_prompts(
        prompt_count,
        bench.prompt_len,
        prompt_seed,
        codec.action_token_base,
    );
    let params = GridParams {
        modes,
        horizons,
        trials,
        warmup,
        init_seed: bench.init_seed,
        prompt_seed: Some(prompt_seed),
        prompt_len: Some(bench.prompt_len),
    };

    let report = run_grid(&model, &prompts, &codec, &params).map_err(|e| match e {
        pardec_core::error::BenchError::OracleMismatch { .. }
        | pardec_core::error::BenchError::TraceInvariant(_) => {
            CliError::OracleMismatch(e.to_string())
        }
        other => CliError::Validation(other.to_string()),
    })?;

    for cell in &report.cells {
        let horizon = cell
            .horizon
            .map(|h| h.to_string())
            .unwrap_or_else(|| "-".into());
        eprintln!(
            "cell {} n={}: passes mean {:.2}, fixed@first {:.2}, fixed@conv-1 {:.2}, tps median {:.0}",
            cell.mode,
            horizon,
            cell.passes_mean,
            cell.fixed_tokens_at_first_pass_mean,
            cell.fixed_tokens_pre_convergence_mean,
            cell.timing.tokens_per_second.median,
        );
    }

    let json = report.to_json();
    match &args.out {
        Some(path) => {
            std::fs::write(path, &json)
                .map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))?;
            eprintln!("report written to {}", path.display());
        }
        None => println!("{json}"),
    }
    if let Some(path) = &args.cells_csv {
        std::fs::write(path, report.cells_csv())
            .map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))?;
    }
    if let Some(path) = &args.speed_csv {
        std::fs::write(path, report.speed_csv())
            .map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))?;
    }
    Ok(())
}

/// Randomized and exhaustive codec checks: value round-trips, the 7 x 256
/// bin bijection, and `l = 7m + 2` framing for every chunk size up to 16.
pub fn codec_fuzz_cmd(config: &RunConfig, samples: usize, seed: u64) -> Result<(), CliError> {
    if samples == 0 {
        return Err(CliError::Usage("--samples must be at least 1".into()));
    }
    let codec = config.resolve_codec()?;
    let report = fuzz_roundtrip(samples, seed, &codec);
    println!(
        "round-trip fuzz: {} samples, max error {:?}",
        report.samples, report.max_abs_error
    );
    println!(
        "bin bijection: {} cases, {} failures",
        report.bijection_cases, report.failures
    );

    let mut framing_failures = 0usize;
    for m in 1..=16usize {
        let mut c = codec.clone();
        c.chunk_size = m;
        let chunk = pardec_core::codec::ActionChunk::new(vec![
            pardec_core::codec::ActionVector::from_array([0.25; 7]);
            m
        ]);
        match pardec_core::codec::encode_chunk(&chunk, &c) {
            Ok(tokens)
                if tokens.len() == 7 * m + 2
                    && tokens[0] == c.begin_token
                    && *tokens.last().expect("nonempty") == c.end_token
                    && decode_chunk(&tokens, &c).is_ok() => {}
            _ => framing_failures += 1,
        }
    }
    println!("framing sweep m=1..16: {framing_failures} failures");

    if report.passed() && framing_failures == 0 {
        println!("codec fuzz passed");
        Ok(())
    } else {
        Err(CliError::Codec("codec fuzz found failures".into()))
    }
}
