//! Acceptance suite. Each criterion prints one PASS/FAIL line (run with
//! `cargo test -p pardec-cli --test acceptance -- --nocapture` to see them)
//! and fails the test if violated.
//!
//! 1. Oracle equivalence: 1000 seeded prompts x horizons {7,16,37}, causal
//!    Jacobi/blocked output equals greedy AR token-for-token, 0 mismatches.
//! 2. Prefix-fixing and pass bounds on every trace from criterion 1.
//! 3. Constructed speedup witness: the zero-weight model converges in
//!    exactly 2 passes at n = l = 37, an exact 18.5x pass reduction.
//! 4. Fixed-token trend on the pinned prompt set from
//!    configs/trend_pinned.toml.
//! 5. Codec: exhaustive bin bijection, 1e5-sample round-trip fuzz within
//!    half a bin width, framing for m in 1..=16.
//! 6. Bidirectional safety over 200 seeded trials: certified fixed point or
//!    a reported failure with a complete trace, within the 4n pass cap.
//! 7. Determinism: bit-identical bench reports modulo timing fields and
//!    checksum-identical weight files across runs.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use pardec_core::bench::{run_grid, seeded_prompts, verify_oracle, GridParams};
use pardec_core::codec::{
    decode_chunk, encode_chunk, fuzz_roundtrip, ActionChunk, ActionVector, CodecConfig, N_BINS,
};
use pardec_core::decoder::{
    decode_ar, decode_jacobi, verify_fixed_point, DecodeMode, DecoderConfig, InitPolicy,
};
use pardec_core::error::DecodeError;
use pardec_core::model::{ModelSpec, ToyModel};
use pardec_core::rng::Stream;

const ORACLE_PROMPT_SEED: u64 = 0xA11CE;
const ORACLE_PROMPT_COUNT: usize = 1000;
const PROMPT_LEN: usize = 16;
const HORIZONS: [usize; 3] = [7, 16, 37];

fn report(criterion: usize, name: &str, pass: bool, detail: &str) {
    println!(
        "CRITERION {criterion} ({name}): {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} ({name}) failed: {detail}");
}

fn default_model() -> ToyModel {
    ToyModel::build(ModelSpec::default()).expect("default spec is valid")
}

fn default_codec() -> CodecConfig {
    CodecConfig::for_vocab(512).expect("default codec is valid")
}

/// Criteria 1 and 2 share one sweep: `verify_oracle` compares every decode
/// against greedy AR and validates every trace's prefix-fixing and pass
/// bounds as it goes.
#[test]
fn criterion_1_and_2_oracle_equivalence_and_prefix_fixing() {
    let model = default_model();
    let codec = default_codec();
    let prompts = seeded_prompts(
        ORACLE_PROMPT_COUNT,
        PROMPT_LEN,
        ORACLE_PROMPT_SEED,
        codec.action_token_base,
    );

    let started = Instant::now();
    let verification = verify_oracle(
        &model,
        &prompts,
        &HORIZONS,
        1,
        DecodeMode::JacobiCausal,
        &codec,
    )
    .expect("sweep must not error");
    let elapsed = started.elapsed();

    report(
        1,
        "oracle equivalence",
        verification.mismatches.is_empty()
            && verification.trials_run == ORACLE_PROMPT_COUNT * HORIZONS.len(),
        &format!(
            "{} trials over {} prompts x horizons {:?}, {} mismatches, {:.1?}",
            verification.trials_run,
            ORACLE_PROMPT_COUNT,
            HORIZONS,
            verification.mismatches.len(),
            elapsed
        ),
    );
    report(
        2,
        "prefix-fixing and pass bounds",
        verification.trace_violations.is_empty(),
        &format!(
            "{} traces checked, {} violations",
            verification.trials_run,
            verification.trace_violations.len()
        ),
    );
}

/// The zero-weight model scores every token equally, so greedy argmax emits
/// token 0 everywhere and one Jacobi pass writes the full answer; the second
/// pass certifies it. AR still pays 37 passes.
#[test]
fn criterion_3_constructed_speedup_witness() {
    let model = ToyModel::constant(ModelSpec::default(), 0.0).expect("valid spec");
    let codec = default_codec();
    let prompt = seeded_prompts(1, PROMPT_LEN, 7, codec.action_token_base).remove(0);

    let ar = decode_ar(&model, &prompt, 37).expect("ar decode");
    let cfg = DecoderConfig::new(
        DecodeMode::JacobiCausal,
        37,
        37,
        InitPolicy::SeededUniformActionBlock {
            seed: 1,
            action_token_base: 256,
        },
    );
    let jacobi = decode_jacobi(&model, &prompt, &cfg).expect("jacobi decode");

    let exact = ar.trace.passes_total == 37
        && jacobi.trace.passes_total == 2
        && jacobi.tokens == vec![0u32; 37]
        && ar.tokens == jacobi.tokens;
    let ratio = ar.trace.passes_total as f64 / jacobi.trace.passes_total as f64;

    // Same numbers through the grid aggregation path.
    let prompts = seeded_prompts(2, PROMPT_LEN, 7, codec.action_token_base);
    let params = GridParams {
        modes: vec![DecodeMode::Ar, DecodeMode::JacobiCausal],
        horizons: vec![37],
        trials: 1,
        warmup: 0,
        init_seed: 1,
        prompt_seed: Some(7),
        prompt_len: Some(PROMPT_LEN),
    };
    let grid = run_grid(&model, &prompts, &codec, &params).expect("grid");
    let cell = grid
        .cells
        .iter()
        .find(|c| c.mode == DecodeMode::JacobiCausal)
        .expect("jacobi cell exists");

    report(
        3,
        "constructed speedup witness",
        exact && ratio == 18.5 && cell.pass_reduction_vs_ar == Some(18.5),
        &format!(
            "AR {} passes, Jacobi {} passes, reduction {ratio}x (grid: {:?})",
            ar.trace.passes_total, jacobi.trace.passes_total, cell.pass_reduction_vs_ar
        ),
    );
}

fn pinned_trend_params() -> (u64, u64, usize) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/trend_pinned.toml");
    let text = std::fs::read_to_string(&path).expect("pinned trend config exists in the repo");
    let value: toml::Value = toml::from_str(&text).expect("pinned config parses");
    let bench = &value["bench"];
    (
        bench["prompt_seed"].as_integer().expect("prompt_seed") as u64,
        bench["init_seed"].as_integer().expect("init_seed") as u64,
        bench["prompt_count"].as_integer().expect("prompt_count") as usize,
    )
}

/// The trend is asserted on the repo-pinned prompt set and reported (not
/// asserted) on a fresh seed.
#[test]
fn criterion_4_fixed_token_trend() {
    let model = default_model();
    let codec = default_codec();
    let (prompt_seed, init_seed, prompt_count) = pinned_trend_params();

    let run = |seed: u64, init: u64| {
        let prompts = seeded_prompts(prompt_count, PROMPT_LEN, seed, codec.action_token_base);
        let params = GridParams {
            modes: vec![DecodeMode::Ar, DecodeMode::JacobiCausal],
            horizons: HORIZONS.to_vec(),
            trials: 1,
            warmup: 0,
            init_seed: init,
            prompt_seed: Some(seed),
            prompt_len: Some(PROMPT_LEN),
        };
        run_grid(&model, &prompts, &codec, &params)
            .expect("grid")
            .trend
            .expect("3 causal cells")
    };

    let pinned = run(prompt_seed, init_seed);
    let ppt_consistent = pinned.passes_per_token_inversion
        != pinned.passes_per_token.windows(2).all(|w| w[1] <= w[0]);

    report(
        4,
        "fixed-token trend",
        pinned.fixed_tokens_trend_non_decreasing && ppt_consistent,
        &format!(
            "pinned set (seed {prompt_seed}, {prompt_count} prompts): fixed@conv-1 {:?} over horizons {:?}; passes/token {:?}, inversion flagged: {}",
            pinned.fixed_tokens_pre_convergence,
            pinned.horizons,
            pinned.passes_per_token,
            pinned.passes_per_token_inversion
        ),
    );

    let fresh = run(0xF4E5, 0xF4E6);
    println!(
        "  (reported, fresh seed 0xF4E5: fixed@conv-1 {:?}, non-decreasing: {})",
        fresh.fixed_tokens_pre_convergence, fresh.fixed_tokens_trend_non_decreasing
    );
}

#[test]
fn criterion_5_codec() {
    let codec = default_codec();

    let fuzz = fuzz_roundtrip(100_000, 0xC0DEC, &codec);
    let bijection_ok = fuzz.bijection_cases == 7 * N_BINS && fuzz.failures == 0;

    let mut framing_ok = true;
    for m in 1..=16usize {
        let mut c = codec.clone();
        c.chunk_size = m;
        let chunk = ActionChunk::new(vec![ActionVector::from_array([0.1; 7]); m]);
        let tokens = encode_chunk(&chunk, &c).expect("encode");
        framing_ok &= tokens.len() == 7 * m + 2
            && tokens[0] == c.begin_token
            && *tokens.last().expect("nonempty") == c.end_token
            && decode_chunk(&tokens, &c).is_ok();
    }

    report(
        5,
        "codec",
        fuzz.passed() && bijection_ok && framing_ok,
        &format!(
            "bijection {}/{} cases, fuzz max error {:?} vs bound {:?}, framing m=1..=16 ok: {framing_ok}",
            fuzz.bijection_cases,
            7 * N_BINS,
            fuzz.max_abs_error,
            fuzz.error_bound
        ),
    );
}

/// 200 seeded bidirectional runs at n = l = 37. Every run must either
/// return a fixed point that survives an explicit extra update pass, or
/// error out with a complete trace, all within the 4n pass cap.
#[test]
fn criterion_6_bidirectional_safety() {
    let codec = default_codec();
    let model = default_model();
    let n = codec.response_length();
    let cap = 4 * n;

    let mut certified = 0usize;
    let mut reported_failures = 0usize;
    let mut bad = Vec::new();

    for trial in 0..200u64 {
        let prompt_seed = Stream::new(0xB1D1).u64_at(trial);
        let prompt = seeded_prompts(1, PROMPT_LEN, prompt_seed, codec.action_token_base).remove(0);
        let cfg = DecoderConfig::new(
            DecodeMode::JacobiBidirectional,
            n,
            n,
            InitPolicy::SeededUniformActionBlock {
                seed: trial,
                action_token_base: codec.action_token_base,
            },
        );
        assert_eq!(cfg.effective_max_passes(), cap);
        match decode_jacobi(&model, &prompt, &cfg) {
            Ok(out) => {
                let cert = verify_fixed_point(&model, &prompt, &out.tokens, &cfg).expect("forward");
                if cert && out.trace.converged && out.trace.passes_total <= cap {
                    certified += 1;
                } else {
                    bad.push(format!("trial {trial}: uncertified fixed point"));
                }
            }
            Err(err @ (DecodeError::NonConvergence { .. } | DecodeError::CycleDetected { .. })) => {
                let trace = err.trace().expect("failure carries trace");
                let complete = !trace.converged
                    && trace.passes_total <= cap
                    && trace.iterates.len() == trace.passes_total + 1
                    && trace.changed_positions.len() == trace.passes_total;
                if complete {
                    reported_failures += 1;
                } else {
                    bad.push(format!("trial {trial}: incomplete failure trace"));
                }
            }
            Err(other) => bad.push(format!("trial {trial}: unexpected error {other}")),
        }
    }

    report(
        6,
        "bidirectional safety",
        bad.is_empty() && certified + reported_failures == 200,
        &format!(
            "200 trials: {certified} certified fixed points, {reported_failures} reported failures, {} anomalies",
            bad.len()
        ),
    );
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_pardec")
}

fn run_cli(args: &[&str]) -> std::process::Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("binary runs")
}

fn bench_to(dir: &Path, model: &Path, name: &str) -> PathBuf {
    let out = dir.join(name);
    let status = run_cli(&[
        "bench",
        "--model",
        model.to_str().expect("utf8"),
        "--out",
        out.to_str().expect("utf8"),
        "--trials",
        "2",
        "--warmup",
        "1",
        "--prompt-count",
        "2",
    ]);
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    out
}

fn strip_timing(value: &mut serde_json::Value) {
    if let Some(cells) = value.get_mut("cells").and_then(|c| c.as_array_mut()) {
        for cell in cells {
            if let Some(obj) = cell.as_object_mut() {
                obj.remove("timing");
            }
        }
    }
}

/// Two bench runs with the same config must agree on every non-timing byte;
/// two init-model runs must produce checksum-identical weight files.
#[test]
fn criterion_7_determinism() {
    let dir = tempfile::tempdir().expect("tempdir");
    let model_a = dir.path().join("a.bin");
    let model_b = dir.path().join("b.bin");
    for path in [&model_a, &model_b] {
        let out = run_cli(&["init-model", "--out", path.to_str().expect("utf8")]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let weights_identical =
        std::fs::read(&model_a).expect("read a") == std::fs::read(&model_b).expect("read b");

    let report_a = bench_to(dir.path(), &model_a, "report_a.json");
    let report_b = bench_to(dir.path(), &model_a, "report_b.json");
    let mut doc_a: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_a).expect("read")).expect("json");
    let mut doc_b: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_b).expect("read")).expect("json");
    let timed_fields_differ_somewhere = doc_a != doc_b;
    strip_timing(&mut doc_a);
    strip_timing(&mut doc_b);
    let reports_identical = doc_a == doc_b;

    report(
        7,
        "determinism",
        weights_identical && reports_identical,
        &format!(
            "weight files identical: {weights_identical}; reports identical modulo timing: {reports_identical} (timing fields varied: {timed_fields_differ_somewhere})"
        ),
    );
}
