//! Trace-level guarantees: prefix-fixing, pass bounds, fixed-point
//! certificates, and bidirectional-mode termination behavior.

use pardec_core::decoder::{
    decode, decode_jacobi, fixed_token_count, verify_fixed_point, DecodeMode, DecoderConfig,
    InitPolicy,
};
use pardec_core::error::DecodeError;
use pardec_core::model::{ModelSpec, ToyModel};
use pardec_core::rng::Stream;

fn toy(seed: u64) -> ToyModel {
    ToyModel::build(ModelSpec {
        max_seq: 64,
        seed,
        ..ModelSpec::default()
    })
    .unwrap()
}

fn seeded_prompt(seed: u64, len: usize) -> Vec<u32> {
    let s = Stream::new(seed).with_label("test.prompt");
    (0..len)
        .map(|i| s.bounded_at(i as u64, 256) as u32)
        .collect()
}

fn action_init(seed: u64) -> InitPolicy {
    InitPolicy::SeededUniformActionBlock {
        seed,
        action_token_base: 256,
    }
}

/// Prefix-fixing over 200 seeded causal trials: after pass j, the count of
/// slots matching the final output is at least min(j, l), and the full
/// invariant check passes on every trace.
#[test]
fn prefix_fixing_holds_over_200_seeded_trials() {
    let trials = 200;
    let total_length = 16;
    for trial in 0..trials {
        let model = toy(trial % 5);
        let prompt = seeded_prompt(trial, 1 + (trial as usize % 8));
        let cfg = DecoderConfig::new(
            DecodeMode::JacobiCausal,
            total_length,
            total_length,
            action_init(trial.wrapping_mul(0x9e37)),
        );
        let out = decode_jacobi(&model, &prompt, &cfg).unwrap();
        out.trace
            .check_causal_invariants()
            .unwrap_or_else(|violation| {
                panic!("trial {trial}: {violation}");
            });
        for j in 0..=out.trace.passes_total {
            let count = fixed_token_count(&out.trace, j).unwrap();
            assert!(
                count >= j.min(total_length),
                "trial {trial}: count {count} at pass {j}"
            );
            assert_eq!(count, out.trace.fixed_token_counts[j]);
        }
        assert!(out.trace.passes_changing <= total_length);
        assert!(out.trace.passes_total <= total_length + 1);
    }
}

/// Golden trace values for the pinned seed-42 model; frozen from a reference
/// run. Exercises the fixed-token query at the initialization iterate.
#[test]
fn golden_trace_for_pinned_model() {
    let model = toy(42);
    let codec = pardec_core::CodecConfig::for_vocab(512).unwrap();
    let prompts = pardec_core::seeded_prompts(3, 8, 0xA11CE, codec.action_token_base);
    let expected = [(0usize, 25usize, 24usize), (0, 23, 22), (0, 24, 23)];
    for (prompt, (init_fixed, passes, changing)) in prompts.iter().zip(expected) {
        let cfg = DecoderConfig::new(DecodeMode::JacobiCausal, 37, 37, action_init(7));
        let out = decode_jacobi(&model, prompt, &cfg).unwrap();
        assert_eq!(fixed_token_count(&out.trace, 0).unwrap(), init_fixed);
        assert_eq!(out.trace.passes_total, passes);
        assert_eq!(out.trace.passes_changing, changing);
    }
}

/// The returned fixed point must survive an explicit extra update pass, for
/// both masks; the loop's own termination test is not trusted.
#[test]
fn fixed_point_certificate_is_reverified() {
    for trial in 0..40u64 {
        let model = toy(trial % 7);
        let prompt = seeded_prompt(trial * 31 + 1, 6);
        for mode in [DecodeMode::JacobiCausal, DecodeMode::JacobiBidirectional] {
            let cfg = DecoderConfig::new(mode, 16, 16, action_init(trial));
            match decode(&model, &prompt, &cfg) {
                Ok(out) => {
                    assert!(
                        verify_fixed_point(&model, &prompt, &out.tokens, &cfg).unwrap(),
                        "trial {trial} {mode:?}: claimed fixed point failed certification"
                    );
                }
                Err(DecodeError::NonConvergence { .. } | DecodeError::CycleDetected { .. }) => {}
                Err(other) => panic!("unexpected error: {other}"),
            }
        }
    }
}

/// Bidirectional decoding over 200 seeded trials either certifies a fixed
/// point or reports nonconvergence/cycling with a complete trace; the pass
/// cap bounds every run.
#[test]
fn bidirectional_terminates_or_reports_over_200_trials() {
    let trials = 200u64;
    let n = 16usize;
    let mut converged = 0usize;
    let mut reported = 0usize;
    for trial in 0..trials {
        let model = toy(100 + trial % 10);
        let prompt = seeded_prompt(trial * 7 + 3, 4);
        let cfg = DecoderConfig::new(DecodeMode::JacobiBidirectional, n, n, action_init(trial));
        let cap = cfg.effective_max_passes();
        assert_eq!(cap, 4 * n);
        match decode_jacobi(&model, &prompt, &cfg) {
            Ok(out) => {
                converged += 1;
                assert!(out.trace.passes_total <= cap);
                assert!(out.trace.converged);
                assert!(verify_fixed_point(&model, &prompt, &out.tokens, &cfg).unwrap());
            }
            Err(err) => {
                reported += 1;
                let trace = err.trace().expect("failure carries the full trace");
                assert!(!trace.converged);
                assert!(trace.passes_total <= cap);
                assert_eq!(trace.iterates.len(), trace.passes_total + 1);
                assert_eq!(trace.changed_positions.len(), trace.passes_total);
            }
        }
    }
    assert_eq!(converged + reported, trials as usize);
}

/// A two-cycle constructed by hand: with cycle detection the decoder reports
/// it instead of burning the whole pass budget.
#[test]
fn cycle_detection_reports_early() {
    use pardec_core::error::ModelError;
    use pardec_core::model::{LogitModel, LogitRow, MaskMode};

    // Maps every slot to the negation of its own current value (0 <-> 1)
    // under the bidirectional read convention, oscillating forever.
    struct FlipModel;
    impl LogitModel for FlipModel {
        fn vocab_size(&self) -> usize {
            512
        }
        fn max_seq(&self) -> usize {
            128
        }
        fn forward_logits(
            &self,
            _prompt: &[u32],
            response: &[u32],
            _mode: MaskMode,
        ) -> Result<Vec<LogitRow>, ModelError> {
            Ok(response
                .iter()
                .map(|&t| {
                    let mut row = vec![0.0f32; 512];
                    row[if t == 0 { 1 } else { 0 }] = 1.0;
                    row
                })
                .collect())
        }
        fn next_token_row(&self, _ctx: &[u32]) -> Result<LogitRow, ModelError> {
            Ok(vec![0.0f32; 512])
        }
    }

    let cfg = DecoderConfig::new(
        DecodeMode::JacobiBidirectional,
        8,
        8,
        InitPolicy::ConstantToken { token: 0 },
    );
    match decode_jacobi(&FlipModel, &[1], &cfg) {
        Err(DecodeError::CycleDetected { pass, trace, .. }) => {
            assert_eq!(pass, 2, "0 -> 1 -> 0 repeats at the second pass");
            assert_eq!(trace.passes_total, 2);
        }
        other => panic!("expected cycle detection, got {other:?}"),
    }
}
