//! The run configuration file: one TOML document with nested sections for
//! the model, codec, decoder defaults and bench grid. Every field has a
//! default, command-line flags override file values, and cross-field
//! coherence is validated before anything runs.

use std::path::Path;

use serde::{Deserialize, Serialize};

use pardec_core::codec::{CodecConfig, Range, ACTION_DIMS, N_BINS};
use pardec_core::decoder::DecodeMode;
use pardec_core::model::ModelSpec;

use crate::CliError;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default)]
    pub codec: CodecSection,
    #[serde(default)]
    pub decoder: DecoderSection,
    #[serde(default)]
    pub bench: BenchSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodecSection {
    pub chunk_size: usize,
    pub begin_token: u32,
    pub end_token: u32,
    /// Seven [lo, hi] pairs in order x, y, z, phi, theta, psi, g; defaults
    /// are half a meter of position, pi radians of rotation, [0, 1] gripper.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ranges: Option<Vec<(f64, f64)>>,
}

impl Default for CodecSection {
    fn default() -> Self {
        CodecSection {
            chunk_size: 5,
            begin_token: 1,
            end_token: 2,
            ranges: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoderSection {
    pub mode: DecodeMode,
    /// Defaults to the full response length when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    pub init_seed: u64,
    /// Use a constant-token initialization instead of the seeded draw.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constant_init_token: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_passes: Option<usize>,
}

impl Default for DecoderSection {
    fn default() -> Self {
        DecoderSection {
            mode: DecodeMode::JacobiCausal,
            horizon: None,
            init_seed: 0,
            constant_init_token: None,
            max_passes: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSection {
    pub modes: Vec<DecodeMode>,
    pub horizons: Vec<usize>,
    pub trials: usize,
    pub warmup: usize,
    pub prompt_count: usize,
    pub prompt_len: usize,
    pub prompt_seed: u64,
    pub init_seed: u64,
}

impl Default for BenchSection {
    fn default() -> Self {
        BenchSection {
            modes: vec![DecodeMode::Ar, DecodeMode::JacobiCausal],
            horizons: pardec_core::bench::DEFAULT_HORIZONS.to_vec(),
            trials: pardec_core::bench::DEFAULT_TRIALS,
            warmup: pardec_core::bench::DEFAULT_WARMUP,
            prompt_count: 8,
            prompt_len: 16,
            prompt_seed: 0,
            init_seed: 0,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            Some(p) => Self::load(p),
            None => Ok(RunConfig::default()),
        }
    }

    /// Build the core codec config with the action block at the top of the
    /// vocabulary, then validate every cross-field constraint.
    pub fn resolve_codec(&self) -> Result<CodecConfig, CliError> {
        self.model
            .validate()
            .map_err(|e| CliError::Validation(e.to_string()))?;
        let ranges = match &self.codec.ranges {
            None => CodecConfig::default_ranges(),
            Some(pairs) => {
                if pairs.len() != ACTION_DIMS {
                    return Err(CliError::Validation(format!(
                        "codec.ranges must have exactly {ACTION_DIMS} [lo, hi] pairs, got {}",
                        pairs.len()
                    )));
                }
                let mut ranges = [Range::new(0.0, 1.0).expect("static"); ACTION_DIMS];
                for (slot, &(lo, hi)) in ranges.iter_mut().zip(pairs) {
                    *slot = Range::new(lo, hi).map_err(|e| CliError::Validation(e.to_string()))?;
                }
                ranges
            }
        };
        let codec = CodecConfig {
            ranges,
            action_token_base: (self.model.vocab_size - N_BINS) as u32,
            begin_token: self.codec.begin_token,
            end_token: self.codec.end_token,
            chunk_size: self.codec.chunk_size,
        };
        codec
            .validate()
            .map_err(|e| CliError::Validation(e.to_string()))?;

        let l = codec.response_length();
        let longest_prompt = self.bench.prompt_len.max(1);
        if longest_prompt + l > self.model.max_seq {
            return Err(CliError::Validation(format!(
                "prompt_len {longest_prompt} + response length {l} exceeds model.max_seq {}",
                self.model.max_seq
            )));
        }
        if let Some(h) = self.decoder.horizon {
            if h == 0 || h > l {
                return Err(CliError::Validation(format!(
                    "decoder.horizon {h} must satisfy 1 <= horizon <= response length {l}"
                )));
            }
        }
        for &h in &self.bench.horizons {
            if h == 0 || h > l {
                return Err(CliError::Validation(format!(
                    "bench horizon {h} must satisfy 1 <= horizon <= response length {l}"
                )));
            }
        }
        Ok(codec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_resolves() {
        let cfg = RunConfig::default();
        let codec = cfg.resolve_codec().unwrap();
        assert_eq!(codec.action_token_base, 256);
        assert_eq!(codec.response_length(), 37);
    }

    #[test]
    fn toml_round_trip_and_overrides() {
        let text = r#"
[model]
vocab_size = 512
seed = 9

[codec]
chunk_size = 3
begin_token = 4
end_token = 5
ranges = [[-1.0, 1.0], [-1.0, 1.0], [-1.0, 1.0], [-3.0, 3.0], [-3.0, 3.0], [-3.0, 3.0], [0.0, 1.0]]

[decoder]
mode = "jacobi-bidirectional"
horizon = 7
init_seed = 3

[bench]
modes = ["ar"]
horizons = [7, 23]
trials = 2
warmup = 1
prompt_count = 3
prompt_len = 10
prompt_seed = 1
init_seed = 2
"#;
        let cfg: RunConfig = toml::from_str(text).unwrap();
        assert_eq!(cfg.model.seed, 9);
        assert_eq!(cfg.resolve_codec().unwrap().response_length(), 23);
        assert_eq!(cfg.decoder.mode, DecodeMode::JacobiBidirectional);
        let codec = cfg.resolve_codec().unwrap();
        assert_eq!(codec.chunk_size, 3);
    }

    #[test]
    fn oversized_response_is_rejected() {
        let mut cfg = RunConfig::default();
        cfg.codec.chunk_size = 40; // l = 282 > max_seq 128
        assert!(matches!(cfg.resolve_codec(), Err(CliError::Validation(_))));
    }

    #[test]
    fn bad_horizon_is_rejected() {
        let mut cfg = RunConfig::default();
        cfg.bench.horizons = vec![99];
        assert!(cfg.resolve_codec().is_err());
        let mut cfg = RunConfig::default();
        cfg.decoder.horizon = Some(0);
        assert!(cfg.resolve_codec().is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = toml::from_str::<RunConfig>("[model]\nvocab = 9\n");
        assert!(err.is_err());
    }
}
