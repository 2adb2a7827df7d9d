//! `pardec`: model generation, one-shot decoding, oracle verification,
//! benchmark grids, and codec fuzzing for the parallel-decoding library.
//!
//! Exit codes: 0 success, 2 usage or validation, 3 I/O or corrupt weight
//! file, 4 nonconvergence, 5 oracle mismatch or verification failure,
//! 6 codec framing or alien-token error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pardec_core::decoder::DecodeMode;

use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    NonConvergence(String),
    #[error("verification failed: {0}")]
    OracleMismatch(String),
    #[error("codec: {0}")]
    Codec(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Validation(_) => 2,
            CliError::Io(_) => 3,
            CliError::NonConvergence(_) => 4,
            CliError::OracleMismatch(_) => 5,
            CliError::Codec(_) => 6,
        }
    }
}

fn parse_mode(s: &str) -> Result<DecodeMode, String> {
    match s {
        "ar" => Ok(DecodeMode::Ar),
        "jacobi-causal" => Ok(DecodeMode::JacobiCausal),
        "jacobi-bidirectional" => Ok(DecodeMode::JacobiBidirectional),
        other => Err(format!(
            "unknown mode `{other}`; expected ar, jacobi-causal or jacobi-bidirectional"
        )),
    }
}

#[derive(Parser)]
#[command(
    name = "pardec",
    version,
    about = "Parallel (Jacobi) decoding experiments for action-chunk token models"
)]
struct Cli {
    /// TOML run configuration; flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the seeded toy model and write the weight file plus manifest.
    InitModel {
        /// Output path for the binary weight container.
        #[arg(long)]
        out: PathBuf,
        /// Override the model seed from the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Decode one action chunk from a seeded synthetic prompt.
    Decode {
        /// Weight file written by init-model.
        #[arg(long)]
        model: PathBuf,
        /// ar, jacobi-causal or jacobi-bidirectional.
        #[arg(long, value_parser = parse_mode)]
        mode: Option<DecodeMode>,
        /// Tokens solved per Jacobi system (defaults to the full response).
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long, default_value_t = 0)]
        prompt_seed: u64,
        #[arg(long)]
        prompt_len: Option<usize>,
        /// Seed for the random action-token initialization.
        #[arg(long)]
        init_seed: Option<u64>,
        /// Per-block pass cap.
        #[arg(long)]
        max_passes: Option<usize>,
        /// Write the decode trace as JSON.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Include full per-pass iterates in the trace dump.
        #[arg(long)]
        include_iterates: bool,
    },
    /// Sweep prompts and horizons checking Jacobi output equals greedy AR.
    Verify {
        #[arg(long)]
        model: PathBuf,
        /// Number of seeded prompts to sweep.
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        /// Comma-separated decoding horizons.
        #[arg(long, value_delimiter = ',')]
        horizons: Option<Vec<usize>>,
        /// Initializations tried per (prompt, horizon).
        #[arg(long, default_value_t = 1)]
        init_variants: usize,
        #[arg(long)]
        prompt_seed: Option<u64>,
        #[arg(long)]
        prompt_len: Option<usize>,
    },
    /// Run the mode x horizon benchmark grid and emit a report.
    Bench {
        #[arg(long)]
        model: PathBuf,
        /// Report JSON path (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Flattened per-cell CSV.
        #[arg(long)]
        cells_csv: Option<PathBuf>,
        /// Speed-distribution CSV (min/mean/max tokens per second).
        #[arg(long)]
        speed_csv: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        warmup: Option<usize>,
        #[arg(long)]
        prompt_count: Option<usize>,
        #[arg(long)]
        prompt_seed: Option<u64>,
        #[arg(long, value_delimiter = ',')]
        horizons: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',', value_parser = parse_mode)]
        modes: Option<Vec<DecodeMode>>,
    },
    /// Round-trip, bijection and framing checks on the action codec.
    CodecFuzz {
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = RunConfig::load_or_default(cli.config.as_deref())?;
    match cli.command {
        Command::InitModel { out, seed } => commands::init_model(&config, &out, seed),
        Command::Decode {
            model,
            mode,
            horizon,
            prompt_seed,
            prompt_len,
            init_seed,
            max_passes,
            trace,
            include_iterates,
        } => commands::decode_cmd(
            &config,
            &commands::DecodeArgs {
                model_path: model,
                mode,
                horizon,
                prompt_seed,
                prompt_len,
                init_seed,
                max_passes,
                trace,
                include_iterates,
            },
        ),
        Command::Verify {
            model,
            trials,
            horizons,
            init_variants,
            prompt_seed,
            prompt_len,
        } => commands::verify_cmd(
            &config,
            &commands::VerifyArgs {
                model_path: model,
                trials,
                horizons,
                init_variants,
                prompt_seed,
                prompt_len,
            },
        ),
        Command::Bench {
            model,
            out,
            cells_csv,
            speed_csv,
            trials,
            warmup,
            prompt_count,
            prompt_seed,
            horizons,
            modes,
        } => commands::bench_cmd(
            &config,
            &commands::BenchArgs {
                model_path: model,
                out,
                cells_csv,
                speed_csv,
                trials,
                warmup,
                prompt_count,
                prompt_seed,
                horizons,
                modes,
            },
        ),
        Command::CodecFuzz { samples, seed } => commands::codec_fuzz_cmd(&config, samples, seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
