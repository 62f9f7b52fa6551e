//! Command-line pipeline: fingerprint a corpus, train a decoder, decode
//! fingerprints into ranked SMILES and score the predictions.
//!
//! Settings resolve as flag, then `FP2MOL_*` environment variable, then the
//! `--config` TOML file, then the built-in default.

pub mod artifacts;
mod commands;
pub mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub use commands::{decode_all, run_decode, run_evaluate, run_fingerprint, run_train};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "fp2mol", version, about = "Fingerprint-to-structure decoding and evaluation")]
pub struct Cli {
    /// TOML file with default settings.
    #[arg(long, global = true, env = "FP2MOL_CONFIG")]
    pub config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "FP2MOL_JOBS")]
    pub jobs: Option<usize>,
    /// More log output; repeat for debug.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    /// Only warnings and errors.
    #[arg(short, long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute on-bit fingerprint records for a SMILES corpus.
    Fingerprint(FingerprintArgs),
    /// Train the decoder on a corpus joined with its fingerprints.
    Train(TrainArgs),
    /// Decode fingerprint records into ranked SMILES candidates.
    Decode(DecodeArgs),
    /// Score predictions against the truth corpus.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct FingerprintArgs {
    /// SMILES corpus, one `id<TAB>smiles` per line.
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, env = "FP2MOL_RADIUS")]
    pub radius: Option<u32>,
    #[arg(long, env = "FP2MOL_WIDTH")]
    pub width: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Fingerprint records joined with the corpus on id.
    #[arg(long)]
    pub fingerprints: PathBuf,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, env = "FP2MOL_LR")]
    pub lr: Option<f64>,
    #[arg(long, env = "FP2MOL_BATCH")]
    pub batch: Option<usize>,
    #[arg(long, env = "FP2MOL_EPOCHS")]
    pub epochs: Option<usize>,
    #[arg(long, env = "FP2MOL_SEED")]
    pub seed: Option<u64>,
    /// Threshold for probability records.
    #[arg(long, env = "FP2MOL_THRESHOLD")]
    pub threshold: Option<f64>,
    #[arg(long, env = "FP2MOL_EMBED_DIM")]
    pub embed_dim: Option<usize>,
    #[arg(long, env = "FP2MOL_LAYERS")]
    pub layers: Option<usize>,
    #[arg(long, env = "FP2MOL_HEADS")]
    pub heads: Option<usize>,
    #[arg(long, env = "FP2MOL_FF_DIM")]
    pub ff_dim: Option<usize>,
    #[arg(long, env = "FP2MOL_MAX_ONBITS")]
    pub max_onbits: Option<usize>,
    #[arg(long, env = "FP2MOL_MAX_TOKENS")]
    pub max_tokens: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct DecodeArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Probability or on-bit fingerprint records.
    #[arg(long)]
    pub fingerprints: PathBuf,
    /// Predictions file (JSON lines) to write.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, env = "FP2MOL_THRESHOLD")]
    pub threshold: Option<f64>,
    #[arg(long, env = "FP2MOL_BEAM")]
    pub beam: Option<usize>,
    #[arg(long, env = "FP2MOL_MAX_LEN")]
    pub max_len: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub predictions: PathBuf,
    /// SMILES corpus holding the true structures.
    #[arg(long)]
    pub truth: PathBuf,
    /// JSON report to write; a TSV of the aggregates goes next to it.
    #[arg(long)]
    pub out: PathBuf,
    /// Cutoffs, comma separated.
    #[arg(long, value_delimiter = ',', env = "FP2MOL_K")]
    pub k: Option<Vec<usize>>,
    #[arg(long, env = "FP2MOL_MCES_PENALTY")]
    pub mces_penalty: Option<f64>,
    /// MCES search nodes per pair.
    #[arg(long, env = "FP2MOL_NODE_BUDGET")]
    pub node_budget: Option<u64>,
    /// MCES wall-clock seconds per pair.
    #[arg(long, env = "FP2MOL_TIME_BUDGET")]
    pub time_budget: Option<f64>,
}

fn init_logging(cli: &Cli) {
    let level = if cli.quiet {
        "warn"
    } else {
        match cli.verbose {
            0 => "info",
            _ => "debug",
        }
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().filter_or("FP2MOL_LOG", level))
        .format_timestamp(None)
        .try_init();
}

/// Run a parsed command line.
pub fn run(cli: Cli) -> Result<(), CliError> {
    init_logging(&cli);
    let file = settings::FileConfig::load(cli.config.as_deref())?;
    if let Some(jobs) = cli.jobs.or(file.jobs) {
        if jobs == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        // Only the first call in a process can size the global pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    match &cli.command {
        Command::Fingerprint(a) => run_fingerprint(a, &file),
        Command::Train(a) => run_train(a, &file),
        Command::Decode(a) => run_decode(a, &file),
        Command::Evaluate(a) => run_evaluate(a, &file),
    }
}

/// Entry point shared by the binary: parse, run, map errors to exit codes.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
