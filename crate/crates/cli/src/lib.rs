//! The `causal-simt` command line.
//!
//! Exit codes: 0 success, 1 usage or fatal error, 2 some sessions failed,
//! 3 verification failed.

pub mod align;
pub mod config;
pub mod dataset;
pub mod evaluate;
mod io;
pub mod simulate;
pub mod verify;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{BackendKind, FileConfig, ModeArg, RunConfig};

#[derive(Debug, Parser)]
#[command(
    name = "causal-simt",
    version,
    about = "Causal alignment, SFT data and simultaneous translation runs"
)]
pub struct Cli {
    /// TOML file with default settings.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Comma-separated wait-k values.
    #[arg(long, global = true, value_delimiter = ',')]
    pub k: Option<Vec<usize>>,
    #[arg(long, global = true, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long, global = true, value_enum)]
    pub backend: Option<BackendKind>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Leave the system block out of prompts.
    #[arg(long, global = true)]
    pub no_system_message: bool,
    #[arg(long, global = true)]
    pub window_ms: Option<u64>,
    /// Bootstrap resamples for evaluate.
    #[arg(long, global = true, value_name = "N")]
    pub bootstrap: Option<usize>,
    #[arg(long, global = true)]
    pub target_language: Option<String>,
    /// Environment variable holding the HTTP bearer token.
    #[arg(long, global = true)]
    pub api_key_env: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Align a parallel corpus and write the causal corpus.
    Align(AlignArgs),
    /// Cut a causal corpus into prompt/completion samples.
    BuildDataset(BuildDatasetArgs),
    /// Run sessions and write one trace per sentence and k.
    Simulate(SimulateArgs),
    /// Score traces against references.
    Evaluate(EvaluateArgs),
    /// Re-check a causal corpus from its raw fields.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct AlignArgs {
    /// JSON-lines of {"source", "target"}.
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long, short)]
    pub output: PathBuf,
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Pharaoh links to use instead of training.
    #[arg(long)]
    pub alignments: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BuildDatasetArgs {
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long, short)]
    pub output: PathBuf,
    /// Training metadata sidecar; defaults to `<output>.meta.json`.
    #[arg(long)]
    pub meta: Option<PathBuf>,
    #[arg(long)]
    pub samples_per_pair: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// JSON-lines of {"id", "source", "target"} (text mode).
    #[arg(long)]
    pub test_set: Option<PathBuf>,
    /// Directory of timed transcripts (speech mode).
    #[arg(long)]
    pub transcripts: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// JSON-lines of {"id", "units"} for the scripted backend.
    #[arg(long)]
    pub script: Option<PathBuf>,
    /// TSV dictionary for the dict backend; without it words are copied.
    #[arg(long)]
    pub dict: Option<PathBuf>,
    #[arg(long)]
    pub lookahead: Option<usize>,
    /// Recording read by the replay backend.
    #[arg(long)]
    pub recording: Option<PathBuf>,
    /// Record every backend unit to this file.
    #[arg(long)]
    pub record: Option<PathBuf>,
    /// Stamp traces with wall-clock time (needed for RTF).
    #[arg(long)]
    pub wall_clock: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub traces: PathBuf,
    /// Test set file or transcript directory.
    #[arg(long)]
    pub references: PathBuf,
    /// Report JSON; printed to stdout when absent.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Tradeoff curve CSV (needs two or more k values).
    #[arg(long)]
    pub curve: Option<PathBuf>,
    /// Closed-class word list for the WAIT histogram.
    #[arg(long)]
    pub function_words: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, short)]
    pub input: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    PartialFailure,
    VerificationFailed,
}

impl Outcome {
    pub fn code(self) -> i32 {
        match self {
            Outcome::Success => 0,
            Outcome::PartialFailure => 2,
            Outcome::VerificationFailed => 3,
        }
    }
}

pub fn execute(cli: &Cli) -> anyhow::Result<Outcome> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let cfg = RunConfig::resolve(cli, &file, |k| std::env::var(k).ok())?;
    match &cli.command {
        Command::Align(a) => align::run(a, &cfg),
        Command::BuildDataset(a) => dataset::run(a, &cfg),
        Command::Simulate(a) => simulate::run(a, &cfg),
        Command::Evaluate(a) => evaluate::run(a, &cfg),
        Command::Verify(a) => verify::run(a),
    }
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(outcome) => outcome.code(),
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}
