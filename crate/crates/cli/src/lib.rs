//! Argument parsing and dispatch for the `corruptbench` binary.
//!
//! [`run`] never exits the process; it returns a [`CommandOutcome`] carrying
//! the exit code, a one-line summary and the artifacts written, so the same
//! path is exercised by the binary and by tests.

mod commands;
mod error;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

pub use error::{CliError, ExitCode};

#[derive(Debug, Parser)]
#[command(
    name = "corruptbench",
    version,
    about = "Corruption benchmarks, robustness metrics and LoRA few-shot tuning"
)]
pub struct Cli {
    /// Global seed; every random choice derives from it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for corruption, analysis and inference (default: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Print a machine-readable summary as one JSON line on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Materialise every (kind, severity) corruption set of test manifests.
    Corrupt(CorruptArgs),
    /// Compute CE, mCE, clean error and average accuracy against a baseline.
    Evaluate(EvaluateArgs),
    /// Pooled DCT magnitude profile or pixel histogram of a directory of PNGs.
    Analyze(AnalyzeArgs),
    /// Few-shot LoRA tuning on a training manifest.
    Train(TrainArgs),
    /// Zero-shot predictions as a prediction log.
    Predict(PredictArgs),
    /// Severity parameter table, or the adapter parameter census.
    Tables(TablesArgs),
}

#[derive(Debug, Args)]
pub struct CorruptArgs {
    #[arg(long = "manifest", required = true, num_args = 1..)]
    pub manifests: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Subset of kinds (default: the seven standard kinds).
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    pub kinds: Vec<String>,
    /// Subset of severities in 1..=5 (default: all).
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    pub severities: Vec<u8>,
    /// Record a failing dataset and continue with the others.
    #[arg(long)]
    pub keep_going: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long, requires = "baseline_log", conflicts_with_all = ["grid", "baseline_grid"])]
    pub log: Option<PathBuf>,
    #[arg(long, requires = "log")]
    pub baseline_log: Option<PathBuf>,
    /// Accuracy grid CSV (`kind,severity,accuracy`, severity 0 = clean).
    #[arg(long, requires = "baseline_grid")]
    pub grid: Option<PathBuf>,
    #[arg(long, requires = "grid")]
    pub baseline_grid: Option<PathBuf>,
    /// `.json` or `.csv`; the report goes to stdout as CSV when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub model_id: Option<String>,
    #[arg(long)]
    pub baseline_id: Option<String>,
    #[arg(long)]
    pub dataset_id: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum AnalyzeMode {
    Dct,
    Hist,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub dir: PathBuf,
    #[arg(long, value_enum)]
    pub mode: AnalyzeMode,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value_t = 10.0)]
    pub percent: f64,
    #[arg(long, default_value_t = 16)]
    pub rank: usize,
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 4)]
    pub patch_size: usize,
    /// Start from the base weights in this file instead of a seeded base.
    #[arg(long)]
    pub base: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub weights: PathBuf,
    /// Clean or corrupted manifests; rows are tagged from each manifest.
    #[arg(long = "manifest", num_args = 1..)]
    pub manifests: Vec<PathBuf>,
    /// A `layout.json`; every set it lists is predicted.
    #[arg(long)]
    pub layout: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TablesArgs {
    /// Include the opt-in block-quantization kernel.
    #[arg(long)]
    pub include_optional: bool,
    /// Print the adapter parameter census instead.
    #[arg(long)]
    pub census: bool,
    #[arg(long, default_value_t = 12, requires = "census")]
    pub layers: usize,
    #[arg(long, default_value_t = 768, requires = "census")]
    pub dim: usize,
    #[arg(long, default_value_t = 16, requires = "census")]
    pub rank: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommandOutcome {
    pub code: i32,
    pub summary: String,
    pub artifacts: Vec<PathBuf>,
    /// Extra machine-readable fields for the JSON summary line.
    #[serde(skip_serializing_if = "serde_json::Value::is_null")]
    pub details: serde_json::Value,
}

impl CommandOutcome {
    pub fn success(summary: impl Into<String>, artifacts: Vec<PathBuf>, details: serde_json::Value) -> Self {
        Self {
            code: ExitCode::Success as i32,
            summary: summary.into(),
            artifacts,
            details,
        }
    }

    fn failure(err: &CliError) -> Self {
        Self {
            code: err.code as i32,
            summary: err.message.clone(),
            artifacts: Vec::new(),
            details: serde_json::Value::Null,
        }
    }

    pub fn json_line(&self) -> String {
        serde_json::to_string(self).unwrap_or_else(|_| String::from("{}"))
    }
}

/// Parses `argv` (program name first) and runs the subcommand.
///
/// Report text for stdout-bound commands is written to `stdout`; the summary
/// line is left to the caller.
pub fn run<I, S>(argv: I, stdout: &mut dyn Write) -> CommandOutcome
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{text}");
                    CommandOutcome::success("", Vec::new(), serde_json::Value::Null)
                }
                _ => {
                    let text = text.trim_end();
                    CommandOutcome::failure(&CliError::usage(text.strip_prefix("error: ").unwrap_or(text)))
                }
            };
        }
    };
    let json = cli.json;
    let outcome = match execute(cli, stdout) {
        Ok(outcome) => outcome,
        Err(e) => CommandOutcome::failure(&e),
    };
    if json {
        let _ = writeln!(stdout, "{}", outcome.json_line());
    }
    outcome
}

fn execute(cli: Cli, stdout: &mut dyn Write) -> Result<CommandOutcome, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(CliError::usage("--workers must be at least 1"));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::runtime(format!("cannot start worker pool: {e}")))?;
    let seed = cli.seed;
    let mut text = Vec::new();
    let outcome = pool.install(|| match cli.command {
        Command::Corrupt(args) => commands::corrupt(&args, seed),
        Command::Evaluate(args) => commands::evaluate(&args, &mut text),
        Command::Analyze(args) => commands::analyze(&args),
        Command::Train(args) => commands::train(&args, seed),
        Command::Predict(args) => commands::predict(&args, seed),
        Command::Tables(args) => commands::tables(&args, &mut text),
    });
    stdout
        .write_all(&text)
        .map_err(|e| CliError::runtime(format!("stdout: {e}")))?;
    outcome
}
