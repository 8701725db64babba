//! The `newsgraph` command line.
//!
//! Every subcommand writes its outputs and a `manifest.json` into `--out`.
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 runtime error.

mod commands;
pub mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use newsgraph::model::{EncoderKind, TemporalMode};
use newsgraph::Error;

pub use commands::{load_context, parse_ratios, Settings};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Parser)]
#[command(name = "newsgraph", version, about = "Fake news detection on heterogeneous news graphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic labeled graph with feature tables.
    Synth(SynthArgs),
    /// Train a model and save the best-validation checkpoint.
    Train(TrainArgs),
    /// Evaluate a checkpoint on the test split.
    Eval(CheckpointArgs),
    /// Compare GRU and attention aggregation of the user path.
    AblateTemporal(AblateTemporalArgs),
    /// Compare the three instance encoders.
    AblateEncoder(AblateEncoderArgs),
    /// Retrain across training-set ratios.
    SweepRatio(SweepArgs),
    /// Export news representations from a checkpoint.
    ExportEmb(CheckpointArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Graph in JSON-lines form.
    #[arg(long)]
    pub graph: PathBuf,
    /// Directory holding news.csv, user.csv and publisher.csv.
    #[arg(long = "features-dir")]
    pub features_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Flat `key = value` configuration file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Root seed (default 42).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Fraction of labeled news used for training.
    #[arg(long = "train-frac")]
    pub train_frac: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long)]
    pub encoder: Option<EncoderKind>,
    #[arg(long)]
    pub temporal: Option<TemporalMode>,
}

#[derive(Debug, Clone, Args)]
pub struct CheckpointArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// Output directory (default: current directory).
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "train-frac")]
    pub train_frac: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct AblateTemporalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long)]
    pub encoder: Option<EncoderKind>,
    /// Number of seeds, starting at the root seed and counting up.
    #[arg(long, default_value_t = 1)]
    pub runs: u64,
}

#[derive(Debug, Clone, Args)]
pub struct AblateEncoderArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long)]
    pub temporal: Option<TemporalMode>,
    #[arg(long, default_value_t = 1)]
    pub runs: u64,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long)]
    pub encoder: Option<EncoderKind>,
    #[arg(long)]
    pub temporal: Option<TemporalMode>,
    /// Comma-separated ratios, as fractions or percentages (default 10,30,50,70,90).
    #[arg(long)]
    pub ratios: Option<String>,
}

/// Exit code for a failed run.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => 1,
        e if e.is_data_error() => 2,
        _ => 3,
    }
}

/// Parses `args` (program name first) and runs the subcommand.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let argv: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match commands::execute(cli.command, &argv) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
