//! `asd`: synthesize data, train, score, evaluate and count MACs.
//!
//! Exit codes: 0 ok, 2 configuration, 3 data, 4 artifact, 5 mismatch.

mod commands;
mod exit;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "asd", version, about = "Unsupervised anomalous sound detection toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset and its manifest.
    Synth(SynthArgs),
    /// Scan a dataset tree and write its manifest.
    Scan(ScanArgs),
    /// Train one machine's model, covariances and thresholds.
    Train(TrainArgs),
    /// Score a machine's test clips.
    Score(ScoreArgs),
    /// Compute AUC, pAUC and the official score from a score CSV.
    Evaluate(EvaluateArgs),
    /// Report multiply-accumulate operations of a model.
    Macs(MacsArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Synthetic dataset spec (TOML).
    #[arg(long, visible_alias = "spec")]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[arg(long)]
    pub data_root: PathBuf,
    /// File-name convention overrides (TOML).
    #[arg(long)]
    pub naming: Option<PathBuf>,
    /// Attribute CSV files to merge into the manifest.
    #[arg(long)]
    pub attributes: Vec<PathBuf>,
    /// development, additional_training or evaluation.
    #[arg(long, default_value = "development")]
    pub role: String,
    /// Manifest path; defaults to `<data-root>/manifest.csv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Run configuration (TOML); defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data_root: Option<PathBuf>,
    /// Manifest CSV; defaults to `<data-root>/manifest.csv`, else a scan.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub machine: String,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for the trained artifacts.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Trained artifact directory, or the model file inside it.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data_root: PathBuf,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub machine: String,
    /// mse or mahala; defaults to the trained config's mode.
    #[arg(long)]
    pub mode: Option<String>,
    /// Overrides the stored decision threshold.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Score CSV to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub scores: PathBuf,
    /// Ground-truth manifest; defaults to `<data-root>/manifest.csv`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub data_root: Option<PathBuf>,
    /// Reference table: `dev` for the bundled development baseline, or a CSV path.
    #[arg(long)]
    pub reference: Option<String>,
    /// Scoring mode used to pick reference rows.
    #[arg(long, default_value = "mse")]
    pub mode: String,
    #[arg(long, default_value_t = asd_core::metrics::DEFAULT_PAUC_P)]
    pub pauc_p: f64,
    /// Trained artifact directory or model file, for the MACs line.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Report directory (report.csv, report.txt).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MacsArgs {
    /// Trained artifact directory or model file.
    #[arg(long)]
    pub model: PathBuf,
    /// Feature config; defaults to the one echoed beside the model.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Clip length used for the per-clip figure.
    #[arg(long, default_value_t = 10.0)]
    pub clip_seconds: f64,
    /// Take the clip length from this dataset's first test clip instead.
    #[arg(long)]
    pub data_root: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub machine: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Scan(a) => commands::scan(a),
        Command::Train(a) => commands::train(a),
        Command::Score(a) => commands::score(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Macs(a) => commands::macs(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            f.exit_code()
        }
    }
}
