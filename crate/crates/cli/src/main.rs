//! `asad`: evaluate actor-identified action detections, run the association
//! baselines, and generate or benchmark synthetic scenarios.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid input data, 64 usage
//! error (bad flags or config file).

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use asad_core::FormatError;

pub const EXIT_IO: u8 = 1;
pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_USAGE: u8 = 64;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Validation(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) => EXIT_USAGE,
            Self::Io(_) => EXIT_IO,
            Self::Validation(_) => EXIT_VALIDATION,
        }
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        match &e {
            FormatError::Rows { path, errors } => Self::Validation(
                std::iter::once(format!("{}: {} error(s)", path.display(), errors.len()))
                    .chain(errors.iter().map(|r| format!("{}:{}: {}", path.display(), r.line, r.message)))
                    .collect::<Vec<_>>()
                    .join("\n"),
            ),
            _ if e.is_validation() => Self::Validation(e.to_string()),
            _ => Self::Io(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "asad", version, about = "Actor-identified action detection: evaluation and association baselines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score predictions against ground truth.
    Evaluate(EvaluateArgs),
    /// Assign actor ids to a detection stream.
    Track(TrackArgs),
    /// Generate a synthetic scenario.
    Synth(SynthArgs),
    /// Compare association modes over seeded scenarios.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub gt: Option<std::path::PathBuf>,
    #[arg(long)]
    pub pred: Option<std::path::PathBuf>,
    /// IoU gate shared by all metric families.
    #[arg(long)]
    pub iou: Option<f64>,
    /// Label count for the Hamming loss (overrides the sidecar).
    #[arg(long)]
    pub labels: Option<u16>,
    /// Output path; stdout when omitted.
    #[arg(long)]
    pub report: Option<std::path::PathBuf>,
    /// json or csv.
    #[arg(long)]
    pub format: Option<String>,
    /// Include per-video blocks.
    #[arg(long)]
    pub per_video: bool,
    /// Also write the pooled precision/recall curve as CSV.
    #[arg(long)]
    pub pr_curve: Option<std::path::PathBuf>,
    /// Ignore predictions below this score for the Hamming loss.
    #[arg(long)]
    pub score_cutoff: Option<f64>,
    /// Re-solve identities every keyframe when counting switches.
    #[arg(long)]
    pub no_switch_persistence: bool,
    /// JSON file whose keys mirror these flags; flags win.
    #[arg(long)]
    pub config: Option<std::path::PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrackArgs {
    #[arg(long)]
    pub detections: Option<std::path::PathBuf>,
    /// Association strategy (online, offline).
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub gap: Option<u32>,
    #[arg(long)]
    pub out: Option<std::path::PathBuf>,
    #[arg(long)]
    pub config: Option<std::path::PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct ScenarioArgs {
    /// default, camera-cut or static.
    #[arg(long)]
    pub scenario: Option<String>,
    #[arg(long)]
    pub n_actors: Option<u32>,
    #[arg(long)]
    pub n_keyframes: Option<u32>,
    #[arg(long)]
    pub n_cuts: Option<u32>,
    #[arg(long)]
    pub p_miss: Option<f64>,
    #[arg(long)]
    pub p_fp: Option<f64>,
    #[arg(long)]
    pub p_act: Option<f64>,
    #[arg(long)]
    pub sigma_box: Option<f64>,
    #[arg(long)]
    pub sigma_app: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<std::path::PathBuf>,
    #[arg(long)]
    pub config: Option<std::path::PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Number of seeds, run as 0..K.
    #[arg(long)]
    pub seeds: Option<u64>,
    #[arg(long)]
    pub out: Option<std::path::PathBuf>,
    #[arg(long)]
    pub config: Option<std::path::PathBuf>,
}

fn init_pool() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("ASAD_BENCH_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| CliError::Usage(format!("ASAD_BENCH_THREADS={raw:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_pool()?;
    match cli.command {
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Track(a) => commands::track(a),
        Command::Synth(a) => commands::synth(a),
        Command::Bench(a) => commands::bench(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
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
