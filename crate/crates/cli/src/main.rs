//! `cvtg` — file-driven CLI over the CVTG evaluation toolkit.
//!
//! Subcommands: `reward` (OCR reward scoring), `gate` (attention gate
//! construction), `layout` (non-overlapping box placement), `eval` (corpus
//! metrics), `stats` (corpus statistics), `synth` (synthetic attention
//! maps for fixtures and experiments).
//!
//! stdout carries machine-readable output only; diagnostics go to stderr.
//! Exit codes: 0 success, 2 input/usage error, 3 infeasible/domain error,
//! 4 internal verification failure.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cvtg", version, about = "Evaluation toolkit for complex visual text generation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score an OCR transcript against visual-text targets
    Reward(RewardArgs),
    /// Build a quotation-guided attention gate from anchor maps
    Gate(GateArgs),
    /// Place non-overlapping boxes over target attention peaks
    Layout(LayoutArgs),
    /// Evaluate a prompt corpus against per-record OCR transcripts
    Eval(EvalArgs),
    /// Summarize a prompt corpus
    Stats(StatsArgs),
    /// Generate a synthetic attention map
    Synth(SynthArgs),
}

#[derive(Args)]
struct RewardArgs {
    /// Prompt whose quoted spans are the targets
    #[arg(long, conflicts_with = "target")]
    prompt: Option<String>,
    /// Explicit target text; repeat for multiple targets
    #[arg(long)]
    target: Vec<String>,
    /// OCR transcript JSON ({"lines": [{"text", "bbox"}]})
    #[arg(long)]
    ocr: PathBuf,
    /// Weight of the worst instance in the base reward
    #[arg(long, default_value_t = 0.3)]
    lambda_bal: f64,
    /// Length-ratio tolerance before the noise decay
    #[arg(long, default_value_t = 1.5)]
    delta: f64,
}

#[derive(Args)]
struct GateArgs {
    /// Anchor attention maps (ATNM or JSON), averaged before gating
    #[arg(required = true)]
    maps: Vec<PathBuf>,
    /// Output path for the gate in ATNM format; a `<out>.json` sidecar
    /// records the peak and sigmas
    #[arg(long)]
    out: PathBuf,
    /// Odd smoothing kernel size
    #[arg(long, default_value_t = 5)]
    kernel: usize,
    /// Lower gating quantile
    #[arg(long, default_value_t = 0.80)]
    qlow: f64,
    /// Upper gating quantile
    #[arg(long, default_value_t = 0.99)]
    qhigh: f64,
    /// Minimum Gaussian width in pixels
    #[arg(long, default_value_t = 1.0)]
    sigma_floor: f64,
    /// Additionally write the averaged/smoothed/retained intermediates
    #[arg(long)]
    emit_stages: bool,
}

#[derive(Args)]
struct LayoutArgs {
    /// Problem JSON: {"targets": [[x, y], ...], "a_min"?, "r_min"?,
    /// "r_max"?, "big_m"?, "area_cuts"?}
    problem: PathBuf,
    /// Minimum box area (default 0.5 / (2n))
    #[arg(long)]
    a_min: Option<f64>,
    /// Aspect-ratio lower bound
    #[arg(long)]
    r_min: Option<f64>,
    /// Aspect-ratio upper bound
    #[arg(long)]
    r_max: Option<f64>,
    /// Chord cuts for the area linearization
    #[arg(long)]
    area_cuts: Option<usize>,
    /// Big-M constant of the disjunctive formulation
    #[arg(long)]
    big_m: Option<f64>,
}

#[derive(Args)]
struct EvalArgs {
    /// Corpus JSON file
    #[arg(long)]
    corpus: PathBuf,
    /// Directory of per-record OCR transcripts named <record-id>.json
    #[arg(long)]
    ocr_dir: PathBuf,
    /// Directory of per-record ground-truth annotations named
    /// <record-id>.json (JSON array of {"phrase", "bbox"})
    #[arg(long)]
    gt_dir: Option<PathBuf>,
    /// Directory of per-record attention maps named <record-id>.atnm or
    /// <record-id>.json
    #[arg(long)]
    maps_dir: Option<PathBuf>,
    /// Fuzzy-score threshold for a target to count as detected
    #[arg(long, default_value_t = 0.8)]
    recall_threshold: f64,
}

#[derive(Args)]
struct StatsArgs {
    /// Corpus JSON file
    corpus: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    /// Gaussian bump as "cx,cy,sigma,amplitude"; repeatable
    #[arg(long)]
    blob: Vec<String>,
    /// Uniform noise amplitude
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Grid height in pixels
    #[arg(long)]
    height: usize,
    /// Grid width in pixels
    #[arg(long)]
    width: usize,
    /// RNG seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path; `.json` extension selects the JSON map format,
    /// anything else ATNM
    #[arg(long)]
    out: PathBuf,
}

/// Command failure with its exit-code class.
#[derive(Debug)]
pub enum CliError {
    /// Unreadable/invalid input or bad flag combination (exit 2).
    Input(String),
    /// Valid input with no answer in the domain (exit 3).
    Domain(String),
    /// Internal inconsistency, e.g. a solution failing verification (exit 4).
    Internal(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Domain(_) => 3,
            CliError::Internal(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Domain(m) | CliError::Internal(m) => m,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Reward(args) => commands::reward::run(args),
        Command::Gate(args) => commands::gate::run(args),
        Command::Layout(args) => commands::layout::run(args),
        Command::Eval(args) => commands::eval::run(args),
        Command::Stats(args) => commands::stats::run(args),
        Command::Synth(args) => commands::synth::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message());
            ExitCode::from(err.code())
        }
    }
}
