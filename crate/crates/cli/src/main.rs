//! `rrid`: synthesize data, train, evaluate, run inference, check gradients
//! and run ablations from one binary.
//!
//! Exit codes: 0 success, 2 usage or config error, 3 data or checkpoint
//! error, 4 numerical failure.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::CliResult;

#[derive(Parser, Debug)]
#[command(name = "rrid", version, about = "Dual-domain (RAW + sRGB) image demoireing")]
struct Cli {
    /// Log more (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesize moire/clean pairs from procedural scenes.
    Synth(SynthArgs),
    /// Train a model on a synthesized or prepared dataset.
    Train(TrainArgs),
    /// Score a checkpoint on a dataset split and write a CSV report.
    Eval(EvalArgs),
    /// Demoire one sRGB/RAW pair.
    Infer(InferArgs),
    /// Finite-difference check of every block's backward pass.
    Gradcheck(GradcheckArgs),
    /// Train and compare structural variants against the full model.
    Ablate(AblateArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// JSON config; its `synth` section sets the sampling ranges.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset root; pairs go to `<out>/<split>/`.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    count: usize,
    #[arg(long, default_value = "train")]
    split: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Side of the square images (even).
    #[arg(long, default_value_t = 64)]
    size: usize,
}

/// Flags overriding fields of the `train` config section.
#[derive(Args, Debug, Default)]
struct TrainOverrides {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    patch_size: Option<usize>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset root with `train/` and optionally `test/` (used for validation).
    #[arg(long)]
    data: PathBuf,
    /// Output directory for checkpoints and the training log.
    #[arg(long)]
    out: PathBuf,
    /// Continue from a checkpoint written by an earlier run.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Structural variant (full, B1-B6, S1-S7, R1-R4).
    #[arg(long)]
    variant: Option<String>,
    #[command(flatten)]
    overrides: TrainOverrides,
    /// Poison the loss at this step (exercises the abort path).
    #[arg(long, hide = true)]
    inject_nan_step: Option<u64>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "test")]
    split: String,
    /// CSV destination; printed to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct InferArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// 8-bit RGB PNG.
    #[arg(long)]
    rgb: PathBuf,
    /// 16-bit grayscale RGGB mosaic PNG.
    #[arg(long)]
    raw: PathBuf,
    /// Output sRGB PNG.
    #[arg(long)]
    out: PathBuf,
    /// Also write the RAW output as a mosaic PNG.
    #[arg(long)]
    out_raw: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GradcheckArgs {
    /// JSON config; its `model` section sets the full-network check.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-3)]
    tolerance: f64,
    /// Perturb the backward rule of this operator.
    #[arg(long, hide = true)]
    inject_fault: Option<String>,
}

#[derive(Args, Debug)]
struct AblateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: PathBuf,
    /// Comma-separated variant names; the full model is always added.
    #[arg(long, value_delimiter = ',', required = true)]
    variants: Vec<String>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    overrides: TrainOverrides,
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Infer(a) => commands::infer(a),
        Command::Gradcheck(a) => commands::gradcheck(a),
        Command::Ablate(a) => commands::ablate(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
