//! Command-line front end: train, evaluate, sample, reconstruct,
//! interpolate, and verify, with reproducible run directories.
//!
//! Exit codes: 0 success, 2 config error, 3 data error, 4 numeric abort,
//! 5 verification failure.

mod commands;
mod datasets;
mod errors;
mod manifest;
mod overrides;
mod pgm;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "wae-lab",
    version,
    about = "Desk-scale auto-encoder lab: penalized-transport training, VAE baseline, and an exact transport verifier"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model from a config file plus overrides.
    Train(TrainArgs),
    /// Compute metrics and image grids for a checkpoint.
    Eval(EvalArgs),
    /// Decode prior draws from a checkpoint.
    Sample(SampleArgs),
    /// Auto-encode held-out test points.
    Reconstruct(ReconstructArgs),
    /// Decode straight latent lines between held-out pairs.
    Interpolate(InterpolateArgs),
    /// Certify the transport factorization and variance decomposition on
    /// discrete instances.
    Verify(VerifyArgs),
}

#[derive(Args)]
pub struct TrainArgs {
    /// Config file (TOML); defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one config key, e.g. --set penalty.lambda=10 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Output root (default $WAE_LAB_OUT or ./runs).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Shorthand for --set run.seed=N.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Shorthand for --set data.dataset=SPEC
    /// (mnist:PATH | mixture:SPEC | swiss:SPEC).
    #[arg(long)]
    pub dataset: Option<String>,
}

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Dataset override; defaults to the checkpoint's dataset.
    #[arg(long)]
    pub dataset: Option<String>,
    /// Artifact directory; defaults to the checkpoint's directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Generated sample count for sharpness/Fréchet evaluation.
    #[arg(long, default_value_t = 64)]
    pub samples: usize,
    /// Interpolation steps per row in the grid.
    #[arg(long, default_value_t = 8)]
    pub steps: usize,
}

#[derive(Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, default_value_t = 64)]
    pub count: usize,
    /// Sampling seed; defaults to the run seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct ReconstructArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub dataset: Option<String>,
    #[arg(long, default_value_t = 16)]
    pub count: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct InterpolateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub dataset: Option<String>,
    #[arg(long, default_value_t = 8)]
    pub steps: usize,
    #[arg(long, default_value_t = 4)]
    pub pairs: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct VerifyArgs {
    /// Instance file (see the plain-text instance format).
    #[arg(long)]
    pub instances: Option<PathBuf>,
    /// Generate COUNT random instances from SEED.
    #[arg(long, num_args = 2, value_names = ["COUNT", "SEED"])]
    pub random: Option<Vec<u64>>,
    /// Attach random per-coordinate variances to exercise the
    /// variance-decomposition identity too.
    #[arg(long)]
    pub variances: bool,
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(a) => commands::train::run(a),
        Command::Eval(a) => commands::eval::run(a),
        Command::Sample(a) => commands::sample::run(a),
        Command::Reconstruct(a) => commands::reconstruct::run(a),
        Command::Interpolate(a) => commands::interpolate::run(a),
        Command::Verify(a) => commands::verify::run(a),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
