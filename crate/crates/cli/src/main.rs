//! `motran`: synthetic data generation, training, evaluation and tracking.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use motran_core::training::TrainMode;
use motran_core::Error;

#[derive(Parser, Debug)]
#[command(name = "motran", version, about = "Domain adaptation of inertial sequences for dead reckoning")]
pub struct Cli {
    /// Seed for data generation and training; overrides the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Training configuration (key = value lines).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Simulate walks and write one dataset directory per preset.
    SynthGen(SynthGenArgs),
    /// Train a model and write a checkpoint and loss history.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a labelled dataset.
    Eval(EvalArgs),
    /// Reconstruct a trajectory from an IMU recording.
    Track(TrackArgs),
}

#[derive(Args, Debug)]
pub struct SynthGenArgs {
    /// Recording length per domain, s.
    #[arg(long, default_value_t = 2500.0)]
    pub duration: f64,
    /// Sample rate, Hz.
    #[arg(long, default_value_t = 100.0)]
    pub rate: f64,
    /// Presets to generate; all of them when omitted.
    #[arg(long = "preset")]
    pub presets: Vec<String>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Labelled source dataset directory.
    #[arg(long)]
    pub source: PathBuf,
    /// Target dataset directory; its poses are used only in target-only mode.
    #[arg(long)]
    pub target: PathBuf,
    #[arg(long, default_value = "adapted")]
    pub mode: TrainMode,
    /// Override the configured number of steps.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Frames between window starts; defaults to the window length.
    #[arg(long)]
    pub stride: Option<usize>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Labelled dataset directory.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub mode: TrainMode,
    /// Expected window length; must match the checkpoint.
    #[arg(long)]
    pub window: Option<usize>,
}

#[derive(Args, Debug)]
pub struct TrackArgs {
    /// Model checkpoint; not needed with --oracle-labels.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// IMU CSV file.
    #[arg(long)]
    pub imu: PathBuf,
    #[arg(long, default_value_t = 100.0)]
    pub rate: f64,
    /// Ground-truth pose CSV, for overlay, ATE and oracle labels.
    #[arg(long)]
    pub pose: Option<PathBuf>,
    /// Domain whose normalization applies to the recording.
    #[arg(long)]
    pub domain: Option<String>,
    /// Start pose `x,y,psi`; defaults to the ground truth at the first window,
    /// or the origin.
    #[arg(long, allow_hyphen_values = true)]
    pub p0: Option<String>,
    /// Replay labels computed from the pose file instead of predicting.
    #[arg(long)]
    pub oracle_labels: bool,
    /// Window length; defaults to the checkpoint's, or 200 for oracle replay.
    #[arg(long)]
    pub window: Option<usize>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Usage(_) => 2,
        Error::Data(_) | Error::Io { .. } => 3,
        Error::Numeric(_) => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::SynthGen(a) => commands::synth_gen(&cli, a),
        Command::Train(a) => commands::train(&cli, a),
        Command::Eval(a) => commands::eval(&cli, a),
        Command::Track(a) => commands::track(&cli, a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
