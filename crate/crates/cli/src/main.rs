//! `c2t` — color-to-thermal anomaly detection pipeline.
//!
//! Subcommands cover the full workflow: `calibrate` a distortion model,
//! `preprocess` raw RGB/thermal captures into aligned pairs, `split` them
//! into a catalog, `train` (or fine-tune) the translator, `predict`
//! thermal images, `detect` anomalies against a tolerance, `evaluate` a
//! model over a catalog split, and `synth` generate synthetic facade data.

mod commands;
mod config;
mod error;
mod util;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use error::CliError;

#[derive(Parser)]
#[command(name = "c2t", version, about = "Color-to-thermal anomaly detection for building envelopes")]
struct Cli {
    /// TOML file with default settings (seed, tolerance, scale, ...).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a radial distortion model from point correspondences.
    Calibrate(commands::calibrate::Args),
    /// Undistort, crop, resample and encode raw captures into pairs.
    Preprocess(commands::preprocess::Args),
    /// Build a train/eval catalog from a pair directory.
    Split(commands::split::Args),
    /// Train or fine-tune the color-to-thermal translator.
    Train(commands::train::Args),
    /// Predict a thermal image from a preprocessed RGB frame.
    Predict(commands::predict::Args),
    /// Compute the anomaly map, mask, regions and overlay for one pair.
    Detect(commands::detect::Args),
    /// Evaluate a model over a catalog split and write a report.
    Evaluate(commands::evaluate::Args),
    /// Generate synthetic facade pairs with ground truth.
    Synth(commands::synth::Args),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = config::RunConfig::load(cli.config.as_deref());
    let run = match run {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    let result = match cli.command {
        Command::Calibrate(args) => commands::calibrate::run(&run, args),
        Command::Preprocess(args) => commands::preprocess::run(&run, args),
        Command::Split(args) => commands::split::run(&run, args),
        Command::Train(args) => commands::train::run(&run, args),
        Command::Predict(args) => commands::predict::run(&run, args),
        Command::Detect(args) => commands::detect::run(&run, args),
        Command::Evaluate(args) => commands::evaluate::run(&run, args),
        Command::Synth(args) => commands::synth::run(&run, args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}

fn fail(e: CliError) -> ExitCode {
    eprintln!("error[{}]: {}", e.category, e.message);
    ExitCode::from(e.exit_code)
}
