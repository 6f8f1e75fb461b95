//! `fringefree`: simulate fringe captures, calibrate the projector,
//! reconstruct and score point clouds, and estimate candidate counts.
//!
//! Exit codes: 0 on success, 2 for configuration errors, 3 for file
//! errors, 4 when the pipeline fails on valid input.

mod commands;
mod config;
mod stacks;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fringefree::unwrap::{parse_thr_list, MatchMode};

use config::{CliError, Overrides, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "fringefree", version, about = "Code-minimized phase unwrapping for fringe projection stereo")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Candidate selection: m1 keeps the best pair per pixel, m2 every pair.
    #[arg(long, global = true)]
    mode: Option<MatchMode>,
    /// Comma-separated thresholds, e.g. "0.1pi,0.04pi".
    #[arg(long, global = true, value_parser = parse_thr_arg)]
    thr: Option<ThrList>,
    /// Noise seed for rendering.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Keep isolated points.
    #[arg(long, global = true)]
    no_outlier_filter: bool,
}

#[derive(Debug, Clone)]
struct ThrList(Vec<f64>);

fn parse_thr_arg(s: &str) -> Result<ThrList, String> {
    parse_thr_list(s).map(ThrList).map_err(|e| e.to_string())
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render image stacks and ground truth for a scene.
    Simulate,
    /// Measure three plates and fit the projector correction grid.
    CalibrateProjector,
    /// Reconstruct a cloud from image stacks.
    Reconstruct,
    /// Sweep thresholds in both modes against ground truth.
    Evaluate,
    /// Print the expected number of candidates per pixel.
    PredictCandidates,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let path = cli
        .config
        .ok_or_else(|| CliError::Config("--config <path> is required".into()))?;
    let ov = Overrides {
        out: cli.out,
        mode: cli.mode,
        thr: cli.thr.map(|t| t.0),
        seed: cli.seed,
        no_outlier_filter: cli.no_outlier_filter,
    };
    let cfg = RunConfig::load(&path, &ov)?;
    match cli.command {
        Command::Simulate => commands::simulate(&cfg),
        Command::CalibrateProjector => commands::calibrate_projector_cmd(&cfg),
        Command::Reconstruct => commands::reconstruct_cmd(&cfg),
        Command::Evaluate => commands::evaluate_cmd(&cfg),
        Command::PredictCandidates => commands::predict_candidates(&cfg),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fringefree: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
