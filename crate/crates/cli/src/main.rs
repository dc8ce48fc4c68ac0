//! `mpt`: command-line front end for the planar magnetic Paul trap toolkit.

mod commands;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mpt_core::config::{parse_config, RunConfig};
use mpt_core::sweep::FigureId;

use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "mpt",
    version,
    about = "Planar magnetic Paul trap: fields, predictions, simulations and sweeps"
)]
struct Cli {
    /// Run configuration (.toml or .json); built-in defaults when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir` from the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for every random draw (overrides `seed` from the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweeps.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Only log errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

/// Overrides of the drive section.
#[derive(Debug, Clone, Args)]
pub struct DriveOverrides {
    /// Drive frequency Ω/(2π) in Hz.
    #[arg(long)]
    pub frequency_hz: Option<f64>,
    /// Inner trap-loop current amplitude in A.
    #[arg(long)]
    pub i_trap: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Axial field profile and coil calibration tables.
    Field {
        #[command(flatten)]
        drive: DriveOverrides,
        /// Half-length of the axial profile (m).
        #[arg(long, default_value_t = 1e-3)]
        z_span: f64,
        #[arg(long, default_value_t = 201)]
        points: usize,
        /// Largest calibration current (A).
        #[arg(long, default_value_t = 1.2)]
        max_current: f64,
        #[arg(long, default_value_t = 25)]
        current_steps: usize,
    },
    /// Closed-form secular and librational frequencies.
    Predict {
        #[command(flatten)]
        drive: DriveOverrides,
        /// Trap curvature |B1''| (T/m^2) instead of the field model's value.
        #[arg(long)]
        b1pp: Option<f64>,
        /// Bias field magnitude B0 (T) instead of the field model's value.
        #[arg(long)]
        b0: Option<f64>,
    },
    /// Mathieu parameter q_z and its stability class.
    Stability {
        #[command(flatten)]
        drive: DriveOverrides,
        #[arg(long)]
        b1pp: Option<f64>,
    },
    /// One trajectory from the configured operating point.
    Simulate {
        #[command(flatten)]
        drive: DriveOverrides,
    },
    /// Spectrum, Lorentzian or ringdown fit of one CSV column.
    Analyze(commands::AnalyzeArgs),
    /// Runs the `[sweep]` section of the configuration.
    Sweep,
    /// Reproduces one of the canned figure datasets.
    Figure {
        /// fig2a, fig2b, fig2c, fig2d, figS4a or figS4b.
        id: FigureId,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Field { .. } => "field",
            Command::Predict { .. } => "predict",
            Command::Stability { .. } => "stability",
            Command::Simulate { .. } => "simulate",
            Command::Analyze(_) => "analyze",
            Command::Sweep => "sweep",
            Command::Figure { .. } => "figure",
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => parse_config(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = load_config(cli)?;
    let workers = cli
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    match &cli.command {
        Command::Field {
            drive,
            z_span,
            points,
            max_current,
            current_steps,
        } => commands::field(&cfg, drive, *z_span, *points, *max_current, *current_steps),
        Command::Predict { drive, b1pp, b0 } => commands::predict(&cfg, drive, *b1pp, *b0),
        Command::Stability { drive, b1pp } => commands::stability(&cfg, drive, *b1pp),
        Command::Simulate { drive } => commands::simulate(&cfg, drive),
        Command::Analyze(args) => commands::analyze(&cfg, args),
        Command::Sweep => commands::sweep(&cfg, workers),
        Command::Figure { id } => commands::figure(&cfg, *id, workers),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.record(cli.command.name()));
            ExitCode::from(e.kind.exit_code() as u8)
        }
    }
}
