//! `mismatch-lab`: scan synthesis and analysis, attack sweeps, pinhole
//! evaluation and Monte Carlo validation.
//!
//! Exit status: 0 on success, 1 when a validation check fails, 2 on usage
//! or input errors.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "mismatch-lab", version, about = "Detector-efficiency-mismatch attack lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ThresholdSet {
    /// Per-polarization attack-angle thresholds of the original attack.
    Paper,
    /// eta >= 0.001 and delta >= 4 for every polarization.
    Tight,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Match Bob's total sifted rate.
    Total,
    /// Match each conditional sifted rate.
    Perpol,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesize a normalized efficiency map (or raw counts) from a preset.
    GenerateScan {
        #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(mismatch_core::scanmap::ScanPreset::NAMES))]
        preset: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Write raw counts with background instead of the normalized map.
        #[arg(long)]
        raw: bool,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Search a map for attack angles.
    AnalyzeScan {
        #[arg(long)]
        map: PathBuf,
        /// Threshold set; defaults to the config's thresholds, else `paper`.
        #[arg(long, value_enum)]
        thresholds: Option<ThresholdSet>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Baseline and optimized attack over the configured loss grid.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides `optimizer.mode` from the config.
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Apply a pinhole to a map and report whether any mismatch survives.
    Countermeasure {
        #[arg(long)]
        map: PathBuf,
        /// Pinhole angular diameter in urad; `inf` disables the filter.
        #[arg(long)]
        fov_urad: f64,
        /// Gaussian roll-off scale outside the pinhole radius, urad.
        #[arg(long, default_value_t = 10.0)]
        edge_urad: f64,
        #[arg(long, value_enum, default_value = "tight")]
        thresholds: ThresholdSet,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Compare the closed-form rates with a pulse-level simulation.
    Montecarlo {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1_000_000)]
        n_pulses: u64,
        /// Link loss for both scenarios.
        #[arg(long, default_value_t = 6.0)]
        loss_db: f64,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenerateScan { preset, seed, raw, out } => commands::generate_scan(&preset, seed, raw, out.as_deref()),
        Command::AnalyzeScan {
            map,
            thresholds,
            config,
            out,
        } => commands::analyze_scan(&map, thresholds, config.as_deref(), out.as_deref()),
        Command::Sweep { config, mode, out } => commands::sweep(config.as_deref(), mode, out.as_deref()),
        Command::Countermeasure {
            map,
            fov_urad,
            edge_urad,
            thresholds,
            out,
        } => commands::countermeasure(&map, fov_urad, edge_urad, thresholds, out.as_deref()),
        Command::Montecarlo {
            config,
            n_pulses,
            loss_db,
            out,
        } => commands::montecarlo(config.as_deref(), n_pulses, loss_db, out.as_deref()),
    };
    match result {
        Ok(commands::Outcome::Success) => ExitCode::SUCCESS,
        Ok(commands::Outcome::CheckFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
