//! `adeim`: full-order and adaptive reduced runs of the rotating-detonation
//! model, with comparison, parameter sweeps and timing.
//!
//! Exit status is 0 on success, 1 when a run fails numerically and 2 for
//! usage, config and file errors.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use adeim_core::driver::ModelKind;
use clap::{Parser, Subcommand};

use crate::config::{ConfigFile, Overrides, DEFAULT_TOML};
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "adeim", version, about = "Adaptive reduced models with lookahead sampling")]
struct Cli {
    /// TOML config, or the manifest.json of an earlier run
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,

    /// More log output (-v info, -vv debug)
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full-order model
    Fom,
    /// Run the adaptive reduced model next to the full model and report the error
    Rom,
    /// Compare the stored states of two earlier runs
    Compare {
        /// Output directory of the reference run
        reference: PathBuf,
        /// Output directory of the run to assess
        candidate: PathBuf,
    },
    /// Final-time max η over a range of injection parameters
    Bifurcation {
        #[arg(long)]
        mu_min: f64,
        #[arg(long)]
        mu_max: f64,
        #[arg(long, default_value_t = 11)]
        mu_steps: usize,
        #[arg(long, default_value = "rom")]
        model: ModelKind,
        /// Worker threads for independent runs
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Time full and reduced runs
    Bench {
        #[arg(long, default_value_t = 3)]
        repeats: usize,
    },
    /// Print the documented default config
    Defaults,
}

fn load_config(cli: &Cli) -> Result<ConfigFile, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    cli.overrides.apply(&mut cfg);
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Defaults => {
            print!("{DEFAULT_TOML}");
            Ok(())
        }
        Command::Fom => commands::fom(&load_config(&cli)?),
        Command::Rom => commands::rom(&load_config(&cli)?),
        Command::Compare {
            reference,
            candidate,
        } => commands::compare_cmd(reference, candidate, cli.overrides.out.as_deref()),
        Command::Bifurcation {
            mu_min,
            mu_max,
            mu_steps,
            model,
            jobs,
        } => {
            let mus = commands::mu_grid(*mu_min, *mu_max, *mu_steps)?;
            let cfg = load_config(&cli)?;
            for p in commands::bifurcation(&cfg, &mus, *model, *jobs)? {
                println!("{:.6} {:.6}", p.mu, p.max_eta.unwrap_or(f64::NAN));
            }
            Ok(())
        }
        Command::Bench { repeats } => commands::bench_cmd(&load_config(&cli)?, *repeats),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
