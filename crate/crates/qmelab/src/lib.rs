//! Command-line runner around `qmelab-core`: TOML configs, CSV/JSON outputs
//! with a hashed manifest, and the exit-code contract.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod emit;
pub mod error;
pub mod plot;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use qmelab_core::consistency::CheckReport;

use crate::config::{Resolved, RunConfig};
use crate::emit::Emitter;
use crate::error::AppError;

#[derive(Debug, Parser)]
#[command(name = "qmelab", version, about = "Thermodynamic consistency of quantum master equations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration; the three-level preset when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output.directory`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for the exact oracle and random samples (overrides the config).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; all cores when omitted.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Run the consistency suite for the configured scheme.
    Check,
    /// Thermodynamic trajectory and MGF scan.
    Evolve,
    /// Work fluctuation theorem scan.
    Ft,
    /// Steady state of the untilted generator.
    Steady,
    /// Exact random-matrix bath against every scheme.
    Oracle,
    /// Data and plot script for the two-panel figure.
    Fig2,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Check => "check",
            Command::Evolve => "evolve",
            Command::Ft => "ft",
            Command::Steady => "steady",
            Command::Oracle => "oracle",
            Command::Fig2 => "fig2",
        }
    }
}

pub const EXIT_OK: u8 = 0;
pub const EXIT_CHECK_FAILED: u8 = 1;

/// Parses and validates the configuration named on the command line.
pub fn resolve(cli: &Cli) -> Result<Resolved, AppError> {
    let (mut config, base) = match &cli.config {
        Some(p) => (RunConfig::load(p)?, p.parent().map(Path::to_path_buf).unwrap_or_default()),
        None => (RunConfig::doublet(), PathBuf::from(".")),
    };
    if let Some(seed) = cli.seed {
        config.oracle.seed = seed;
        config.counting.sample_seed = seed;
    }
    if let Some(out) = &cli.out {
        config.output.directory = Some(out.clone());
    }
    Resolved::new(config, &base)
}

fn dispatch(cmd: Command, r: &Resolved, em: &mut Emitter) -> Result<Vec<CheckReport>, AppError> {
    match cmd {
        Command::Check => commands::cmd_check(r, em),
        Command::Evolve => commands::cmd_evolve(r, em),
        Command::Ft => commands::cmd_ft(r, em),
        Command::Steady => commands::cmd_steady(r, em),
        Command::Oracle => commands::cmd_oracle(r, em),
        Command::Fig2 => commands::cmd_fig2(r, em),
    }
}

/// Runs one subcommand and returns the process exit code.
pub fn run(cli: &Cli) -> u8 {
    match try_run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("qmelab: {e}");
            e.exit_code()
        }
    }
}

fn try_run(cli: &Cli) -> Result<u8, AppError> {
    let start = Instant::now();
    let r = resolve(cli)?;
    if cli.command == Command::Fig2 && !r.config.oracle.enabled {
        return Err(AppError::Config(
            "fig2 compares against the exact oracle; set `enabled = true` under [oracle] in the config".into(),
        ));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers.unwrap_or(0))
        .build()
        .map_err(|e| AppError::Config(format!("cannot start {} workers: {e}", cli.workers.unwrap_or(0))))?;
    let dir = r.config.output.directory.clone().unwrap_or_else(|| PathBuf::from("out"));
    let mut em = Emitter::new(&dir)?;
    let reports = pool.install(|| dispatch(cli.command, &r, &mut em))?;
    for rep in &reports {
        println!(
            "{:<22} {:<5} residual={} tolerance={}",
            rep.check,
            verdict_word(rep),
            emit::fmt_f64(rep.residual),
            emit::fmt_f64(rep.tolerance)
        );
    }
    em.finish(cli.command.name(), &r.config, start.elapsed().as_secs_f64())?;
    Ok(if reports.iter().all(CheckReport::passed) { EXIT_OK } else { EXIT_CHECK_FAILED })
}

fn verdict_word(r: &CheckReport) -> &'static str {
    if r.passed() {
        "pass"
    } else {
        "FAIL"
    }
}
