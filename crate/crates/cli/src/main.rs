//! `cmsynth`: command-line workbench for characteristic-mode array synthesis.

mod commands;
mod config;
mod output;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cmsynth_core::{Error, Result};

use commands::{Options, Run};
use config::{RunConfig, DEFAULT_OUTPUT_DIR, OUTPUT_ENV, SCHEMA};
use output::OutputDir;

#[derive(Debug, Parser)]
#[command(name = "cmsynth", version, about = "Array synthesis under mutual coupling with characteristic modes")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration (JSON).
    #[arg(long, global = true, value_name = "PATH", conflicts_with = "builtin")]
    config: Option<PathBuf>,

    /// Use a builtin layout with its default configuration.
    #[arg(long, global = true, value_name = "NAME")]
    builtin: Option<String>,

    /// Output directory; overrides $CMSYNTH_OUT and the config.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Seed for randomized drive vectors.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Drop inter-element coupling (G = 0).
    #[arg(long, global = true)]
    no_coupling: bool,

    /// Also run the direct MoM solve and report relative errors (solve).
    #[arg(long, global = true)]
    oracle: bool,

    /// Override the synthesis iteration cap.
    #[arg(long, global = true, value_name = "N")]
    max_iter: Option<usize>,

    /// Override the number of modes kept per element.
    #[arg(long, global = true, value_name = "N")]
    n_modes: Option<usize>,

    /// Drive vector file: JSON list of [re, im] port waves (solve).
    #[arg(long, global = true, value_name = "PATH")]
    drive: Option<PathBuf>,

    /// Re-evaluate a stored synthesis result instead of iterating (synth).
    #[arg(long, global = true, value_name = "PATH")]
    result: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Characteristic modes and eigenvalue table per element.
    Modes,
    /// Full impedance matrix.
    Assemble,
    /// Element GSMs and the modal coupling matrix.
    Couple,
    /// Coupled solution for a drive vector, with far-field cuts.
    Solve,
    /// Iterative cross-polarization synthesis with before/after evaluation.
    Synth,
    /// Coupled model against the direct MoM solve for random drives.
    Oracle,
    /// Print the run-configuration JSON schema.
    Schema,
}

fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match (&cli.config, &cli.builtin) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Some(name)) => RunConfig::builtin(name)?,
        (None, None) => return Err(Error::Config("either --config PATH or --builtin NAME is required".into())),
    };
    if let Some(n) = cli.n_modes {
        cfg.n_modes = Some(n);
    }
    if let Some(n) = cli.max_iter {
        cfg.synthesis.max_iterations = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn output_dir(cli: &Cli, cfg: &RunConfig) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| std::env::var_os(OUTPUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
}

fn run(cli: Cli) -> Result<String> {
    if let Command::Schema = cli.command {
        return Ok(SCHEMA.to_string());
    }
    let cfg = resolve_config(&cli)?;
    let geometry = cfg.geometry()?;
    let out = OutputDir::create(output_dir(&cli, &cfg))?;
    let mut run = Run {
        cfg,
        geometry,
        opts: Options {
            seed: cli.seed,
            coupling: !cli.no_coupling,
            oracle: cli.oracle,
            drive_file: cli.drive.clone(),
            result_file: cli.result.clone(),
        },
        out,
    };
    let mut summary = match cli.command {
        Command::Modes => commands::modes(&mut run)?,
        Command::Assemble => commands::assemble(&mut run)?,
        Command::Couple => commands::couple_cmd(&mut run)?,
        Command::Solve => commands::solve(&mut run)?,
        Command::Synth => commands::synth(&mut run)?,
        Command::Oracle => commands::oracle(&mut run)?,
        Command::Schema => unreachable!(),
    };
    summary.push_str(&format!("wrote {} files to {}\n", run.out.written().len(), run.out.root().display()));
    Ok(summary)
}

/// Exit code for an error: 2 for bad input, 3 for numerical failures.
fn exit_code(e: &Error) -> u8 {
    if e.is_input_error() {
        2
    } else {
        3
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let body = serde_json::json!({ "error": { "kind": e.kind(), "message": e.to_string() } });
            let _ = writeln!(std::io::stderr(), "{body}");
            ExitCode::from(exit_code(&e))
        }
    }
}
