//! `nlkg-sim`: batch scenarios for the nonlinear Klein–Gordon simulator.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "nlkg-sim", version, about = "Pseudo-spectral NLKG scenarios and diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve the scenario and write the monitor series.
    Simulate(RunArgs),
    /// Evolve and audit the divergence identities of the configured tensors.
    AuditTensors(RunArgs),
    /// Evolve and evaluate the cone functionals, monitors and flux identity.
    Cones(RunArgs),
    /// Blowup analysis of a stored run (written with `save_snapshots = true`).
    Fit {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bubble decomposition of a stored run, or of the `[decompose]` family.
    Decompose {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        run: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the `[sweep]` grid of scenarios concurrently (cap: NLKG_WORKERS).
    Sweep(RunArgs),
    /// Check a scenario file against every precondition and exit.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `output.directory`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => {
            let cfg = commands::load(&a.config)?;
            commands::simulate(&cfg, &commands::default_out(&cfg, a.out))
        }
        Command::AuditTensors(a) => {
            let cfg = commands::load(&a.config)?;
            commands::audit_tensors(&cfg, &commands::default_out(&cfg, a.out))
        }
        Command::Cones(a) => {
            let cfg = commands::load(&a.config)?;
            commands::cones(&cfg, &commands::default_out(&cfg, a.out))
        }
        Command::Fit { run, out } => {
            let out = out.unwrap_or_else(|| run.join("fit"));
            commands::fit(&run, &out)
        }
        Command::Decompose { config, run, out } => {
            let out = match (&out, &run, &config) {
                (Some(o), _, _) => o.clone(),
                (None, Some(r), _) => r.join("decompose"),
                (None, None, Some(c)) => commands::default_out(&commands::load(c)?, None),
                (None, None, None) => anyhow::bail!("decompose needs --run or --config"),
            };
            commands::decompose(config.as_deref(), run.as_deref(), &out)
        }
        Command::Sweep(a) => {
            let cfg = commands::load(&a.config)?;
            commands::sweep(&cfg, &commands::default_out(&cfg, a.out))
        }
        Command::Validate { config } => {
            commands::load(&config)?.validate()?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
