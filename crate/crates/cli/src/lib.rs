//! Command-line drivers for the resus-gne solver.

pub mod config;
pub mod error;
pub mod experiments;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::ScenarioConfig;
pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "resus-gne",
    version,
    about = "Distributed GNE seeking for resuscitation teams"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the configured scenario and write its trace and snapshots.
    Run(CommonArgs),
    /// Iterations and per-iteration time across team sizes.
    Sweep(CommonArgs),
    /// Discontinuous versus smoothed signum on the same scenario.
    Chatter(CommonArgs),
    /// Compare a small distributed run against the centralized oracle.
    Verify(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Key-value config file; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl CommonArgs {
    pub fn resolve(&self) -> CliResult<ScenarioConfig> {
        let mut cfg = match &self.config {
            Some(path) => ScenarioConfig::load(path)?,
            None => ScenarioConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn dispatch(command: &Command, stdout: &mut dyn Write) -> CliResult<i32> {
    let mut say = |s: String| {
        // a closed stdout must not turn a finished run into a failure
        let _ = stdout.write_all(s.as_bytes());
    };
    match command {
        Command::Run(a) => say(experiments::cmd_run(&a.resolve()?)?.render()),
        Command::Sweep(a) => say(experiments::cmd_sweep(&a.resolve()?)?.render()),
        Command::Chatter(a) => say(experiments::cmd_chatter(&a.resolve()?)?.render()),
        Command::Verify(a) => {
            let report = experiments::cmd_verify(&a.resolve()?)?;
            say(report.render());
            if !report.passed {
                return Ok(error::EXIT_MISMATCH);
            }
        }
    }
    Ok(error::EXIT_OK)
}

/// Runs a parsed command, printing to `stdout` and diagnostics to stderr.
/// Returns the process exit code.
pub fn execute(cli: &Cli, stdout: &mut dyn Write) -> i32 {
    match dispatch(&cli.command, stdout) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
