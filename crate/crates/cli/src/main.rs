//! `mgame`: tables, simulations and sweeps for the cheat-proof minority-game
//! strategy.
//!
//! Exit codes: 0 success, 2 usage error, 3 numeric failure, 1 I/O error.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use crate::commands::Command;
use crate::config::{ConfigFile, RunManifest};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "mgame", version, about)]
struct Cli {
    /// Flat JSON object of settings; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for all outputs [env: MGAME_OUT_DIR, default: mgame-out].
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let plan = commands::plan(&cli.command, &file, cli.out_dir.clone())?;
    let mut manifest = RunManifest::new(cli.command.name(), plan.config.clone(), &plan.out_dir);
    let artifacts = plan.execute()?;
    let written = output::write_all(&plan.out_dir, &mut manifest, &artifacts)?;
    println!("{}", serde_json::to_string_pretty(&manifest).expect("serializable"));
    for path in written {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mgame: {e}");
            e.exit_code()
        }
    }
}
