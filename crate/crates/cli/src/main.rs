use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use coliseum_cli::{commands, CliError, RunConfig};

/// Random polynomial dynamics: escape-probability fields and their analysis.
#[derive(Parser)]
#[command(name = "coliseum", version)]
struct Cli {
    /// TOML run configuration; the reference system is used when omitted.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Override a config key by dotted path, e.g. `--set grid.size=512`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Escape field, Julia raster and backward cloud.
    Render,
    /// Closed forms, level sets, audits and estimates as JSON.
    Analyze,
    /// Run the verification checks; exits 3 if any fails.
    Verify,
    /// Sweep a one-dimensional singular function.
    Staircase,
    /// Classify a three-generator system.
    Classify3,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = RunConfig::load(cli.config.as_deref(), &cli.overrides)?;
    let paths = match cli.command {
        Command::Render => commands::cmd_render(&config)?,
        Command::Analyze => commands::cmd_analyze(&config)?.1,
        Command::Verify => commands::cmd_verify(&config, |line| eprintln!("{line}"))?.1,
        Command::Staircase => commands::cmd_staircase(&config)?,
        Command::Classify3 => commands::cmd_classify3(&config)?.1,
    };
    for p in paths {
        println!("{}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("coliseum: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
