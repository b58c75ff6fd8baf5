//! `smap`: builds matched blow-up profiles, evaluates residuals, runs the flow
//! and writes CSV tables with JSON manifests.

mod commands;
mod config;
mod error;
mod output;

use clap::Parser;
use commands::Command;
use config::Config;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(name = "smap", version, about = "Approximate blow-up solutions of the equivariant Schrodinger map flow", after_long_help = config::schema_help())]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Flat `key = value` config file; unset keys take their defaults.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Set one config key after the file is read; repeatable.
    #[arg(long = "override", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = Config::load(cli.config.as_deref(), &cli.overrides).and_then(|c| {
        eprintln!("{} config_hash={}", cli.command.name(), c.hash());
        commands::run(cli.command, &c, &cli.out)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
