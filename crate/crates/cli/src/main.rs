mod args;
mod commands;
mod error;
mod settings;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};
use error::CliResult;
use settings::{read_config_file, RunConfig};

fn run(cli: &Cli) -> CliResult<()> {
    let mut settings = match &cli.command.common().config {
        Some(path) => read_config_file(path)?,
        None => Vec::new(),
    };
    settings.extend(cli.command.settings());
    let cfg = RunConfig::resolve(&settings)?;
    match &cli.command {
        Command::Validate { .. } => commands::validate(&cfg),
        Command::Train { .. } => commands::train(&cfg),
        Command::Evaluate { .. } => commands::evaluate(&cfg),
        Command::Ablate { .. } => commands::ablate_cmd(&cfg),
        Command::Sweep { .. } => commands::sweep(&cfg),
        Command::Spectral { .. } => commands::spectral(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(4),
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {} failed: {e}", cli.command.name());
            e.exit_code()
        }
    }
}
