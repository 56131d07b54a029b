mod cli;
mod commands;
mod output;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use cli::Cli;
use output::{Failure, RunConfig, EXIT_DOMAIN, EXIT_OK, EXIT_USAGE};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => EXIT_USAGE,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("lsr {}: {}", cli.command.name(), f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: &Cli) -> Result<u8, Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(Failure::domain)?;
    }
    let config = RunConfig {
        subcommand: cli.command.name().to_string(),
        parameters: serde_json::to_value(&cli.command).map_err(Failure::domain)?,
        seed: cli.command.seed(),
        format: cli.format,
        output: cli.output.as_ref().map(|p| p.display().to_string()),
    };
    let outcome = commands::run(&cli.command)?;
    output::write(&outcome, &config, cli.output.as_deref()).map_err(|e| Failure {
        code: EXIT_DOMAIN,
        message: format!("writing output: {e}"),
    })?;
    Ok(outcome.code)
}
