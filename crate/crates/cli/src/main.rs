//! `legiscout` command-line entry point.

mod args;
mod commands;
mod config;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};
use config::CliConfig;

fn run(cli: Cli) -> commands::Outcome {
    let mut cfg = CliConfig::resolve(cli.config.as_deref(), |k| std::env::var(k).ok()).map_err(commands::Failure::Usage)?;
    if let Some(f) = cli.format {
        cfg.format = f;
    }
    cfg.lenient |= cli.lenient;
    log::debug!("effective config: {cfg:?}");
    match &cli.command {
        Command::Validate { bundle } => commands::validate(bundle, &cfg),
        Command::Layout(a) => commands::layout(a, &cfg),
        Command::Index(a) => commands::index(a, &cfg),
        Command::Search(a) => commands::search(a, &cfg),
        Command::Extract(a) => commands::extract(a, &cfg),
        Command::Serve(a) => commands::serve(a, &cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(64),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
