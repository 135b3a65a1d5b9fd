mod args;
mod commands;
mod failure;
mod ingest;

use std::process::ExitCode as ProcessExit;

use clap::error::ErrorKind;
use clap::Parser;

use crate::args::{Cli, Command, THREADS_ENV};
use crate::failure::{CliResult, Failure};

fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| Failure::usage(format!("{THREADS_ENV} must be a positive integer, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::usage(format!("cannot configure thread pool: {e}")))
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    match &cli.command {
        Command::Analyze(a) => commands::analyze(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Generate(a) => commands::generate(a),
    }
}

fn main() -> ProcessExit {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ProcessExit::SUCCESS,
                _ => ProcessExit::from(failure::ExitCode::Usage as u8),
            };
        }
    };
    match run(cli) {
        Ok(()) => ProcessExit::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ProcessExit::from(f.code as u8)
        }
    }
}
