mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use commands::{CliError, EXIT_IO};

/// Caps the rayon pool when `EXACTBPDN_THREADS` is set.
fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("EXACTBPDN_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::input(format!("EXACTBPDN_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::input(e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match &cli.command {
        Command::Solve(a) => commands::solve(a),
        Command::Path(a) => commands::path(a),
        Command::Feasible(a) => commands::feasible(a),
        Command::Verify(a) => commands::verify(a),
        Command::Bench(a) => commands::bench(a),
        Command::Gen(a) => commands::gen(a),
    }
}

fn main() -> ExitCode {
    // Usage errors share exit code 1 with I/O errors; 2 and 3 are reserved for solver outcomes.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_IO);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
