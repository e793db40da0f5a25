//! Command-line front end: trace/spec ingestion, experiment orchestration,
//! and report emission.
//!
//! Exit codes: 0 success, 1 usage error, 2 validation failure, 3 oracle
//! mismatch.

mod commands;
mod formats;

use clap::error::ErrorKind;
use clap::Parser;

use commands::{Cli, ExitCode};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version are successful outputs; everything else is
            // a usage error.
            match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{}", e);
                    std::process::exit(0);
                }
                _ => {
                    eprintln!("{}", e);
                    std::process::exit(1);
                }
            }
        }
    };
    match commands::run(cli) {
        Ok(ExitCode::Ok) => {}
        Ok(ExitCode::OracleMismatch) => std::process::exit(3),
        Err(e) => {
            eprintln!("error: {:#}", e);
            std::process::exit(2);
        }
    }
}
