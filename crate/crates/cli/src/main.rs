use std::process::ExitCode;

use clap::Parser;
use granusense_cli::cli::{execute, Cli};
use granusense_cli::run::exit_code;

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
