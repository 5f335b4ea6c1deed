//! `qaction`: run the model families from the command line and write
//! machine-readable tables. Exit codes: 0 success, 2 bad settings, 3 a
//! numerical contract failed during the run.

mod config;
mod output;
mod runner;
mod sweep;

use clap::Parser;
use std::process::ExitCode;

fn main() -> ExitCode {
    let cli = config::Cli::parse();
    match runner::dispatch(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
