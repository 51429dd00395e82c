use std::process::ExitCode;

use clap::Parser;
use lambdacoal_cli::config::Cli;

fn main() -> ExitCode {
    match lambdacoal_cli::run(Cli::parse()) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
