use std::process::ExitCode;

use clap::Parser;
use tensorstat_cli::commands::{run, Cli};

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("tensorstat: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
