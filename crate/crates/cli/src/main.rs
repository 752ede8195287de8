use std::process::ExitCode;

use clap::Parser;
use subgpr_cli::args::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match subgpr_cli::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("subgpr: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
