use std::process::ExitCode;

use clap::Parser;

use alien_ue::cli::{run, Cli};
use alien_ue::parallel;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = parallel::install(None, || run(cli)).map_err(anyhow::Error::from);
    match result.and_then(|r| r) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
