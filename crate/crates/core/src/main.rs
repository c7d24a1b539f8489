use std::process::ExitCode;

use clap::Parser;
use iterjump::cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut stdout = std::io::stdout().lock();
    let mut stderr = std::io::stderr();
    match run(&cli, &mut stdout, &mut stderr) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("iterjump: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
