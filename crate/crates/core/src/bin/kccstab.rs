use std::process::ExitCode;

use clap::Parser;
use kccstab::cli::{configure_threads, exit_code, run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match configure_threads().and_then(|()| run(cli, &mut out)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kccstab: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
