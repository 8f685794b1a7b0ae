use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use dskg_lab::cli::{error_code, run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let code = match run(cli, &mut out) {
        Ok(status) => status.code(),
        Err(e) => {
            eprintln!("error: {e}");
            error_code(&e)
        }
    };
    let _ = out.flush();
    ExitCode::from(code)
}
