use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use tagcn::cli::{error_json, run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    match run(cli, &mut stdout.lock(), &mut stderr.lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = writeln!(stderr.lock(), "{}", error_json(&e));
            ExitCode::FAILURE
        }
    }
}
