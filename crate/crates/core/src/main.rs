use std::io::{self, Write};
use std::process::ExitCode;

use clap::Parser;
use eikonal::cli::{run, Cli};
use eikonal::error::EXIT_USAGE;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE as u8) } else { ExitCode::SUCCESS };
        }
    };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let status = run(cli, &mut out);
    let _ = out.flush();
    match status {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
