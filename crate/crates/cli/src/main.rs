use std::process::ExitCode;

use cavity_purify_cli::args::Cli;
use cavity_purify_cli::error::{EXIT_CONFIG, EXIT_OK};
use clap::Parser;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match cavity_purify_cli::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("purify: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
