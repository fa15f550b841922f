//! Library half of the `purify` binary: argument definitions, config
//! resolution and the subcommands.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use args::{Cli, Command};
use error::CliResult;

pub fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Protocol(a) => commands::protocol(a),
        Command::Spectrum(a) => commands::spectrum(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Verify(a) => commands::verify(a),
    }
}
