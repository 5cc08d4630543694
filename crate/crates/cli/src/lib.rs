//! Command-line front end over the core library: experiment configuration,
//! subcommand dispatch, and deterministic artifact emission.
//!
//! Every subcommand resolves its parameters by merging command-line flags
//! over an optional flat key-value config file over built-in defaults, then
//! writes the resolved merge into the run directory as `config.txt` before
//! producing results. Re-running from that snapshot reproduces the outputs
//! byte for byte; no artifact contains a timestamp.

pub mod commands;
pub mod config;

use std::ffi::OsString;

use clap::Parser;

use commands::Cli;

/// Parses `argv` (including the program name) and runs the selected
/// subcommand. Returns the process exit status: 0 on success, 1 on
/// pipeline failure, 2 on usage errors.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version requests print to stdout and report success;
            // everything else is a usage error.
            let code = err.exit_code();
            let _ = err.print();
            return code;
        }
    };
    match cli.command.execute() {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            1
        }
    }
}
