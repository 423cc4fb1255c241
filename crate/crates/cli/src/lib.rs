//! The `ghic` command line: fetch -> prepare -> train -> evaluate ->
//! predict over GitHub issues and the nine default labels.

mod args;
mod commands;
mod pipeline;

use std::ffi::OsString;

use clap::error::ErrorKind;
use clap::Parser;

pub use args::{Cli, Command};

/// Parses and runs. Exit codes: 0 success, 1 pipeline error, 2 usage
/// error.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err)
            if matches!(
                err.kind(),
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion
            ) =>
        {
            print!("{err}");
            return 0;
        }
        Err(err) => {
            eprint!("{err}");
            return 2;
        }
    };
    match commands::execute(cli.command) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err:#}");
            1
        }
    }
}
