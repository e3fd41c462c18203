use std::process::ExitCode;

use clap::Parser;
use seqfdr_cli::{run, Cli};

fn main() -> ExitCode {
    ExitCode::from(run(Cli::parse()))
}
