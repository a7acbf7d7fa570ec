use std::process::ExitCode;

use clap::Parser;
use rhodot::cli::{execute, Cli};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    execute(Cli::parse())
}
