//! `webnav` command-line entry point.

mod args;
mod run;

use std::process::ExitCode;

use clap::Parser;
use webnav::sim::fixtures;

use args::{Cli, Command};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Sites => {
            for spec in fixtures::all() {
                println!("{}", spec.name);
            }
            ExitCode::SUCCESS
        }
        Command::Run(args) => match run::run(&args) {
            Ok(report) => {
                print!("{report}");
                log::info!("outputs written to {}", args.out.display());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("webnav: {e}");
                ExitCode::FAILURE
            }
        },
    }
}
