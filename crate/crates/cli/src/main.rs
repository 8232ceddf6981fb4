mod args;
mod output;
mod run;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(64),
            };
        }
    };
    let result = match &cli.command {
        Command::Solve(a) => run::cmd_solve(a),
        Command::Sweep(a) => run::cmd_sweep(a),
        Command::Trajectory(a) => run::cmd_trajectory(a),
        Command::Validate(a) => run::cmd_validate(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("shocklayer: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
