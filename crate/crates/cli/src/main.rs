mod args;
mod commands;
mod error;
mod io;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{CalibrateCommand, Cli, Command, OracleCommand, RunCommand};
use error::CliResult;

fn dispatch(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Pvalues(a) => commands::pvalues::run(a),
        Command::Bound(a) => commands::bound::run(a),
        Command::Calibrate(CalibrateCommand::Template(a)) => commands::calibrate::template(a),
        Command::Calibrate(CalibrateCommand::Level(a)) => commands::calibrate::level(a),
        Command::Pi(RunCommand::Run(a)) => commands::pi::run(a),
        Command::Nd(RunCommand::Run(a)) => commands::nd::run(a),
        Command::Oracle(OracleCommand::Verify(a)) => commands::oracle::run(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
