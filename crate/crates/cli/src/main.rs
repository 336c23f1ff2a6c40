mod args;
mod commands;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};
use commands::Failure;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return report(Failure::Usage(e.render().to_string())),
    };
    let outcome = match cli.command {
        Command::Eval(a) => commands::eval(&a),
        Command::Grid(a) => commands::grid(&a),
        Command::Verify(a) => commands::verify(&a),
    };
    match outcome {
        Ok(code) => code,
        Err(f) => report(f),
    }
}

fn report(failure: Failure) -> ExitCode {
    println!("{}", failure.to_json());
    ExitCode::from(failure.exit_code())
}
