mod args;
mod commands;
mod report;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Train(a) => commands::train(a).map(|_| true),
        Command::Eval(a) => commands::eval(a).map(|_| true),
        Command::Forecast(a) => commands::forecast(a).map(|_| true),
        Command::InspectCodebook(a) => commands::inspect_codebook(a).map(|_| true),
        Command::Synth(a) => commands::synth(a).map(|_| true),
        Command::Verify(a) => commands::verify(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
