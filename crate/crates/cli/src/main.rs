//! `sparfa-lite`: synthesize graded-response data, fit the low-rank model,
//! evaluate it on held-out responses, and report tag knowledge.

mod commands;
mod error;
mod manifest;
mod table;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{analytics, eval, fit, synth};

#[derive(Debug, Parser)]
#[command(name = "sparfa-lite", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a synthetic low-rank dataset with ordinal labels.
    Synth(synth::SynthArgs),
    /// Fit the model to a responses file.
    Fit(fit::FitArgs),
    /// Repeated hold-out evaluation against the majority-label baseline.
    Eval(eval::EvalArgs),
    /// Tag knowledge report from a fitted matrix.
    Analytics(analytics::AnalyticsArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Synth(args) => synth::run(args),
        Command::Fit(args) => fit::run(args),
        Command::Eval(args) => eval::run(args),
        Command::Analytics(args) => analytics::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
