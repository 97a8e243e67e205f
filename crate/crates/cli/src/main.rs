//! `geoadapt` command-line entry point.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 runtime failure.

mod commands;
mod config;

use std::fmt::Display;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(msg: impl Display) -> Self {
        Self {
            code: 2,
            message: msg.to_string(),
        }
    }

    pub fn runtime(msg: impl Display) -> Self {
        Self {
            code: 3,
            message: msg.to_string(),
        }
    }
}

/// Bad inputs (missing files, malformed documents, invalid values) are usage
/// errors; anything else that fails mid-run is a runtime failure.
impl From<geoadapt::Error> for CliError {
    fn from(e: geoadapt::Error) -> Self {
        use geoadapt::Error as E;
        match &e {
            E::InvalidArgument(_) | E::MissingData(_) | E::Json(_) | E::Csv(_) => Self::usage(e),
            E::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => Self::usage(e),
            _ => Self::runtime(e),
        }
    }
}

#[derive(Parser)]
#[command(name = "geoadapt", version, about = "Adversarial domain adaptation experiments on synthetic city tiles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render one manifest per domain of a benchmark preset.
    GenData(commands::GenDataArgs),
    /// Train per an experiment config, once per seed.
    Train(commands::TrainArgs),
    /// Target IoU of a checkpoint on a manifest, optionally with panels.
    Eval(commands::EvalArgs),
    /// Rank source/target pairs by label-distribution separability.
    Gap(commands::GapArgs),
    /// Build the IoU table from run records.
    Report(commands::ReportArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::GenData(a) => commands::gen_data(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Gap(a) => commands::gap(a),
        Command::Report(a) => commands::report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
