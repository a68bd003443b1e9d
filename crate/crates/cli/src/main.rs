//! `crossmpt` command-line workbench.

mod commands;
mod io;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{AttnDumpArgs, CodeInfoArgs, EvalArgs, FlopsArgs, InitArgs, MaskStatsArgs, TrainArgs};

#[derive(Parser)]
#[command(name = "crossmpt", version, about = "Error-correcting-code workbench with transformer and classical decoders")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dimensions, rank and degree profile of a parity-check matrix.
    CodeInfo(CodeInfoArgs),
    /// Attention-mask densities as CSV.
    MaskStats(MaskStatsArgs),
    /// Write a freshly initialized checkpoint.
    Init(InitArgs),
    /// Train a decoder; writes a checkpoint and a loss CSV.
    Train(TrainArgs),
    /// Monte-Carlo BER/FER of a decoder.
    Eval(EvalArgs),
    /// Attention scores of a trained decoder on a probe word.
    AttnDump(AttnDumpArgs),
    /// FLOP counts of both architectures.
    Flops(FlopsArgs),
}

/// A failure with its exit status: 1 for bad input, 2 for internal faults.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    User(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn user(e: impl std::fmt::Display) -> Self {
        CliError::User(e.to_string())
    }

    pub fn internal(e: impl std::fmt::Display) -> Self {
        CliError::Internal(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::CodeInfo(a) => commands::code_info(a),
        Command::MaskStats(a) => commands::mask_stats(a),
        Command::Init(a) => commands::init(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::AttnDump(a) => commands::attn_dump(a),
        Command::Flops(a) => commands::flops(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("crossmpt: {e}");
            ExitCode::from(match e {
                CliError::User(_) => 1,
                CliError::Internal(_) => 2,
            })
        }
    }
}
