//! `icelayer` — deterministic experiments on polar ice layer graphs:
//! synthetic data, sample building, training, evaluation, the multi-trial
//! protocol, gradient checks, and report merging.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
//! failure, 1 anything else. Outputs are reproducible given the seeds; in
//! bit-exact mode (the default) they are byte-identical across runs.

mod commands;
mod config;
mod error;

use std::process;

use clap::{Parser, Subcommand};

use crate::commands::{BuildArgs, EvalArgs, ReportArgs, RunArgs, SynthArgs};

#[derive(Parser)]
#[command(
    name = "icelayer",
    version,
    about = "Spatio-temporal graph networks over polar ice layer records"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate synthetic records (and optionally a climate table)
    Synth(SynthArgs),
    /// Materialize temporal samples from records
    Build(BuildArgs),
    /// Train one model; writes a checkpoint and an epoch history
    Train(RunArgs),
    /// Evaluate a checkpoint; prints an RMSE report
    Eval(EvalArgs),
    /// Run the multi-trial protocol; writes a trial report
    Trials(RunArgs),
    /// Finite-difference gradient checks over every layer
    Gradcheck,
    /// Merge trial reports into a comparison table
    Report(ReportArgs),
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Synth(a) => commands::synth(a),
        Cmd::Build(a) => commands::build(a),
        Cmd::Train(a) => commands::train(&a.overrides),
        Cmd::Eval(a) => commands::eval(a),
        Cmd::Trials(a) => commands::trials(&a.overrides),
        Cmd::Gradcheck => commands::gradcheck(),
        Cmd::Report(a) => commands::report(a),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        process::exit(e.class.code());
    }
}
