//! Single-binary pipeline: corpus generation, bank training, detection, and
//! the experiment harnesses, glued together by config hashing so mismatched
//! artifacts are caught early. All numeric work lives in the library; this
//! binary only resolves configs, moves files, and prints reports.

mod commands;
mod config;
mod corpus;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "corrfad",
    version,
    about = "Correlation-filter face detection: train scale/pose filter banks on repeated settings, detect, and reproduce the evaluation protocols"
)]
struct Cli {
    /// Worker threads for data-parallel stages (default: available
    /// parallelism). Results do not depend on the worker count.
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic annotated corpus (PGM frames + CSV annotations
    /// + manifest).
    Synth(commands::synth::SynthArgs),
    /// Train a scale/pose filter bank from an annotated corpus.
    Train(commands::train::TrainArgs),
    /// Run a bank against a corpus split and write ranked detections JSON.
    Detect(commands::detect::DetectArgs),
    /// Experiment harnesses producing reports and plot-ready CSV curves.
    #[command(subcommand)]
    Eval(commands::eval::EvalCommand),
}

fn main() {
    let cli = Cli::parse();
    if let Some(workers) = cli.workers {
        // Best effort; a pool may already exist in tests.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global();
    }
    let result = match cli.command {
        Command::Synth(args) => commands::synth::run(args),
        Command::Train(args) => commands::train::run(args),
        Command::Detect(args) => commands::detect::run(args),
        Command::Eval(cmd) => commands::eval::run(cmd),
    };
    if let Err(err) = result {
        // One machine-parsable line: class first, then the human message.
        eprintln!("error[{}]: {err}", err.class());
        std::process::exit(1);
    }
}
