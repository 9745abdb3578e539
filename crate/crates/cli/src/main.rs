//! Command-line pipeline: synthetic corpora, CTC alignment, interleaved
//! dataset construction, duration-model training, latency simulation, and
//! evaluation.

use anyhow::Result;
use clap::{Parser, Subcommand};

mod commands;
mod config;
mod output;

use commands::{align, build, dp, eval, gen, simulate};

#[derive(Parser)]
#[command(name = "speechweave", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Commands,
}

#[derive(Subcommand)]
enum Commands {
    /// Generate a synthetic corpus with ground-truth alignments.
    GenSynthetic(gen::GenSyntheticArgs),
    /// Forced-align every record, writing per-word token boundaries.
    Align(align::AlignArgs),
    /// Render interleaved (or full chain-of-modality) training examples.
    Build(build::BuildArgs),
    /// Train the duration predictor on a manifest's run counts.
    TrainDp(dp::TrainDpArgs),
    /// Predict repeat counts for every record with a trained model.
    PredictDp(dp::PredictDpArgs),
    /// Compare interleaved vs full chain-of-modality latency.
    Simulate(simulate::SimulateArgs),
    /// Evaluation metrics over JSONL inputs.
    Eval(eval::EvalArgs),
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Commands::GenSynthetic(args) => gen::run(args),
        Commands::Align(args) => align::run(args),
        Commands::Build(args) => build::run(args),
        Commands::TrainDp(args) => dp::run_train(args),
        Commands::PredictDp(args) => dp::run_predict(args),
        Commands::Simulate(args) => simulate::run(args),
        Commands::Eval(args) => eval::run(args),
    }
}
