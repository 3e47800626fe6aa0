//! `hanslens`: fit anomaly detectors, score and explain samples, and audit
//! the gap between detection and explanation accuracy.

mod commands;
mod errors;
mod meta;
mod par;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "hanslens",
    version,
    about = "Anomaly detectors with relevance-based explanations and Clever Hans auditing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic class dataset.
    Synth(commands::synth::SynthArgs),
    /// Fit a detector (kde, auto, deep) on a class dataset.
    Fit(commands::fit::FitArgs),
    /// Score a split with a fitted detector; writes scores.csv.
    Score(commands::score::ScoreArgs),
    /// Write heatmap file pairs for every test outlier.
    Explain(commands::explain::ExplainArgs),
    /// Detection/explanation accuracy and Clever Hans report per class.
    Evaluate(commands::evaluate::EvaluateArgs),
    /// Build the bagged detector from fitted or freshly fitted members.
    Bag(commands::bag::BagArgs),
    /// Residual table of the distance-to-the-mean view of the KDE score.
    DiagKde(commands::diag::DiagKdeArgs),
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Synth(args) => commands::synth::run(args),
        Command::Fit(args) => commands::fit::run(args),
        Command::Score(args) => commands::score::run(args),
        Command::Explain(args) => commands::explain::run(args),
        Command::Evaluate(args) => commands::evaluate::run(args),
        Command::Bag(args) => commands::bag::run(args),
        Command::DiagKde(args) => commands::diag::run(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
