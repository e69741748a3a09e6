//! `lsc`: batch pipeline for lexical semantic change detection between two
//! corpora. Every run persists its effective configuration next to its
//! outputs; single-threaded runs are bit-reproducible for a fixed seed.

mod config;
mod run;

use clap::{Parser, Subcommand};

use config::{Overrides, RunConfig, SweepArgs, SynthArgs};

#[derive(Parser, Debug)]
#[command(
    name = "lsc",
    version,
    about = "Lexical semantic change detection between two corpora"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train skip-gram embeddings for both corpora and persist them.
    Train(Overrides),
    /// Align the spaces, extract change features, and write scores plus
    /// answer files (trains embeddings first if not cached).
    Score(Overrides),
    /// Evaluate previously written answer files against gold labels.
    Eval(Overrides),
    /// Re-align and re-score across a grid of landmark counts.
    Sweep(SweepArgs),
    /// Generate a synthetic-shift corpus pair with gold labels.
    Synth(SynthArgs),
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    if let Err(err) = dispatch(Cli::parse()) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Train(args) => run::train(&prep(args.resolve())?),
        Command::Score(args) => run::score(&prep(args.resolve())?),
        Command::Eval(args) => run::eval(&prep(args.resolve())?),
        Command::Sweep(args) => run::sweep(&prep(args.resolve())?),
        Command::Synth(args) => run::synth(&prep(args.resolve())?),
    }
}

fn prep(resolved: anyhow::Result<RunConfig>) -> anyhow::Result<RunConfig> {
    let cfg = resolved.map_err(|e| e.context("stage config"))?;
    run::setup_threads(cfg.threads);
    Ok(cfg)
}
