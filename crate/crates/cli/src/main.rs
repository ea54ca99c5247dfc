//! `licensekit` command-line front end.

mod analysis;
mod corpus_cmd;
mod eval_cmd;
mod models_cmd;
mod prompts_cmd;
mod serve_cmd;

use clap::{Parser, Subcommand};
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "licensekit", version, about = "Dataset-license compliance evaluation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load, clean, sample and export license corpora.
    #[command(subcommand)]
    Corpus(corpus_cmd::CorpusCommand),
    /// Inspect and render prompt templates.
    #[command(subcommand)]
    Prompts(prompts_cmd::PromptsCommand),
    /// Inspect and probe model endpoints.
    #[command(subcommand)]
    Models(models_cmd::ModelsCommand),
    /// Score a file of graded outcomes.
    Metrics(analysis::MetricsArgs),
    /// Rank models on one metric from saved runs.
    Rank(analysis::RankArgs),
    /// Compare two models from saved runs.
    Compare(analysis::CompareArgs),
    /// Manifest-driven evaluations.
    #[command(subcommand)]
    Eval(eval_cmd::EvalCommand),
    /// Run the human review service.
    Serve(serve_cmd::ServeArgs),
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().command {
        Command::Corpus(cmd) => corpus_cmd::run(cmd),
        Command::Prompts(cmd) => prompts_cmd::run(cmd),
        Command::Models(cmd) => models_cmd::run(cmd).await,
        Command::Metrics(args) => analysis::metrics(args),
        Command::Rank(args) => analysis::rank(args),
        Command::Compare(args) => analysis::compare(args),
        Command::Eval(cmd) => eval_cmd::run(cmd).await,
        Command::Serve(args) => serve_cmd::run(args).await,
    }
}

/// Prints a value as pretty JSON on stdout.
fn print_json<T: serde::Serialize>(value: &T) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}
