//! `rulemine` command-line interface.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error.

mod analyze;
mod artifact;
mod data;
mod fit;
mod intervene;

use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use artifact::{usage, UsageError};

#[derive(Parser)]
#[command(name = "rulemine", version, about = "Rule-based neuron explanations for Othello models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate uniformly random legal games.
    GenGames(data::GenGamesArgs),
    /// Write an activation trace from planted rule neurons.
    SynthTrace(data::SynthTraceArgs),
    /// Validate a trace and summarize its activations.
    IngestTrace(data::IngestArgs),
    /// Fit one decision tree per neuron.
    Train(fit::TrainArgs),
    /// Fit the lasso baseline per neuron.
    BaselineLasso(fit::LassoArgs),
    /// Turn fitted trees into simplified DNF rules.
    ExtractRules(fit::ExtractArgs),
    /// Find neurons whose rules match a board condition.
    Query(analyze::QueryArgs),
    /// Interpretable-neuron counts and probe feature overlap.
    Metrics(analyze::MetricsArgs),
    /// Choose neurons and positions for legality-pattern ablations.
    PlanIntervention(intervene::PlanArgs),
    /// Score clean vs ablated logits for an intervention plan.
    EvalIntervention(intervene::EvalArgs),
    /// Choose neurons to replace or ablate in the first or last layers.
    PlanLayerwise(intervene::LayerwiseArgs),
    /// Plant rules, fit, extract and score the recovery.
    Recover(data::RecoverArgs),
}

/// Size the global thread pool from RULEMINE_THREADS.
fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var("RULEMINE_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| usage(format!("RULEMINE_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn run(cmd: Command) -> Result<()> {
    init_threads()?;
    match cmd {
        Command::GenGames(a) => data::gen_games(&a),
        Command::SynthTrace(a) => data::synth_trace(&a),
        Command::IngestTrace(a) => data::ingest_trace(&a),
        Command::Train(a) => fit::train(&a),
        Command::BaselineLasso(a) => fit::baseline_lasso(&a),
        Command::ExtractRules(a) => fit::extract_rules(&a),
        Command::Query(a) => analyze::query(&a),
        Command::Metrics(a) => analyze::metrics(&a),
        Command::PlanIntervention(a) => intervene::plan_intervention(&a),
        Command::EvalIntervention(a) => intervene::eval_intervention(&a),
        Command::PlanLayerwise(a) => intervene::plan_layerwise(&a),
        Command::Recover(a) => data::recover(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if e.is::<UsageError>() { 1 } else { 2 })
        }
    }
}
