//! `costa`: plan, sweep, verify and export cost-sensitive toolpaths.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use costa_core::search::{DEFAULT_MAX_RETRIES, DEFAULT_QUALITY_THRESHOLD, DEFAULT_QUEUE_CAP, DEFAULT_SEED};
use costa_core::toolgraph::DEFAULT_PATH_CAP;

use crate::commands::Failure;

#[derive(Debug, Parser)]
#[command(
    name = "costa",
    version,
    about = "Cost-sensitive toolpath planning for image editing tasks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Search for the best toolpath at one alpha.
    Plan(PlanArgs),
    /// Run the search at several alphas and emit a Pareto CSV.
    Sweep(SweepArgs),
    /// Compare the search against exhaustive enumeration.
    Verify(VerifyArgs),
    /// Export the tool dependency graph, or a tool subgraph with --tree.
    Graph(GraphArgs),
    /// Write seeded random search instances for `verify --instances`.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct InputArgs {
    /// Model description table (JSON).
    #[arg(long)]
    mdt: PathBuf,
    /// Benchmark table (JSON).
    #[arg(long)]
    benchmark: PathBuf,
    /// Subtask tree (JSON). Required unless --task is routed to a planner.
    #[arg(long)]
    tree: Option<PathBuf>,
    /// Task text sent to the planner endpoint instead of reading --tree.
    #[arg(long)]
    task: Option<String>,
    /// Planner URL; falls back to COSTA_PLANNER_URL.
    #[arg(long)]
    planner_endpoint: Option<String>,
    /// Replace every benchmark quality with 1.
    #[arg(long)]
    unit_quality: bool,
}

#[derive(Debug, Args)]
struct SearchArgs {
    #[arg(long, default_value_t = DEFAULT_QUALITY_THRESHOLD)]
    quality_threshold: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_RETRIES)]
    max_retries: u32,
    #[arg(long, default_value_t = DEFAULT_QUEUE_CAP)]
    queue_cap: usize,
    /// Simulator spec (JSON); deterministic playback when omitted.
    #[arg(long)]
    sim: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Debug, Args)]
struct PlanArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    search: SearchArgs,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Plan JSON destination; trace and manifest go next to it.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    search: SearchArgs,
    /// Comma-separated alphas in [0, 2].
    #[arg(long, default_value = "0,0.5,1,1.5,2")]
    alphas: String,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long, required_unless_present = "instances")]
    mdt: Option<PathBuf>,
    #[arg(long, required_unless_present = "instances")]
    benchmark: Option<PathBuf>,
    #[arg(long)]
    tree: Option<PathBuf>,
    /// Instance file from `costa synth`, verified instead of --mdt/--tree.
    #[arg(long, conflicts_with_all = ["mdt", "benchmark", "tree"])]
    instances: Option<PathBuf>,
    #[arg(long)]
    unit_quality: bool,
    /// Alphas, assigned to instances round-robin.
    #[arg(long, default_value = "1")]
    alphas: String,
    /// Nodes below this benchmark quality make a path infeasible.
    #[arg(long, default_value_t = 0.0)]
    quality_threshold: f64,
    #[arg(long, default_value_t = DEFAULT_PATH_CAP)]
    paths_cap: usize,
    /// Largest gap accepted on alpha = 1, unit-quality instances.
    #[arg(long, default_value_t = 0.0)]
    gap_tolerance: f64,
    /// Report JSON destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-instance gap CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GraphFormat {
    Dot,
    Json,
}

#[derive(Debug, Args)]
struct GraphArgs {
    #[arg(long)]
    mdt: PathBuf,
    #[arg(long)]
    tree: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = GraphFormat::Dot)]
    format: GraphFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 500)]
    count: usize,
    /// Tool nodes per instance, at most.
    #[arg(long, default_value_t = 12)]
    max_nodes: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let argv: Vec<String> = std::env::args().collect();
    let result = match cli.command {
        Command::Plan(a) => commands::plan(&a, &argv),
        Command::Sweep(a) => commands::sweep(&a, &argv),
        Command::Verify(a) => commands::verify(&a, &argv),
        Command::Graph(a) => commands::graph(&a),
        Command::Synth(a) => commands::synth(&a, &argv),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            if let Failure::Input(msg) | Failure::PathExplosion(msg) | Failure::Verification(msg) = &f {
                eprintln!("error: {msg}");
            }
            ExitCode::from(f.code())
        }
    }
}
