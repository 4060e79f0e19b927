// `!(a <= b)` style checks are deliberate: NaN has to fail them
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use labelprobe::logreg::ClassWeighting;
use labelprobe::runner::SeedRange;

#[derive(Parser, Debug)]
#[command(
    name = "labelprobe",
    version,
    about = "Label-efficiency benchmarks for linear probes on frozen embeddings"
)]
struct Cli {
    /// More log output (-v info, -vv debug). RUST_LOG takes precedence.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a train/test pair (and optionally its manifest) before running anything.
    Validate(ValidateArgs),
    /// Convert a `label,f0,f1,...` CSV into an EMB1 file.
    IngestCsv(IngestArgs),
    /// Fit one probe and score it on the test split.
    Train(TrainArgs),
    /// Run every condition for every seed and write the report files.
    Sweep(SweepArgs),
    /// Compare a sweep against a published per-class baseline.
    Report(ReportArgs),
    /// Write a dataset as CSV for external projection tools.
    ExportEmbeddings(ExportArgs),
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Training embeddings (EMB1, or CSV when the name ends in .csv).
    #[arg(long)]
    train: PathBuf,
    /// Test embeddings, same formats.
    #[arg(long)]
    test: PathBuf,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Manifest JSON; file paths inside are relative to its directory.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct IngestArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Scale every row to unit length before writing.
    #[arg(long)]
    normalize: bool,
}

#[derive(Args, Debug)]
struct ProbeArgs {
    /// Inverse regularization strength.
    #[arg(long = "C", value_name = "C")]
    c: Option<f64>,
    /// `balanced` or `uniform`.
    #[arg(long, value_parser = parse_weighting)]
    weighting: Option<ClassWeighting>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    grad_tolerance: Option<f64>,
}

fn parse_weighting(s: &str) -> Result<ClassWeighting, String> {
    s.parse().map_err(|e: labelprobe::Error| e.to_string())
}

#[derive(Args, Debug)]
#[group(id = "condition", required = true, multiple = false)]
struct ConditionArgs {
    /// Labeled rows per class.
    #[arg(long)]
    budget: Option<u32>,
    /// Train on this share of a per-seed stratified split.
    #[arg(long)]
    fraction: Option<f64>,
    /// Train on every row; the seed is ignored.
    #[arg(long)]
    full: bool,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    condition: ConditionArgs,
    #[arg(long, default_value_t = 0, conflicts_with = "full")]
    seed: u64,
    #[command(flatten)]
    probe: ProbeArgs,
    /// Write the fitted parameters as JSON.
    #[arg(long)]
    save_model: Option<PathBuf>,
    /// Print the full run record as JSON instead of a summary.
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Experiment config JSON; inline flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated per-class budgets, e.g. 1,2,3,5,8.
    #[arg(long, value_delimiter = ',')]
    budgets: Vec<u32>,
    /// Inclusive seed range `a..b` (or a single seed).
    #[arg(long)]
    seeds: Option<SeedRange>,
    /// Add a stratified-split condition with this train share.
    #[arg(long)]
    fraction: Option<f64>,
    /// Add the single deterministic all-rows run.
    #[arg(long)]
    full: bool,
    #[command(flatten)]
    probe: ProbeArgs,
    /// Worker threads.
    #[arg(long, env = "LABELPROBE_JOBS")]
    jobs: Option<usize>,
    /// Record the selected training rows of every run.
    #[arg(long)]
    emit_selections: bool,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// `sweep_report.json` written by `sweep`.
    #[arg(long)]
    runs: PathBuf,
    /// Baseline JSON with per-class F1 values.
    #[arg(long)]
    baseline: PathBuf,
    /// Condition to compare; needed when the sweep has more than one.
    #[arg(long)]
    condition: Option<String>,
    /// Also write comparison.csv and delta_f1.csv here.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExportArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let outcome = match cli.command {
        Command::Validate(args) => commands::validate(args),
        Command::IngestCsv(args) => commands::ingest_csv(args),
        Command::Train(args) => commands::train(args),
        Command::Sweep(args) => commands::sweep(args),
        Command::Report(args) => commands::report(args),
        Command::ExportEmbeddings(args) => commands::export_embeddings(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {failure}");
            ExitCode::from(failure.code)
        }
    }
}
