use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hhg::em::Mode;
use hhg::io::SplitSpec;

#[derive(Debug, Parser)]
#[command(
    name = "hhg",
    version,
    about = "Simulate, fit and diagnose Hawkes processes with embedded event types"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a ground-truth model and simulate a record from it.
    Simulate(SimulateArgs),
    /// Estimate a model from an event record.
    Fit(FitArgs),
    /// Score a model on the train and test windows of a record.
    Evaluate(EvaluateArgs),
    /// Compute attribution, residual and recovery diagnostics.
    Diagnose(DiagnoseArgs),
    /// Turn cumulative counts into threshold-crossing events.
    Discretize(DiscretizeArgs),
    /// Write plot-ready CSV files.
    Export(ExportArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// TOML file with a [simulate] section; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of event types.
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of events to keep.
    #[arg(long = "N")]
    pub events: Option<usize>,
    /// Simulate up to this time instead of a fixed event count.
    #[arg(long, conflicts_with = "events")]
    pub horizon: Option<f64>,
    /// Embedding dimension of the ground truth.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub kernels: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub event_cap: Option<usize>,
    /// Events CSV to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Model file receiving the ground truth.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

/// Events input shared by the subcommands that read a record.
#[derive(Debug, Args)]
pub struct EventsInput {
    /// Events CSV with header `type,time`.
    #[arg(long)]
    pub events: PathBuf,
    /// Observation horizon; defaults to the file's directive or just past the last event.
    #[arg(long)]
    pub horizon: Option<f64>,
}

#[derive(Debug, Args)]
#[group(multiple = false)]
pub struct SplitArgs {
    /// Split the record at this time.
    #[arg(long)]
    pub split_time: Option<f64>,
    /// Hold out a test window of this length at the end.
    #[arg(long)]
    pub test_last: Option<f64>,
    /// Train on this fraction of the events.
    #[arg(long)]
    pub train_fraction: Option<f64>,
}

impl SplitArgs {
    pub fn spec(&self) -> Option<SplitSpec> {
        self.split_time
            .map(SplitSpec::SplitTime)
            .or(self.test_last.map(SplitSpec::TestLast))
            .or(self.train_fraction.map(SplitSpec::TrainFraction))
    }
}

/// Where a fitted model comes from.
#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct ModelInput {
    /// Model file.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Fit report; its best-epoch model is used.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: EventsInput,
    /// TOML file with [fit] and [split] sections; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub split: SplitArgs,
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<Mode>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub kernels: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    /// Ascent rate of HHG-A.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Step-size regularizer of HHG-B (`inf` disables it).
    #[arg(long)]
    pub eps1: Option<f64>,
    /// Origin-anchoring regularizer of HHG-B.
    #[arg(long)]
    pub eps2: Option<f64>,
    #[arg(long)]
    pub inner_steps: Option<usize>,
    #[arg(long)]
    pub dm_alpha: Option<f64>,
    #[arg(long)]
    pub prior_alpha: Option<f64>,
    #[arg(long)]
    pub prior_beta: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub branching_floor: Option<f64>,
    /// Start from this model file.
    #[arg(long)]
    pub init: Option<PathBuf>,
    /// Fixed coordinates (CSV) for the frozen-embedding mode.
    #[arg(long, conflicts_with = "init")]
    pub frozen_embedding: Option<PathBuf>,
    /// Fit report to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the best-epoch model here.
    #[arg(long)]
    pub model_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub input: EventsInput,
    #[command(flatten)]
    pub model: ModelInput,
    /// TOML file with a [split] section.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub split: SplitArgs,
    /// JSON file to write; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub input: EventsInput,
    #[command(flatten)]
    pub model: ModelInput,
    /// Ground-truth model file.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// TOML file with a [split] section.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub split: SplitArgs,
    /// Seed for sampling background events.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON file to write; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DiscretizeArgs {
    /// CSV with header `location,day,cumulative`.
    #[arg(long)]
    pub counts: PathBuf,
    #[arg(long, default_value_t = hhg::io::DEFAULT_THRESHOLD)]
    pub threshold: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExportKind {
    Embedding,
    Curve,
    Qq,
    Events,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long, value_enum)]
    pub what: ExportKind,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Diagnostics JSON holding QQ points.
    #[arg(long)]
    pub diagnostics: Option<PathBuf>,
    #[arg(long)]
    pub events: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse::<Mode>().map_err(|e| e.to_string())
}
