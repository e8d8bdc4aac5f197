//! `mola`: fields, sweeps, analysis and the exact oracle from the command line.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mola_core::analysis::OptimumSource;
use mola_core::Engine;

pub const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (manifest format 1)");

#[derive(Debug, Parser)]
#[command(name = "mola", version = VERSION, about = "Land-allocation sampling, degradation sweeps and landscape analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate or check suitability fields.
    #[command(subcommand)]
    Field(FieldCommand),
    /// Run or resume a (P_S, delta) sweep.
    #[command(subcommand)]
    Sweep(SweepCommand),
    /// Loss curves, landscapes and rearrangement events from a finished sweep.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Exact distribution of a small grid by full enumeration.
    #[command(subcommand)]
    Oracle(OracleCommand),
}

#[derive(Debug, Subcommand)]
enum FieldCommand {
    /// Write a smoothed random field as `i,j,k,s` CSV.
    Generate(GenerateArgs),
    /// Load a field and report its size, range and checksum.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 30)]
    rows: usize,
    #[arg(long, default_value_t = 30)]
    cols: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Passes of the 3x3 mean filter; 0 gives independent scores.
    #[arg(long, default_value_t = 3)]
    smoothness: u32,
    #[arg(short, long, default_value = "field.csv")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    /// Single `i,j,k,s` file.
    #[arg(required_unless_present = "planes", conflicts_with = "planes")]
    path: Option<PathBuf>,
    /// Three headerless grids, one per use, in agriculture/construction/conservation order.
    #[arg(long, num_args = 3, value_names = ["AG", "CO", "CN"])]
    planes: Option<Vec<PathBuf>>,
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    cols: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum SweepCommand {
    /// Start a sweep from a TOML plan; flags override plan entries.
    Run(RunArgs),
    /// Compute whatever cells of an existing sweep are missing.
    Resume {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Plan file; without it the built-in default plan is used.
    #[arg(long)]
    plan: Option<PathBuf>,
    #[arg(short, long)]
    out: PathBuf,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    ps: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    delta: Option<Vec<f64>>,
    #[arg(long)]
    replicates: Option<u64>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    engine: Option<Engine>,
    #[arg(long)]
    burn_in: Option<u64>,
    #[arg(long)]
    interval: Option<u64>,
    #[arg(long)]
    samples: Option<u64>,
    /// Use this field file instead of the plan's field.
    #[arg(long)]
    field: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum AnalyzeCommand {
    /// `loss_curve_<ps>.csv` per suitability pressure.
    Loss(LossArgs),
    /// `landscape_<ps>_<delta>.csv` per cell.
    Landscape(LandscapeArgs),
    /// `events_<ps>.json` per suitability pressure.
    Events(EventsArgs),
}

#[derive(Debug, Args)]
struct SweepSelection {
    /// Sweep directory (holds manifest.json).
    #[arg(long)]
    sweep: PathBuf,
    /// Restrict to these suitability pressures; default all.
    #[arg(long, value_delimiter = ',')]
    ps: Option<Vec<f64>>,
    /// Output directory; default `<sweep>/analysis`.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct LossArgs {
    #[command(flatten)]
    sel: SweepSelection,
    #[arg(long, default_value_t = OptimumSource::Pooled)]
    source: OptimumSource,
}

#[derive(Debug, Args)]
struct LandscapeArgs {
    #[command(flatten)]
    sel: SweepSelection,
    /// Restrict to these degradation levels; default all.
    #[arg(long, value_delimiter = ',')]
    delta: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
struct EventsArgs {
    #[command(flatten)]
    sel: SweepSelection,
    #[arg(long, default_value_t = OptimumSource::Pooled)]
    source: OptimumSource,
    #[arg(long, default_value_t = mola_core::analysis::DEFAULT_JUMP_THRESHOLD)]
    jump_threshold: f64,
    #[arg(long, default_value_t = mola_core::analysis::DEFAULT_COMPOSITION_TOLERANCE)]
    tolerance: f64,
}

#[derive(Debug, Subcommand)]
enum OracleCommand {
    /// Write every state with its objective and probability, plus the
    /// composition landscape.
    Enumerate(EnumerateArgs),
}

#[derive(Debug, Args)]
struct EnumerateArgs {
    #[arg(long, default_value_t = 3)]
    rows: usize,
    #[arg(long, default_value_t = 3)]
    cols: usize,
    /// Field to crop from; default the bundled field.
    #[arg(long)]
    field: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    row0: usize,
    #[arg(long, default_value_t = 0)]
    col0: usize,
    #[arg(long, default_value_t = 1.0)]
    pc: f64,
    #[arg(long, default_value_t = 2.0)]
    ps: f64,
    #[arg(long, default_value_t = 1.0)]
    temperature: f64,
    #[arg(long, default_value_t = mola_core::enumerator::DEFAULT_STATE_CAP)]
    cap: u64,
    #[arg(short, long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.category(), e);
            ExitCode::from(e.exit_code())
        }
    }
}
