//! The `timflow` command-line tool.
//!
//! [`run`] parses arguments and dispatches to one subcommand; `main` only
//! turns its result into a process exit code (0 success, 1 usage error,
//! 2 runtime error).

pub mod bench;
mod commands;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;
use timflow_core::dataset::DatasetError;
use timflow_core::heuristic::CompressError;
use timflow_core::metrics::{MetricsError, TimingError};
use timflow_core::pattern::PatternError;
use timflow_core::raster::RasterError;
use timflow_core::surrogate::{SearchError, SurrogateError, TrainError, WeightsError};
use timflow_core::{Boundary, GridSpec, Schedule};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "timflow", version, about = "Simulate and learn thermal interface material spreading")]
pub struct Cli {
    /// Log format on stderr.
    #[arg(long, value_enum, default_value_t = LogFormat::Text, global = true)]
    pub log: LogFormat,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LogFormat {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Heuristic,
    Surrogate,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rasterize a pattern JSON file into a one-record TIMD file.
    Discretize(DiscretizeArgs),
    /// Compress every record of a TIMD file with the heuristic or the surrogate.
    Compress(CompressArgs),
    /// Generate random patterns and their heuristic compressions.
    GenDataset(GenDatasetArgs),
    /// Train a surrogate on a TIMD dataset.
    Train(TrainArgs),
    /// Random hyperparameter search.
    Search(SearchArgs),
    /// Mean relative error of a surrogate against the heuristic targets.
    Eval(EvalArgs),
    /// Time heuristic and surrogate on generated patterns.
    Bench(BenchArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct DiscretizeArgs {
    /// Pattern JSON: {"points": [[x, y], ...], "feeds": [...]}.
    #[arg(long)]
    pub pattern: PathBuf,
    /// Grid resolution as HxW.
    #[arg(long, default_value = "50x50")]
    pub res: GridSpec,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompressArgs {
    /// TIMD file whose dispensed grids are compressed.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = ModelArg::Heuristic)]
    pub model: ModelArg,
    /// Heuristic schedule: single, linear[:K] or mult[:FACTOR].
    #[arg(long)]
    pub schedule: Option<Schedule>,
    /// Heuristic boundary policy: error or crop[:MARGIN].
    #[arg(long)]
    pub boundary: Option<Boundary>,
    /// Final gap; 1 is the termination height the grids are expressed in.
    #[arg(long, default_value_t = 1.0)]
    pub gap: f64,
    /// Surrogate weights (required with --model surrogate).
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Output TIMD file; without it a JSON summary per record is printed.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenDatasetArgs {
    #[arg(long)]
    pub count: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "50x50")]
    pub res: GridSpec,
    #[arg(long, default_value_t = 1)]
    pub min_segments: usize,
    #[arg(long, default_value_t = 6)]
    pub max_segments: usize,
    /// Cells kept clear of pattern points along each border.
    #[arg(long, default_value_t = 8)]
    pub margin: usize,
    #[arg(long, default_value_t = 0.5)]
    pub feed_min: f64,
    #[arg(long, default_value_t = 3.0)]
    pub feed_max: f64,
}

#[derive(Debug, Args)]
pub struct ArchArgs {
    #[arg(long, default_value_t = 3)]
    pub conv_layers: usize,
    #[arg(long, default_value_t = 32)]
    pub filters: usize,
    #[arg(long, default_value_t = 5)]
    pub kernel: usize,
    #[arg(long, default_value_t = 0)]
    pub dense_layers: usize,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 8)]
    pub batch: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Records held out (taken from the end of the file) for validation.
    #[arg(long, default_value_t = 0)]
    pub validation: usize,
    /// Per-epoch JSON lines; defaults to OUT with ".jsonl" appended.
    #[arg(long)]
    pub history: Option<PathBuf>,
    #[command(flatten)]
    pub arch: ArchArgs,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub trials: usize,
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    #[arg(long)]
    pub seed: u64,
    /// Training epochs per run.
    #[arg(long, default_value_t = 1)]
    pub epochs: usize,
    /// Records held out (taken from the end of the file) for validation.
    #[arg(long)]
    pub validation: usize,
    /// Write every trial as JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub weights: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 50)]
    pub patterns: usize,
    #[arg(long, default_value_t = 10)]
    pub runs: usize,
    /// Surrogate weights; without them only the heuristic is timed.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long)]
    pub seed: u64,
    /// Resolution when no weights are given (otherwise the model's).
    #[arg(long, default_value = "50x50")]
    pub res: GridSpec,
    #[arg(long, default_value = "mult:0.99")]
    pub schedule: Schedule,
    /// Per-pattern CSV rows.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// JSON summary.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Defaults to TIMFLOW_PORT, then 8080.
    #[arg(long)]
    pub port: Option<u16>,
    /// Defaults to TIMFLOW_WEIGHTS.
    #[arg(long)]
    pub weights: Option<PathBuf>,
}

/// Runtime failures, prefixed with the name of the failing module's error.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("IoError: {0}")]
    Io(#[from] std::io::Error),
    #[error("PatternError: {0}")]
    Pattern(#[from] PatternError),
    #[error("RasterError: {0}")]
    Raster(#[from] RasterError),
    #[error("CompressError: {0}")]
    Compress(#[from] CompressError),
    #[error("DatasetError: {0}")]
    Dataset(#[from] DatasetError),
    #[error("SurrogateError: {0}")]
    Surrogate(#[from] SurrogateError),
    #[error("TrainError: {0}")]
    Train(#[from] TrainError),
    #[error("WeightsError: {0}")]
    Weights(#[from] WeightsError),
    #[error("SearchError: {0}")]
    Search(#[from] SearchError),
    #[error("MetricsError: {0}")]
    Metrics(#[from] MetricsError),
    #[error("TimingError: {0}")]
    Timing(#[from] TimingError),
    #[error("CsvError: {0}")]
    Csv(#[from] csv::Error),
    #[error("JsonError: {0}")]
    Json(#[from] serde_json::Error),
    #[error("ServiceError: {0}")]
    Service(String),
    /// Flag combinations clap cannot check on its own; exits with 1.
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            _ => EXIT_RUNTIME,
        }
    }
}

fn init_logging(format: LogFormat) {
    let builder = tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        );
    // A second call in the same process (tests) keeps the first subscriber.
    let _ = match format {
        LogFormat::Text => builder.try_init(),
        LogFormat::Json => builder.json().try_init(),
    };
}

/// Runs an already parsed command line.
pub fn execute(cli: Cli) -> Result<(), CliError> {
    init_logging(cli.log);
    match cli.command {
        Command::Discretize(a) => commands::discretize(a),
        Command::Compress(a) => commands::compress(a),
        Command::GenDataset(a) => commands::gen_dataset(a),
        Command::Train(a) => commands::train(a),
        Command::Search(a) => commands::search(a),
        Command::Eval(a) => commands::eval(a),
        Command::Bench(a) => commands::bench(a),
        Command::Serve(a) => commands::serve(a),
    }
}

/// Parses `argv` (including the program name), runs it and returns the exit
/// code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
