//! `bar`: prepare ratings, train binary attribute representations, extend
//! them to the full catalog, evaluate and inspect.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use bar_core::dataset::Partition;
use bar_core::Mode;
use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "bar", version, about = "Binary attribute representations of ratings matrices")]
#[command(args_override_self = true)]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// File of `key=value` lines supplying flag defaults; flags given on
    /// the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Parse a Netflix directory or ratings CSV, center it, rank movies and
    /// write a cache.
    Prep(PrepArgs),
    /// Generate a planted synthetic dataset.
    Synth(SynthArgs),
    /// Train bits on the top-ranked movie subset.
    Train(TrainArgs),
    /// Fit weights for every movie from trained bits and write a model.
    Extend(ExtendArgs),
    /// Report RMSE of a model or solve file on one partition.
    Eval(EvalArgs),
    /// Train, extend and evaluate over a grid of fractions and attribute
    /// counts.
    Sweep(SweepArgs),
    /// Write weight histograms, per-attribute rankings and bit prevalence.
    Inspect(InspectArgs),
}

#[derive(Args, Debug)]
pub struct PrepArgs {
    /// Netflix `training_set` directory or `viewer_id,movie_id,rating[,partition]` CSV.
    #[arg(long)]
    pub source: PathBuf,
    #[arg(long)]
    pub cache: PathBuf,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 300)]
    pub viewers: usize,
    #[arg(long, default_value_t = 60)]
    pub movies: usize,
    #[arg(long, default_value_t = 4)]
    pub d: usize,
    #[arg(long, default_value_t = 0.3)]
    pub density: f64,
    #[arg(long, default_value_t = 0.3)]
    pub bit_probability: f64,
    #[arg(long, default_value_t = 2.0)]
    pub weight_scale: f64,
    #[arg(long, default_value_t = 0.25)]
    pub noise_sigma: f64,
    /// Round stars to integers.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub quantize: bool,
    #[arg(long, default_value_t = 0.0)]
    pub probe_fraction: f64,
    /// Ratings CSV to write.
    #[arg(long)]
    pub out_csv: PathBuf,
    /// Planted model file to write.
    #[arg(long)]
    pub out_model: PathBuf,
    /// Also write a prepared cache.
    #[arg(long)]
    pub cache: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 8)]
    pub d: usize,
    #[arg(long, default_value_t = 0.5)]
    pub beta: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_iterations: usize,
    #[arg(long, default_value_t = 1.1)]
    pub restart_threshold: f64,
    #[arg(long, default_value = "dense", value_parser = parse_mode)]
    pub mode: Mode,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub tolerance: f64,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub cache: PathBuf,
    /// Share of the baseline error the training subset must cover.
    #[arg(long, default_value_t = 1.0)]
    pub fraction: f64,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Solve file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-iteration statistics CSV to write.
    #[arg(long)]
    pub stats: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ExtendArgs {
    #[arg(long)]
    pub cache: PathBuf,
    /// Solve file written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write `movie_id,attr_0,...` text.
    #[arg(long)]
    pub export_weights: Option<PathBuf>,
    /// Also write `viewer_id,bitstring` text.
    #[arg(long)]
    pub export_bits: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Model file, or a solve file (evaluated on its training movies).
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub cache: PathBuf,
    #[arg(long, default_value = "train", value_parser = parse_partition)]
    pub partition: Partition,
    /// Clamp predictions to [1, 5].
    #[arg(long)]
    pub clamp: bool,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long)]
    pub cache: PathBuf,
    #[arg(long, value_delimiter = ',', required = true, action = clap::ArgAction::Set)]
    pub fractions: Vec<f64>,
    #[arg(long = "d-values", value_delimiter = ',', required = true, action = clap::ArgAction::Set)]
    pub d_values: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct InspectArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, default_value_t = bar_core::interpret::DEFAULT_BINS)]
    pub bins: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse().map_err(|e: bar_core::Error| e.to_string())
}

fn parse_partition(s: &str) -> Result<Partition, String> {
    Partition::parse(s).ok_or_else(|| format!("unknown partition {s:?} (train or probe)"))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = match config::expand_args(std::env::args_os().collect()) {
        Ok(args) => args,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::parse_from(args);
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
