//! `racecrt`: staged command-line pipeline for cumulative race time estimation.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use racecrt::evaluation::{EvalScope, NormalizationMode, ReportFormat, StubFamily};
use racecrt::inference::{Fusion, InstanceName};
use racecrt::preprocess::PlateStatistic;

#[derive(Debug, Parser)]
#[command(name = "racecrt", version, about = "Estimate cumulative race time from runner footage")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand; they override the config file.
#[derive(Debug, Args)]
pub struct Common {
    /// JSON pipeline configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Seed for every random draw.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Dataset manifest.
    #[arg(long, global = true, value_name = "PATH")]
    pub manifest: Option<PathBuf>,
    /// Comma-separated instances, e.g. `XS,S,M,L`.
    #[arg(long, global = true, value_delimiter = ',')]
    pub instances: Option<Vec<InstanceName>>,
    /// single, average or concat.
    #[arg(long, global = true)]
    pub fusion: Option<Fusion>,
    /// Use the built-in stub backend instead of model files.
    #[arg(long, global = true)]
    pub stub_backend: bool,
    /// Model sidecar manifests (comma-separated or repeated).
    #[arg(long, global = true, value_delimiter = ',', value_name = "PATH")]
    pub models: Vec<PathBuf>,
    /// Output format for tables.
    #[arg(long, global = true)]
    pub format: Option<ReportFormat>,
    /// More log output (-v debug, -vv trace).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,
    /// Warnings and errors only.
    #[arg(short, long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Still the background of every footage and write tau frames per observation.
    Preprocess(PreprocessArgs),
    /// Embed (pre-processed) footage into one store per instance.
    Extract(ExtractArgs),
    /// Fuse single-instance stores by averaging or concatenation.
    Fuse(FuseArgs),
    /// Repeated k-fold cross-validation of the k-NN regressor.
    Evaluate(EvaluateArgs),
    /// Render saved evaluation reports as one table.
    Report(ReportArgs),
    /// Generate a synthetic dataset (manifest, stores, optional footage).
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PlateArg {
    Median,
    Mean,
}

impl From<PlateArg> for PlateStatistic {
    fn from(p: PlateArg) -> Self {
        match p {
            PlateArg::Median => PlateStatistic::Median,
            PlateArg::Mean => PlateStatistic::Mean,
        }
    }
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// Stilled frames per observation (default 175).
    #[arg(long)]
    pub tau: Option<usize>,
    /// Background plate statistic.
    #[arg(long, value_enum)]
    pub plate: Option<PlateArg>,
    /// Use the box file as is instead of interpolating missing frames.
    #[arg(long)]
    pub no_fill_gaps: bool,
    /// Crop the stilled frames to the union of the runner's boxes.
    #[arg(long)]
    pub crop: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StubArg {
    MeanIntensity,
    ChannelMeans,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Pixel statistic computed by the stub backend.
    #[arg(long, value_enum)]
    pub stub_function: Option<StubArg>,
    /// Square input side of the stub backend.
    #[arg(long)]
    pub stub_resolution: Option<u32>,
    /// Compare every loaded model against its golden vectors first.
    #[arg(long)]
    pub check_golden: bool,
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    /// Single-instance stores to fuse (default: the `--instances` stores in the output directory).
    #[arg(long, value_delimiter = ',', value_name = "PATH")]
    pub stores: Vec<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum NormalizationArg {
    PerFold,
    Global,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScopeArg {
    Pooled,
    PerRp,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Embedding store (default: derived from `--instances` and `--fusion` in the output directory).
    #[arg(long, value_name = "PATH")]
    pub store: Option<PathBuf>,
    #[arg(long)]
    pub repetitions: Option<usize>,
    #[arg(long)]
    pub folds: Option<usize>,
    /// Inner folds of the grid search.
    #[arg(long)]
    pub inner_folds: Option<usize>,
    /// Fit the CRT normalization per training fold or once on all data.
    #[arg(long, value_enum)]
    pub normalization: Option<NormalizationArg>,
    /// One regressor for all recording points, or one per recording point.
    #[arg(long, value_enum)]
    pub scope: Option<ScopeArg>,
    /// Plain instead of recording-point-stratified folds.
    #[arg(long)]
    pub no_stratify: bool,
    /// Also fit on all observations and save the regressor here.
    #[arg(long, value_name = "PATH")]
    pub save_model: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Report JSON files written by `evaluate`.
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FamilyArg {
    Linear,
    Sinusoidal,
    Constant,
}

impl From<FamilyArg> for StubFamily {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Linear => StubFamily::Linear,
            FamilyArg::Sinusoidal => StubFamily::Sinusoidal,
            FamilyArg::Constant => StubFamily::Constant,
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub runners: Option<usize>,
    #[arg(long)]
    pub recording_points: Option<usize>,
    /// How embeddings depend on the CRT.
    #[arg(long, value_enum)]
    pub family: Option<FamilyArg>,
    /// Gaussian noise added to the embeddings.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Lower end of the CRT range, seconds.
    #[arg(long)]
    pub crt_low: Option<f64>,
    /// Upper end of the CRT range, seconds.
    #[arg(long)]
    pub crt_high: Option<f64>,
    /// Frames per footage.
    #[arg(long)]
    pub frames: Option<u32>,
    /// Also render PNG footage and box files.
    #[arg(long)]
    pub footage: bool,
    #[arg(long, default_value_t = 64)]
    pub width: u32,
    #[arg(long, default_value_t = 48)]
    pub height: u32,
    /// Omit every n-th box row (0 keeps all).
    #[arg(long, default_value_t = 7)]
    pub drop_every: usize,
}

impl From<NormalizationArg> for NormalizationMode {
    fn from(n: NormalizationArg) -> Self {
        match n {
            NormalizationArg::PerFold => NormalizationMode::PerFold,
            NormalizationArg::Global => NormalizationMode::Global,
        }
    }
}

impl From<ScopeArg> for EvalScope {
    fn from(s: ScopeArg) -> Self {
        match s {
            ScopeArg::Pooled => EvalScope::Pooled,
            ScopeArg::PerRp => EvalScope::PerRecordingPoint,
        }
    }
}

fn init_logging(common: &Common) {
    let level = match (common.quiet, common.verbose) {
        (true, _) => log::LevelFilter::Warn,
        (false, 0) => log::LevelFilter::Info,
        (false, 1) => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .format_timestamp(None)
        .format_target(false)
        .init();
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    init_logging(&cli.common);
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

