//! Command-line front end: `generate`, `run`, `verify` and `signatures`.

pub mod commands;
pub mod config;
pub mod report;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use toploc_core::cluster::Distance;
use toploc_core::ingest::StreamFormat;
use toploc_core::metrics::SignatureMetric;

/// Exit code is 2 for bad input or configuration and 1 for everything else.
#[derive(Debug)]
pub enum Failure {
    User(anyhow::Error),
    Internal(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::User(_) => 2,
            Failure::Internal(_) => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::User(e) | Failure::Internal(e) => write!(f, "{e:#}"),
        }
    }
}

pub type Outcome<T> = Result<T, Failure>;

pub trait Classify<T> {
    fn user(self) -> Outcome<T>;
    fn internal(self) -> Outcome<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn user(self) -> Outcome<T> {
        self.map_err(|e| Failure::User(e.into()))
    }

    fn internal(self) -> Outcome<T> {
        self.map_err(|e| Failure::Internal(e.into()))
    }
}

#[derive(Debug, Parser)]
#[command(name = "toploc", version, about = "Frequently-visited locations and their landuse from geo-located event streams")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic corpus, its ground truth, landuse map and a matching run config.
    Generate(GenerateArgs),
    /// Run the full pipeline and write report tables.
    Run(RunArgs),
    /// Score a run's clusters against synthetic ground truth.
    Verify(VerifyArgs),
    /// Dump per-landuse reference signatures.
    Signatures(SignaturesArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Synthetic corpus config (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub users: Option<usize>,
    /// Tourists per resident.
    #[arg(long)]
    pub tourists: Option<f64>,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Clone, Default)]
pub struct RunArgs {
    /// Run config (TOML). Flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub events: Option<PathBuf>,
    #[arg(long)]
    pub format: Option<StreamFormat>,
    /// GeoJSON polygons with a `raw_class` property.
    #[arg(long)]
    pub polygons: Option<PathBuf>,
    /// CSV `raw_class,analysis_class,is_road`; the built-in table when absent.
    #[arg(long)]
    pub taxonomy: Option<PathBuf>,
    /// min_lat,min_lon,max_lat,max_lon
    #[arg(long, value_delimiter = ',', num_args = 4)]
    pub bbox: Option<Vec<f64>>,
    #[arg(long)]
    pub year: Option<i32>,
    #[arg(long)]
    pub dedupe: bool,
    #[arg(long)]
    pub max_rank: Option<u32>,
    /// Worker threads; 0 uses all cores.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Replace the configured experiments with one parameter set.
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long, requires = "eps")]
    pub min_pts: Option<usize>,
    #[arg(long, requires = "eps", conflicts_with = "min_pts")]
    pub min_pts_fraction: Option<f64>,
    #[arg(long, requires = "eps")]
    pub distance: Option<Distance>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    /// Output directory of a `run` over the same corpus.
    #[arg(long)]
    pub reports: PathBuf,
    /// Also write the scorecard JSON here.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SignaturesArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Experiment whose clusters define the references; the first one by default.
    #[arg(long)]
    pub experiment: Option<String>,
    #[arg(long, default_value_t = 1)]
    pub rank: u32,
    #[arg(long, default_value = "cosine")]
    pub metric: SignatureMetric,
}

/// Parses `args` and executes the command. Returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Generate(a) => commands::generate(&a),
        Command::Run(a) => commands::run(&a),
        Command::Verify(a) => commands::verify(&a),
        Command::Signatures(a) => commands::signatures(&a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
