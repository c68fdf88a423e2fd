//! Command-line driver for the AccuracyTrader pipeline.
//!
//! Every command writes its results as files under `--out`; anything
//! timing-dependent goes to stdout only, so rerunning a command with the
//! same inputs and seed reproduces its output files byte for byte.

// `!(a < b)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;
mod config;
mod data;

pub use config::parse_synopsis_config;
pub use data::{load_data, Data};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] accuracytrader::Error),
}

impl CliError {
    /// 2 usage, 3 bad data or configuration, 4 broken internal invariant.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(accuracytrader::Error::Invariant(_)) => 4,
            CliError::Core(_) => 3,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum WorkloadArg {
    Cf,
    Search,
}

#[derive(Debug, Parser)]
#[command(
    name = "accuracytrader",
    version,
    about = "Synopsis-based approximate processing for fan-out services"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a seeded synthetic dataset with requests.
    Generate {
        #[arg(long, value_enum)]
        workload: WorkloadArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Users (CF) or pages (search).
        #[arg(long, default_value_t = 2000)]
        points: usize,
        #[arg(long, default_value_t = 200)]
        requests: usize,
    },
    /// Partition a dataset and build one synopsis per component.
    BuildSynopsis {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum)]
        workload: WorkloadArg,
        #[arg(long, default_value_t = 8)]
        components: usize,
        /// Synopsis settings (`key = value` lines).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Apply a change file, or sweep generated changes of 1-10%.
    UpdateSynopsis {
        /// Directory written by `build-synopsis`.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, conflicts_with = "sweep", required_unless_present = "sweep")]
        changes: Option<PathBuf>,
        #[arg(long)]
        sweep: bool,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Share of relevant originals per rank section of the synopsis.
    RankEffectiveness {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum)]
        workload: WorkloadArg,
        #[arg(long, default_value_t = 8)]
        components: usize,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a simulated load scenario under every configured strategy.
    Bench {
        #[arg(long)]
        scenario: PathBuf,
        /// Replay this dataset instead of generating one.
        #[arg(long, requires = "workload")]
        data: Option<PathBuf>,
        #[arg(long, value_enum)]
        workload: Option<WorkloadArg>,
        #[arg(long)]
        components: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Generate {
            workload,
            out,
            seed,
            points,
            requests,
        } => commands::generate(workload, &out, seed, points, requests),
        Command::BuildSynopsis {
            data,
            workload,
            components,
            config,
            out,
        } => commands::build_synopsis(&data, workload, components, config.as_deref(), &out),
        Command::UpdateSynopsis {
            data,
            changes,
            sweep,
            seed,
            out,
        } => match (changes, sweep) {
            (Some(c), false) => commands::update_from_file(&data, &c, &out),
            (None, true) => commands::update_sweep(&data, seed, &out),
            _ => Err(CliError::Usage("give exactly one of --changes or --sweep".into())),
        },
        Command::RankEffectiveness {
            data,
            workload,
            components,
            config,
            out,
        } => commands::rank_effectiveness(&data, workload, components, config.as_deref(), &out),
        Command::Bench {
            scenario,
            data,
            workload,
            components,
            seed,
            out,
        } => commands::bench(&scenario, data.as_deref().zip(workload), components, seed, &out),
    }
}

/// Parses `args` (including the program name), runs the command and maps
/// the outcome to an exit code.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
