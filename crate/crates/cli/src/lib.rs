//! Experiment harness for the `lapsvm` crate: training, prediction,
//! cross-validation over the γ grid, solver benchmarks and PCG traces.
//!
//! Every command writes CSV files whose leading `#` lines hold the
//! effective configuration in TOML form. Timings go to separate
//! `*.timing.csv` files so all other outputs are reproducible byte for byte.

pub mod commands;
pub mod config;
pub mod error;
pub mod experiment;
pub mod table;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::Outcome;
pub use config::{ExperimentConfig, Settings};
pub use error::{CliError, Result};

#[derive(Parser)]
#[command(name = "lapsvm", version, about = "Laplacian SVM experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Train on one split; write the model and an error report.
    Train(CommonArgs),
    /// Apply a saved model to a dataset.
    Predict(PredictArgs),
    /// Select (γ_A, γ_I) on the grid by mean validation error.
    Crossval(CommonArgs),
    /// Compare solvers: timings, errors and iteration counts per split.
    Benchmark(CommonArgs),
    /// Per-iteration objective, gradient norms and errors of a PCG run.
    Trace(CommonArgs),
    /// Write a synthetic dataset.
    GenData(CommonArgs),
}

#[derive(Args)]
pub struct CommonArgs {
    /// TOML file with [data], [kernel], [graph], [model], [solver], [split]
    /// and [run] sections; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub settings: Settings,
}

#[derive(Args)]
pub struct PredictArgs {
    /// Model file written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
}

impl CommonArgs {
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let s = Settings::layered(self.config.as_deref(), &self.settings)?;
        ExperimentConfig::resolve(s)
    }
}

/// Runs a parsed command inside a thread pool sized by `jobs`; benchmarks
/// always use one thread.
pub fn execute(cli: &Cli) -> Result<Outcome> {
    let (common, single_thread) = match &cli.command {
        Command::Predict(p) => (&p.common, false),
        Command::Benchmark(c) => (c, true),
        Command::Train(c) | Command::Crossval(c) | Command::Trace(c) | Command::GenData(c) => (c, false),
    };
    let cfg = common.resolve()?;
    let threads = if single_thread { 1 } else { cfg.jobs.unwrap_or(0) };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::usage(format!("cannot start worker threads: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Train(_) => commands::train::run(&cfg),
        Command::Predict(p) => commands::predict::run(&cfg, &p.model),
        Command::Crossval(_) => commands::crossval::run(&cfg),
        Command::Benchmark(_) => commands::benchmark::run(&cfg),
        Command::Trace(_) => commands::trace::run(&cfg),
        Command::GenData(_) => commands::gen_data::run(&cfg),
    })
}

/// Parses `args`, runs the command and reports on stdout and stderr.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(out) => {
            for line in &out.summary {
                println!("{line}");
            }
            for f in &out.files {
                println!("wrote {}", f.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
