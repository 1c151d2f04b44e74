//! `harvest-opt`: simulate the harvester, run the 0-1 test on a series, or
//! optimize mean power by grid search or the cross-entropy method.

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::Mode;
use run::{Failure, Overrides, Run};

#[derive(Debug, Parser)]
#[command(name = "harvest-opt", version, about = "Chaos-aware power optimization of a bistable energy harvester")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate one design and write its time series.
    Simulate(Common),
    /// Run the 0-1 test on a CSV series (one column, `t,v`, or a simulate export).
    Classify {
        input: PathBuf,
        /// Keep every n-th sample before testing.
        #[arg(long, default_value_t = 1)]
        stride: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Exhaustive search on a uniform grid.
    Grid(Common),
    /// Cross-entropy optimization.
    Ce(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output path prefix.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Noise-to-signal ratio added to the voltage.
    #[arg(long)]
    noise: Option<f64>,
}

fn execute(cli: Cli) -> Result<(), Failure> {
    let (mode, common) = match &cli.command {
        Command::Simulate(c) => (Mode::Simulate, c),
        Command::Classify { common, .. } => (Mode::Classify, common),
        Command::Grid(c) => (Mode::Grid, c),
        Command::Ce(c) => (Mode::Ce, c),
    };
    if let Some(n) = common.workers {
        if n == 0 {
            return Err(Failure::Config(anyhow::anyhow!("--workers must be at least 1")));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Failure::Runtime(e.into()))?;
    }
    let overrides = Overrides { seed: common.seed, out: common.out.clone(), noise: common.noise };
    let run = Run::prepare(mode, common.config.as_deref(), &overrides)?;
    match &cli.command {
        Command::Simulate(_) => run.simulate(),
        Command::Classify { input, stride, .. } => run.classify(input, *stride),
        Command::Grid(_) => run.grid(),
        Command::Ce(_) => run.ce(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
