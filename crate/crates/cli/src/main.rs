//! `greenbtc`: batch entry point for simulation runs and experiments.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "greenbtc", version, about = "Green Bitcoin consensus simulator")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Scenario file (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the scenario seed. GREENBTC_SEED overrides this flag.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory, created atomically.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for independent runs and trials.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Overrides the scenario's mining fidelity.
    #[arg(long, global = true, value_enum)]
    pub mode: Option<Mode>,
    /// Also export the full event log.
    #[arg(long, global = true)]
    pub verbose: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Concrete,
    Abstract,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a scenario and write per-block metrics.
    Run,
    /// Estimate every difficulty level's solve probability.
    Calibrate {
        #[arg(long, default_value_t = 400_000)]
        samples: u64,
    },
    /// Energy-consumption efficiency against the ungated twin.
    Ece {
        /// Pass probabilities, e.g. `0.1,0.25,0.5,1`.
        #[arg(long = "pp", value_delimiter = ',', default_value = "0.1,0.25,0.5,1")]
        pp: Vec<String>,
    },
    /// Double-spend race success rates.
    Attack {
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3")]
        fractions: Vec<f64>,
        #[arg(long, default_value_t = 6)]
        z: u32,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long, default_value_t = greenbtc_core::simnet::DEFAULT_ATTACK_HORIZON)]
        horizon: u64,
    },
    /// Committee composition over independent election rounds.
    Committee {
        #[arg(long, default_value_t = 0.3)]
        fraction: f64,
        #[arg(long, default_value_t = 10_000)]
        rounds: usize,
    },
    /// Profitable double-spending verdict.
    Pds {
        /// Attacker's share of hash power.
        #[arg(long)]
        share: f64,
        /// Transaction value in coins.
        #[arg(long)]
        value: f64,
        /// Rental cost of the attacker's power per block interval.
        #[arg(long)]
        cost: f64,
        #[arg(long, default_value_t = 6.25)]
        reward: f64,
        #[arg(long, default_value_t = 30)]
        max_z: u32,
        #[arg(long, default_value_t = greenbtc_core::pds::DEFAULT_HORIZON_BLOCKS)]
        horizon: u32,
        /// Confirmations at which to report the success probability.
        #[arg(long, default_value_t = 6)]
        z: u32,
    },
    /// Simulate a scenario and write its main chain, one hex block per line.
    ExportChain,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
