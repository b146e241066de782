//! `backbone`: bounds tables, simulations, Monte Carlo experiments and
//! Prism ledgers from the command line.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "backbone", version, about = "Continuous-time backbone protocol laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Protocol parameters settable from flags. Unset flags keep defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct ParamArgs {
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long = "delta-net")]
    pub delta_net: Option<f64>,
    #[arg(long = "delta-typ")]
    pub delta_typ: Option<f64>,
    /// Number of voter chains (0 for bitcoin).
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub horizon: Option<f64>,
}

/// Strategy and simulation switches shared by the simulating subcommands.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    /// null, private_chain, selfish_mining or censor_votes.
    #[arg(long)]
    pub strategy: Option<String>,
    /// Strategy parameter as key=value; repeatable.
    #[arg(long = "strategy-param", value_name = "KEY=VALUE")]
    pub strategy_params: Vec<String>,
    /// earliest_publication, adversary_steered or delayed_view.
    #[arg(long = "tie-break")]
    pub tie_break: Option<String>,
    /// TOML file whose keys override the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long)]
    pub trials: Option<u64>,
    /// Check to run; repeatable. Defaults depend on the subcommand.
    #[arg(long = "check", value_name = "NAME")]
    pub checks: Vec<String>,
    /// Evaluation time for depth and interval checks.
    #[arg(long)]
    pub t: Option<f64>,
    /// Start of the interval for interval checks.
    #[arg(long)]
    pub s: Option<f64>,
    /// Depth for depth checks.
    #[arg(long)]
    pub k: Option<u64>,
    /// Full JSON report.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// CSV summary.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Run trials on one thread.
    #[arg(long)]
    pub serial: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Closed-form quantities and bounds for one parameter point.
    Bounds {
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long = "delta-net")]
        delta_net: Option<f64>,
        #[arg(long = "delta-typ")]
        delta_typ: Option<f64>,
        /// Number of voter chains; above 0 adds the Prism latencies.
        #[arg(long)]
        m: Option<usize>,
        /// Target failure probability for the Prism latencies.
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        k: Option<f64>,
        /// Interval length t - s for the event bounds.
        #[arg(long)]
        interval: Option<f64>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one execution and write its trace as JSON lines.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a Monte Carlo experiment.
    Montecarlo(CheckArgs),
    /// Run one Prism execution and dump the ledger.
    PrismSim {
        #[command(flatten)]
        run: RunArgs,
        /// Trace output (JSON lines).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Ledger output (JSON).
        #[arg(long)]
        ledger: Option<PathBuf>,
        /// Election time; defaults to the horizon.
        #[arg(long)]
        t: Option<f64>,
    },
    /// Run theorem checks and report pass or fail.
    Verify {
        #[command(flatten)]
        args: CheckArgs,
        /// Exit with status 1 when any check fails.
        #[arg(long)]
        strict: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Bounds { alpha, beta, delta_net, delta_typ, m, eps, k, interval, config, out } => {
            let flags = config::BoundsFlags { alpha, beta, delta_net, delta_typ, m, eps, k, interval };
            commands::bounds(&flags, config.as_deref(), out.as_deref())
        }
        Command::Simulate { run, out } => commands::simulate(&run, out.as_deref()),
        Command::Montecarlo(args) => commands::montecarlo(&args, false),
        Command::PrismSim { run, out, ledger, t } => commands::prism_sim(&run, out.as_deref(), ledger.as_deref(), t),
        Command::Verify { args, strict } => commands::montecarlo(&args, strict),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
