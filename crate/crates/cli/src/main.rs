//! `ezdeepc` command-line front end.

mod commands;
mod manifest;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "ezdeepc", version = env!("EZDEEPC_BUILD_VERSION"), about = "Economic zone predictive control of connected open water systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Experiment config (TOML). The built-in desk-scale config is used when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Disturbance scenario file replacing the config's `[scenario]` section.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Seed override: disturbance seed, or the collection seed for `collect`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the built-in experiment configs to a directory.
    Init {
        #[arg(long, default_value = "configs")]
        out: PathBuf,
    },
    /// Open-loop simulation with given inputs or the passive rules.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 200)]
        steps: usize,
        /// CSV of inputs with columns `u_0..`; row `t` is applied at step `t`,
        /// the last row is held.
        #[arg(long)]
        inputs: Option<PathBuf>,
        /// Also write an SVG plot of the levels.
        #[arg(long)]
        svg: bool,
    },
    /// Collect open-loop excitation data with corrective interventions.
    Collect {
        #[command(flatten)]
        common: Common,
        /// Number of samples; defaults to the config value.
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Tune the target-zone contraction by Bayesian optimization.
    Tune {
        #[command(flatten)]
        common: Common,
        /// Offline data CSV; collected from the config when omitted.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Closed-loop steps per evaluation; defaults to the config value.
        #[arg(long)]
        steps: Option<usize>,
        /// Optimize the analytic test objective -(alpha - 0.6)^2 instead of closed-loop runs.
        #[arg(long)]
        synthetic: bool,
    },
    /// Closed-loop run of one controller variant.
    Control {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Target-zone contraction for `--mode ez`.
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value = "ez", value_parser = ["ez", "es", "ez-raw", "passive"])]
        mode: String,
        /// Controlled steps after the bootstrap; defaults to the config value.
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        svg: bool,
    },
    /// Run all four controller variants on the same scenario.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Tuned contraction; tuned on the spot when omitted.
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("EZDEEPC_LOG", "warn")).init();
    let argv: Vec<String> = std::env::args().collect();
    let result = match cli.command {
        Command::Init { out } => commands::init(&out),
        Command::Simulate { common, steps, inputs, svg } => commands::simulate(&common, &argv, steps, inputs.as_deref(), svg),
        Command::Collect { common, steps } => commands::collect(&common, &argv, steps),
        Command::Tune { common, data, steps, synthetic } => commands::tune(&common, &argv, data.as_deref(), steps, synthetic),
        Command::Control { common, data, alpha, mode, steps, svg } => {
            commands::control(&common, &argv, data.as_deref(), alpha, &mode, steps, svg)
        }
        Command::Compare { common, data, alpha, steps } => commands::compare(&common, &argv, data.as_deref(), alpha, steps),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
