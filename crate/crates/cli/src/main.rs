mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Stochastic routing and wavelength assignment experiments.
#[derive(Debug, Parser)]
#[command(name = "srwa", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Experiment config (TOML).
    config: PathBuf,
    /// Override a config key, e.g. `--set benders.method=benders-x`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Worker threads; 1 runs everything serially.
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory, overriding `output_dir` in the config.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Write into a non-empty output directory.
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one instance and write result.json.
    Solve(RunArgs),
    /// Run the rolling-horizon simulation for one or two policies.
    Simulate(RunArgs),
    /// Sample average approximation bounds per scenario level.
    Saa(RunArgs),
    /// Expected value of the stochastic solution.
    Evss(RunArgs),
    /// Check bundled or given topology files against the published sizes.
    ValidateTopology {
        /// Network names or edge-list paths; all bundled networks when empty.
        targets: Vec<String>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => commands::solve(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Saa(a) => commands::saa(&a),
        Command::Evss(a) => commands::evss(&a),
        Command::ValidateTopology { targets } => commands::validate_topology(&targets),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::Outcome::Error as u8)
        }
    }
}
