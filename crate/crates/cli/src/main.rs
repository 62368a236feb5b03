use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crossreg_cli::commands::display_path;
use crossreg_cli::config::OUT_DIR_ENV;
use crossreg_cli::{cmd_bench, cmd_scenario, cmd_simulate, cmd_tune, parse_config, CliError, Format, Overrides, RunConfig};

#[derive(Parser)]
#[command(version, about = "Simulate and tune weighted voltage-mode control of a three-output forward converter")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration; defaults apply when omitted
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Optimizer: ica, pso or aco
    #[arg(long, global = true)]
    algo: Option<String>,

    /// Run only this scenario
    #[arg(long, global = true)]
    scenario: Option<String>,

    /// Output directory
    #[arg(long, global = true, env = OUT_DIR_ENV)]
    out: Option<PathBuf>,

    /// Comma-separated subset of csv,json,svg
    #[arg(long, global = true, value_delimiter = ',')]
    format: Option<Vec<Format>>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// One closed-loop run: trace CSV, voltage plot and summary
    Simulate,
    /// Tune the weights: weights JSON, convergence history and plot
    Tune,
    /// Compare methods on the scenarios: regulation and convergence tables
    Scenario,
    /// Optimizer validation on analytic test functions
    Bench,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => parse_config(path)?,
        None => RunConfig::default(),
    };
    cfg.apply(&Overrides {
        seed: cli.seed,
        algo: cli.algo,
        scenario: cli.scenario,
        out_dir: cli.out,
        formats: cli.format,
    })?;
    let written = match cli.command {
        Command::Simulate => cmd_simulate(&cfg)?,
        Command::Tune => cmd_tune(&cfg)?,
        Command::Scenario => cmd_scenario(&cfg)?,
        Command::Bench => cmd_bench(&cfg)?,
    };
    for p in written {
        println!("wrote {}", display_path(&p));
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
