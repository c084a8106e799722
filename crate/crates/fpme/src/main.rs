use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fpme::commands::{cmd_analyze, cmd_build_operator, cmd_evolve, cmd_solve_profile};
use fpme::figures::cmd_reproduce_figure;
use fpme::{CliError, ExperimentConfig, Status};

/// Exit codes: 0 success, 1 configuration or input error, 2 numerical
/// failure, 3 checker failure.
#[derive(Parser)]
#[command(name = "fpme", version, about = "Discrete fractional porous medium experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding the config's `out`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Cap the grid at 256 nodes.
    #[arg(long, global = true)]
    fast: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Assemble the operator and write kernel and Green bound reports.
    BuildOperator,
    /// Solve the stationary profile and check its boundary behavior.
    SolveProfile,
    /// Evolve the configured datum and write a trajectory directory.
    Evolve,
    /// Run the selected checkers on a stored or freshly computed trajectory.
    Analyze {
        /// Trajectory directory written by `evolve`.
        #[arg(long)]
        trajectory: Option<PathBuf>,
    },
    /// Write the data behind figure 1, 2 or 3.
    ReproduceFigure {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=3))]
        which: u8,
    },
}

fn load(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let path = cli.config.as_deref().ok_or_else(|| CliError::Config("--config <path> is required".into()))?;
    ExperimentConfig::load(path)?.resolve(cli.fast, cli.out.as_deref())
}

fn dispatch(cli: &Cli) -> Result<Status, CliError> {
    match &cli.command {
        Command::BuildOperator => cmd_build_operator(&load(cli)?),
        Command::SolveProfile => cmd_solve_profile(&load(cli)?),
        Command::Evolve => cmd_evolve(&load(cli)?),
        Command::Analyze { trajectory } => cmd_analyze(&load(cli)?, trajectory.as_deref()),
        Command::ReproduceFigure { which } => {
            let out = cli.out.clone().unwrap_or_else(|| Path::new("out").join(format!("figure{which}")));
            cmd_reproduce_figure(*which, &out, cli.fast)
        }
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
    match dispatch(&cli) {
        Ok(st) => {
            for line in &st.summary {
                println!("{line}");
            }
            if st.checker_failed {
                eprintln!("fpme: checker failure");
                ExitCode::from(3)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("fpme: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
