mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Covariance steering for linear time-varying jump-diffusion systems.
#[derive(Debug, Parser)]
#[command(name = "covsteer", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Certify controllability of a scenario's system.
    Check {
        /// Scenario file, or the name of a built-in scenario.
        scenario: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve for Pi0 and write the gain schedule.
    Solve {
        scenario: String,
        #[command(flatten)]
        emit: Emit,
    },
    /// Solve, then run the closed-loop Monte Carlo.
    Simulate {
        scenario: String,
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        emit: Emit,
    },
    /// Run the full pipeline on a built-in example.
    Reproduce {
        which: Example,
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        emit: Emit,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Example {
    Example1,
    Example2,
}

#[derive(Debug, Args)]
struct SimArgs {
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct Emit {
    /// Output directory (defaults to the scenario's `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the gain schedule to this file instead of `<out>/gains.csv`.
    #[arg(long)]
    emit_gains: Option<PathBuf>,
    /// Also write Pi(t) on the gain grid to this file.
    #[arg(long)]
    emit_pi: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Check { scenario, out } => commands::check(&scenario, out),
        Command::Solve { scenario, emit } => commands::solve(&scenario, &emit.into()),
        Command::Simulate { scenario, sim, emit } => commands::simulate(&scenario, &sim.into(), &emit.into()),
        Command::Reproduce { which, sim, emit } => {
            let name = match which {
                Example::Example1 => "example1",
                Example::Example2 => "example2",
            };
            commands::reproduce(name, &sim.into(), &emit.into())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

impl From<SimArgs> for commands::SimOverrides {
    fn from(a: SimArgs) -> Self {
        commands::SimOverrides {
            paths: a.paths,
            dt: a.dt,
            seed: a.seed,
        }
    }
}

impl From<Emit> for commands::EmitOptions {
    fn from(e: Emit) -> Self {
        commands::EmitOptions {
            out: e.out,
            gains: e.emit_gains,
            pi: e.emit_pi,
        }
    }
}
