use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hvi_core::cli::{run_file, Command};

/// Finite element solver and verification harness for heat conduction with
/// nonmonotone boundary conditions.
#[derive(Parser)]
#[command(name = "hvi", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve one boundary value problem.
    Solve(Io),
    /// Run a verification experiment.
    Experiment(Io),
    /// Tabulate a potential and check its hypotheses.
    CheckPotential(Io),
}

#[derive(Args)]
struct Io {
    /// Run configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to output.dir from the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, io) = match cli.command {
        Cmd::Solve(io) => (Command::Solve, io),
        Cmd::Experiment(io) => (Command::Experiment, io),
        Cmd::CheckPotential(io) => (Command::CheckPotential, io),
    };
    let outcome = run_file(command, &io.config, io.out.as_deref());
    if outcome.status == 0 {
        println!("{}", outcome.message);
    } else {
        eprintln!("{}", outcome.message);
    }
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
    ExitCode::from(outcome.status as u8)
}
