use std::path::PathBuf;
use std::process::ExitCode;

use bitempo_cli::{run, validate, Command, Format};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bitempo", version, about = "Run two-time dynamics checks from scenario files")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Directory for the report and surface files.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Subcommand)]
enum Cmd {
    /// Admissibility verdicts for a force family at sample points.
    ClassicalCheck(RunArgs),
    /// Rank-one surface x(t1, t2) in one space dimension.
    ClassicalIntegrate(RunArgs),
    /// Mean and variance of the observable over the time plane.
    QuantumFluct(RunArgs),
    /// Visibility class and angle width of spacing budgets.
    Uncertainty(RunArgs),
    /// Charges, separability and the decoupled mean-position limit.
    Continuity(RunArgs),
    /// Plane-wave spinors, current, positivity and density structure.
    Dirac(RunArgs),
    /// Effective mass of extra-time modes over a frequency sweep.
    MassSpectrum(RunArgs),
    /// Check a scenario file without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    let (command, args) = match Cli::parse().command {
        Cmd::Validate { config } => {
            return match validate(&config) {
                Ok(cmd) => {
                    println!("ok ({cmd})");
                    ExitCode::SUCCESS
                }
                Err(diags) => {
                    for d in diags {
                        eprintln!("error: {d}");
                    }
                    ExitCode::from(2)
                }
            };
        }
        Cmd::ClassicalCheck(a) => (Command::ClassicalCheck, a),
        Cmd::ClassicalIntegrate(a) => (Command::ClassicalIntegrate, a),
        Cmd::QuantumFluct(a) => (Command::QuantumFluct, a),
        Cmd::Uncertainty(a) => (Command::Uncertainty, a),
        Cmd::Continuity(a) => (Command::Continuity, a),
        Cmd::Dirac(a) => (Command::Dirac, a),
        Cmd::MassSpectrum(a) => (Command::MassSpectrum, a),
    };
    match run(Some(command), &args.config, &args.out, args.format) {
        Ok(report) => {
            println!(
                "{command}: {} artifact(s) in {} ({:.3} s)",
                report.artifacts.len() + 1,
                args.out.display(),
                report.timing.wall_seconds
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
