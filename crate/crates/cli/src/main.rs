use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use dtl_cli::{load_input, render_json, render_table, run, Command, Overrides};

#[derive(Parser)]
#[command(name = "dtl", version, about = "Design and evaluate multi-stage drop-the-loser trials")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Calibrate boundaries and the per-stage sample size.
    Design(Args),
    /// Operating characteristics of the design.
    Evaluate(Args),
    /// Compare analytic values with a Monte Carlo simulation.
    Simulate(Args),
    /// Compare the design with drop-the-loser, multi-arm and separate-trial alternatives.
    Compare(Args),
}

#[derive(clap::Args)]
struct Args {
    /// Configuration file, or a design record written by `design`.
    #[arg(long)]
    config: PathBuf,
    /// Write the JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the JSON report instead of the table.
    #[arg(long)]
    json: bool,
    /// Seed for integration shifts and simulation streams.
    #[arg(long)]
    seed: Option<u64>,
    /// Simulation replicates.
    #[arg(long)]
    reps: Option<u64>,
    /// Integration target for reported probabilities.
    #[arg(long)]
    tol: Option<f64>,
    /// Override `calibration.alpha`.
    #[arg(long)]
    alpha: Option<f64>,
    /// Override `calibration.power`.
    #[arg(long)]
    power: Option<f64>,
    /// Override `calibration.omega`.
    #[arg(long)]
    omega: Option<f64>,
}

fn execute(command: Command, a: &Args) -> Result<()> {
    let text = std::fs::read_to_string(&a.config).with_context(|| format!("reading {}", a.config.display()))?;
    let input = load_input(&text).with_context(|| format!("in {}", a.config.display()))?;
    let overrides = Overrides {
        seed: a.seed,
        reps: a.reps,
        tol: a.tol,
        alpha: a.alpha,
        power: a.power,
        omega: a.omega,
    };
    let report = run(command, input, &overrides)?;
    let json = render_json(&report)?;
    if let Some(path) = &a.out {
        std::fs::write(path, &json).with_context(|| format!("writing {}", path.display()))?;
    }
    if a.json {
        print!("{json}");
    } else {
        print!("{}", render_table(&report));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match &cli.command {
        Cmd::Design(a) => (Command::Design, a),
        Cmd::Evaluate(a) => (Command::Evaluate, a),
        Cmd::Simulate(a) => (Command::Simulate, a),
        Cmd::Compare(a) => (Command::Compare, a),
    };
    match execute(command, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
