use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use lbmlift::experiment::{self, ExperimentConfig};

/// Lattice Boltzmann lifting experiments.
#[derive(Parser)]
#[command(name = "lbmlift", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Io {
    /// Experiment config (`key = value` lines).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Train NCE coefficients and extract the macroscopic PDE.
    Train(Io),
    /// Restrict-then-lift benchmark error for one lifter.
    LiftBench(Io),
    /// Hybrid FTCS/LBM run against the full LBM.
    Hybrid(Io),
    /// Extra LBM steps spent on lifting during a hybrid run.
    Cost(Io),
}

fn run(cli: Cli) -> anyhow::Result<Vec<PathBuf>> {
    let (Command::Train(io) | Command::LiftBench(io) | Command::Hybrid(io) | Command::Cost(io)) =
        &cli.command;
    let cfg = ExperimentConfig::from_file(&io.config)
        .with_context(|| format!("reading {}", io.config.display()))?;
    let out = &io.out;
    Ok(match &cli.command {
        Command::Train(_) => {
            let r = experiment::train(&cfg).context("training")?;
            experiment::write_train(out, &r)?
        }
        Command::LiftBench(_) => {
            let e = experiment::lift_bench(&cfg).context("lift benchmark")?;
            vec![experiment::write_lift_bench(out, &cfg, e)?]
        }
        Command::Hybrid(_) => {
            let e = experiment::hybrid(&cfg).context("hybrid run")?;
            experiment::write_hybrid(out, &e, cfg.write_fields)?
        }
        Command::Cost(_) => {
            let c = experiment::cost(&cfg).context("cost run")?;
            vec![experiment::write_cost(out, &cfg, &c)?]
        }
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
