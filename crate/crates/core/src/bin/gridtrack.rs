use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gridtrack::engine::commands;
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "gridtrack",
    version,
    about = "Continuous-time DER setpoint tracking on radial feeders"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write trajectory.csv and metrics.json.
    Simulate {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a scenario against the exact solutions and the iterative baselines.
    Compare {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Report how well the online estimator recovers the line reactances.
    Estimate { scenario: PathBuf },
    /// Write the seeded synthetic profiles.
    GenProfiles {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-step wall-time report.
    Bench { scenario: PathBuf },
}

fn print<T: Serialize>(report: &T) -> gridtrack::Result<()> {
    println!("{}", serde_json::to_string_pretty(report)?);
    Ok(())
}

fn dispatch(command: Command) -> gridtrack::Result<()> {
    match command {
        Command::Simulate { scenario, out } => print(&commands::simulate(&scenario, &out)?),
        Command::Compare { scenario, out } => print(&commands::compare(&scenario, out.as_deref())?),
        Command::Estimate { scenario } => print(&commands::estimate(&scenario)?),
        Command::GenProfiles { seed, out } => {
            for path in commands::gen_profiles(seed, &out)? {
                println!("{}", path.display());
            }
            Ok(())
        }
        Command::Bench { scenario } => print(&commands::bench(&scenario)?),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
