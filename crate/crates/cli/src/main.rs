use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use liftctl::experiment::assumptions;
use liftctl::{run_experiment, run_sweep, ExperimentConfig, RowStatus, RunError};

#[derive(Parser)]
#[command(name = "liftctl", about = "Constrained adaptive tracking simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one configuration and certify the trajectory.
    Run {
        config: PathBuf,
        /// Output directory, overriding `[output] dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every combination listed under `[sweep]`.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample the plant assumptions over the safe set.
    CheckAssumptions {
        config: PathBuf,
        /// Grid points per axis.
        #[arg(long, default_value_t = 101)]
        grid: usize,
    },
    Version,
}

fn load(path: &Path) -> Result<ExperimentConfig, RunError> {
    Ok(ExperimentConfig::load(path)?)
}

fn execute(cli: Cli) -> Result<u8, RunError> {
    match cli.command {
        Command::Run { config, out } => {
            let cfg = load(&config)?;
            let dir = out.unwrap_or_else(|| cfg.output.dir.clone());
            let outcome = run_experiment(&cfg, &dir)?;
            let c = &outcome.certificate;
            println!("wrote {}", outcome.out_dir.display());
            if let Some(msg) = &c.failure {
                eprintln!("simulation stopped: {msg}");
            }
            if let Some(a) = &outcome.adjudication {
                println!("preferred p2_law_sign = {}", a.preferred);
            }
            println!("certificate: {}", if c.all_passed() { "pass" } else { "fail" });
            Ok(if c.all_passed() { 0 } else { 3 })
        }
        Command::Sweep { config, out } => {
            let cfg = load(&config)?;
            let dir = out.unwrap_or_else(|| cfg.output.dir.clone());
            let rows = run_sweep(&cfg, &dir)?;
            let invalid = rows.iter().filter(|r| r.status == RowStatus::InvalidConfig).count();
            let unsafe_rows = rows.iter().filter(|r| r.status != RowStatus::InvalidConfig && !r.safe).count();
            println!(
                "{} rows ({} invalid-config, {} unsafe) -> {}",
                rows.len(),
                invalid,
                unsafe_rows,
                dir.join("sweep.csv").display()
            );
            Ok(if unsafe_rows == 0 { 0 } else { 3 })
        }
        Command::CheckAssumptions { config, grid } => {
            let cfg = load(&config)?;
            let report = assumptions(&cfg, grid)?;
            println!("samples = {}", report.samples);
            println!("violations = {}", report.violations.len());
            for v in report.violations.iter().take(20) {
                println!("violation: {} at x = ({}, {}), value {}", v.kind, v.x1, v.x2, v.value);
            }
            for n in &report.notes {
                println!("note: {n}");
            }
            Ok(if report.passed() { 0 } else { 3 })
        }
        Command::Version => {
            println!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"));
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
