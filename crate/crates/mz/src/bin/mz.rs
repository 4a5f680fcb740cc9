//! The `mz` command line: truncation experiment runner plus the potential
//! and symbol utilities.  All heavy lifting lives in the library.

use clap::{Parser, Subcommand, ValueEnum};
use mz::harness;
use mz::truncation::make_profile;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "mz", about = "Uniform truncation of fields near convex constraint sets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a truncation experiment from a JSON config.
    Truncate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Build a state field through the Euler potential and verify the
    /// constraint residual.
    EulerPotential {
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        grid: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Symbol-level exactness check of a constraint/potential pair.
    SymbolCheck {
        #[arg(long, value_enum)]
        pair: Pair,
        #[arg(long)]
        dim: usize,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Emit the derivative certificate of the mollification radius profile.
    ProfileCert {
        #[arg(long)]
        epsilon: f64,
        #[arg(long, default_value_t = 100_000)]
        points: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Pair {
    Euler,
    Symgrad,
}

fn run() -> mz::Result<()> {
    harness::init_threads();
    let cli = Cli::parse();
    match cli.command {
        Command::Truncate { config, out_dir } => {
            let cfg = harness::load_config(&config)?;
            let summary = harness::run_config(&cfg, out_dir.as_deref())?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(())
        }
        Command::EulerPotential { dim, grid, seed, out, report } => {
            let rep = harness::run_euler_potential(dim, grid, seed, out.as_deref(), report.as_deref())?;
            println!("{}", serde_json::to_string_pretty(&rep)?);
            Ok(())
        }
        Command::SymbolCheck { pair, dim, trials, tol } => {
            let name = match pair {
                Pair::Euler => "euler",
                Pair::Symgrad => "symgrad",
            };
            let report = harness::run_symbol_check(name, dim, trials, tol)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            if report.ok {
                Ok(())
            } else {
                Err(mz::MzError::Invariant(format!(
                    "{} of {} frequencies failed the exactness check",
                    report.failures.len(),
                    report.trials
                )))
            }
        }
        Command::ProfileCert { epsilon, points } => {
            let profile = make_profile(epsilon, 1.0)?;
            let cert = profile.certificate(points);
            println!("{}", serde_json::to_string_pretty(&cert)?);
            if cert.satisfied {
                Ok(())
            } else {
                Err(mz::MzError::Invariant("profile derivative bounds violated".into()))
            }
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
