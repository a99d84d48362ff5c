use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use numinv_core::runner::{run_file, Module, RunOptions};

/// Runs scenario files and writes report.json, summary.txt and tables/*.csv.
#[derive(Parser)]
#[command(name = "numinv", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Master seed; overrides the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, default_value = "numinv-out")]
    out_dir: PathBuf,

    /// Multiplies every check tolerance.
    #[arg(long, global = true, default_value_t = 1.0)]
    tol_scale: f64,

    /// Evaluate independent checks concurrently.
    #[arg(long, global = true)]
    parallel: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Preference values and counterexamples.
    Static { scenario: PathBuf },
    /// Log-optimal choice and probability recovery.
    Choice { scenario: PathBuf },
    /// Canonical pairs on event trees.
    Decompose { scenario: PathBuf },
    /// Numeraire portfolios, optimal consumption and random times.
    Market { scenario: PathBuf },
    /// Monte Carlo checks.
    Mc { scenario: PathBuf },
    /// Every check in the scenario.
    All { scenario: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (module, path) = match cli.command {
        Command::Static { scenario } => (Some(Module::Static), scenario),
        Command::Choice { scenario } => (Some(Module::Choice), scenario),
        Command::Decompose { scenario } => (Some(Module::Decompose), scenario),
        Command::Market { scenario } => (Some(Module::Market), scenario),
        Command::Mc { scenario } => (Some(Module::Mc), scenario),
        Command::All { scenario } => (None, scenario),
    };
    let opts = RunOptions {
        module,
        seed: cli.seed,
        tol_scale: cli.tol_scale,
        parallel: cli.parallel,
    };
    let report = match run_file(&path, &opts) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = report.emit(&cli.out_dir) {
        eprintln!("error: cannot write to {}: {e}", cli.out_dir.display());
        return ExitCode::from(2);
    }
    print!("{}", report.summary());
    if report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
