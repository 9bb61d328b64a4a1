//! Batch runner for CR Yamabe flow experiments.
//!
//! Exit status: 0 when every requested check passes, 1 when a check fails,
//! 2 for usage or configuration errors, 3 for numerical terminal events.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use num_complex::Complex64;

use cr_yamabe::action::ActionOptions;
use cr_yamabe::{Error, GridDims, Section5Params};

use commands::{InitialOptions, MonitorOptions, OperatorOptions, Outcome};

const EXIT_FAIL: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(name = "cr-yamabe", version, about = "CR Yamabe flow on the standard 3-sphere")]
struct Cli {
    /// Worker threads (1 gives bit-reproducible runs).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the flow from a JSON config and write trace, Harnack and snapshot files.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides "out" in the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the discrete frame operators against exact oracles.
    VerifyOperators {
        #[arg(long, default_value = "16,16,16")]
        grid: GridDims,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// Tolerance for the random-polynomial and commutation checks
        /// (degree-4 fields carry ~2e-6 truncation error on 16³).
        #[arg(long, default_value_t = 1e-5)]
        poly_tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the torsion-free initial data λ = −ln|az₁ + bz₂ + c|.
    VerifyInitialData {
        #[arg(long, default_value = "16,16,16")]
        grid: GridDims,
        /// Complex parameters as "re" or "re,im".
        #[arg(long, default_value = "0.1", value_parser = parse_complex)]
        a: Complex64,
        #[arg(long, default_value = "0.05", value_parser = parse_complex)]
        b: Complex64,
        #[arg(long, default_value = "1.0", value_parser = parse_complex)]
        c: Complex64,
        /// Number of exact rational sample points.
        #[arg(long, default_value_t = 8)]
        points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Also compare against the closed-form curvature printed with the data.
        #[arg(long)]
        printed_formula: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute Y and sample Z − Y on the snapshots of a finished run.
    HarnackMonitor {
        #[arg(long)]
        run: PathBuf,
        /// Random Legendrian fields per snapshot.
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Tolerance for Y ≥ −tol (defaults to the run's own).
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bound the path action between point pairs and check the integrated Harnack inequality.
    PathAction {
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        run: PathBuf,
        #[arg(long, default_value_t = 8)]
        segments: usize,
        #[arg(long, default_value_t = 6)]
        random_starts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize the manifest of a run directory.
    Report {
        #[arg(long)]
        run: PathBuf,
    },
}

fn parse_complex(s: &str) -> Result<Complex64, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |p: &str| p.parse::<f64>().map_err(|e| format!("{p:?}: {e}"));
    match parts.as_slice() {
        [re] => Ok(Complex64::new(num(re)?, 0.0)),
        [re, im] => Ok(Complex64::new(num(re)?, num(im)?)),
        _ => Err(format!("expected \"re\" or \"re,im\", got {s:?}")),
    }
}

fn error_code(e: &Error) -> u8 {
    match e {
        Error::NumericalConsistency { .. }
        | Error::Reachability { .. }
        | Error::PathStep { .. }
        | Error::StepFailure { .. }
        | Error::StaleCache => EXIT_NUMERICAL,
        _ => EXIT_USAGE,
    }
}

fn dispatch(cli: Cli) -> cr_yamabe::Result<u8> {
    let th = cli.threads;
    let outcome: Outcome = match cli.command {
        Command::Run { config, out } => commands::run(&config, out, th)?,
        Command::VerifyOperators { grid, tol, poly_tol, seed, out } => {
            commands::verify_operators(&OperatorOptions { grid, tol, poly_tol, seed }, out, th)?
        }
        Command::VerifyInitialData { grid, a, b, c, points, seed, tol, printed_formula, out } => {
            let params = Section5Params::new(a, b, c)?;
            commands::verify_initial_data(&InitialOptions { grid, params, points, seed, tol, printed_formula }, out, th)?
        }
        Command::HarnackMonitor { run, samples, seed, tol, out } => {
            commands::harnack_monitor(&run, &MonitorOptions { samples, seed, tol }, out, th)?
        }
        Command::PathAction { pairs, run, segments, random_starts, seed, out } => {
            let opts = ActionOptions { segments, random_starts, seed, ..Default::default() };
            commands::path_action(&pairs, &run, &opts, out, th)?
        }
        Command::Report { run } => {
            let (text, m) = commands::report(&run)?;
            print!("{text}");
            let numerical = m.terminal.as_ref().is_some_and(|t| t.is_numerical());
            return Ok(status(numerical, m.all_pass()));
        }
    };
    let m = &outcome.manifest;
    for c in &m.checks {
        println!("{:<32} {}", c.name, c.status.label());
    }
    Ok(status(outcome.numerical, m.all_pass()))
}

fn status(numerical: bool, pass: bool) -> u8 {
    if numerical {
        EXIT_NUMERICAL
    } else if pass {
        0
    } else {
        EXIT_FAIL
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(error_code(&e))
        }
    }
}
