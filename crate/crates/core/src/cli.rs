//! `sbl` command-line driver.
//!
//! Exit codes: 0 success, 1 invalid input (arguments, config, scenario),
//! 2 runtime failure (I/O, numerical breakdown, failed selftest).

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::{parse_config, ExperimentConfig};
use crate::error::Error;
use crate::experiments::{format_csv, nmse, run_sweep, trial_inputs, write_atomically, SweepResult};
use crate::selftest::run_selftest;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "sbl", version, about = "Sparse Bayesian channel estimation experiments")]
pub struct Cli {
    /// Print per-value progress to stderr.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every configured estimator on one channel draw.
    Estimate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a Monte Carlo sweep and write the aggregated CSV.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Run the built-in invariant suite.
    Selftest,
}

enum Failure {
    Validation(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Scenario(_) | Error::Shape { .. } | Error::NonPositive { .. } => {
                Failure::Validation(e.to_string())
            }
            Error::NonFinite(_) | Error::Conditioning { .. } | Error::Io(_) => Failure::Runtime(e.to_string()),
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{e}");
                return EXIT_VALIDATION;
            }
            let _ = write!(out, "{e}");
            return EXIT_OK;
        }
    };
    let result = match &cli.command {
        Command::Estimate { config, out: path, seed } => estimate(config, path, *seed, out),
        Command::Sweep { config, out: path, seed, trials } => sweep(config, path, *seed, *trials, cli.verbose, out, err),
        Command::Selftest => selftest(out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Validation(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_VALIDATION
        }
        Err(Failure::Runtime(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_RUNTIME
        }
    }
}

fn load(path: &Path) -> Result<ExperimentConfig, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Validation(format!("cannot read config {}: {e}", path.display())))?;
    Ok(parse_config(&text)?)
}

fn estimate(config: &Path, path: &Path, seed: Option<u64>, out: &mut dyn Write) -> Result<(), Failure> {
    let mut cfg = load(config)?;
    if let Some(s) = seed {
        cfg.scenario.seed = s;
    }
    let (h, obs) = trial_inputs(&cfg.scenario, 0)?;
    let dict = cfg.scenario.dictionary()?;
    let hypers = cfg.hyper.hypers();
    let mut estimators = cfg.estimators();
    estimators.sort();
    estimators.dedup();

    let mut csv = String::from("estimator,nmse,iterations,converged\n");
    for kind in estimators {
        let report = kind.run(&dict, &obs.z, obs.noise_variance, &hypers, &cfg.policy)?;
        let h_hat = crate::channel::reconstruct_channel(&report.u_hat, dict.transform(), h.rows(), h.cols())?;
        let e = nmse(&[h_hat], std::slice::from_ref(&h))?;
        csv.push_str(&format!("{kind},{e:.16e},{},{}\n", report.iterations, report.converged));
        let _ = writeln!(out, "{kind:>6}  nmse {e:.4e}  iterations {:>4}  converged {}", report.iterations, report.converged);
    }
    write_atomically(path, &csv)?;
    Ok(())
}

fn sweep(
    config: &Path,
    path: &Path,
    seed: Option<u64>,
    trials: Option<usize>,
    verbose: u8,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), Failure> {
    let cfg = load(config)?;
    let mut spec = cfg.sweep_spec()?;
    if let Some(s) = seed {
        spec.base_scenario.seed = s;
    }
    if let Some(t) = trials {
        spec.num_trials = t;
    }
    spec.validate()?;
    if verbose > 0 {
        let _ = writeln!(
            err,
            "sweeping {} over {:?} with {} trials",
            spec.sweep_variable.name(),
            spec.sweep_values,
            spec.num_trials
        );
    }
    let result = run_sweep(&spec)?;
    write_atomically(path, &format_csv(&result))?;
    print_summary(&result, out);
    let failed = result.total_failed();
    if failed > 0 {
        let _ = writeln!(err, "warning: {failed} estimator runs failed and were excluded");
    }
    Ok(())
}

fn print_summary(result: &SweepResult, out: &mut dyn Write) {
    let _ = writeln!(
        out,
        "{:>12} {:>6} {:>12} {:>10} {:>8} {:>6}",
        result.sweep_variable.name(),
        "est",
        "nmse",
        "stderr",
        "iters",
        "trials"
    );
    for c in &result.cells {
        let _ = writeln!(
            out,
            "{:>12} {:>6} {:>12.4e} {:>10.2e} {:>8.1} {:>6}",
            c.value, c.estimator, c.nmse_mean, c.nmse_stderr, c.iters_mean, c.trials
        );
    }
}

fn selftest(out: &mut dyn Write) -> Result<(), Failure> {
    let report = run_selftest();
    for c in &report.checks {
        let _ = writeln!(out, "{} {}: {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail);
    }
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Runtime("selftest failed".into()))
    }
}
