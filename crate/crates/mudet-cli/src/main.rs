//! `mudet`: BER curves for multiuser detection under impulsive noise.
//!
//! Four subcommands share one config format: `analytic` evaluates the
//! characteristic-function BER average over the SNR grid, `simulate` runs
//! the full seeded Monte Carlo sweep, `oracle` samples the decision
//! statistic directly as an independent cross-check, and `validate` runs
//! the built-in acceptance checks.
//!
//! Exit codes: 0 success, 1 check or output failure, 2 config error,
//! 3 numeric non-convergence.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mudet::ber::{AnalyticBerInputs, BerError};
use mudet::checks::{run_checks, CheckLevel};
use mudet::config::{load_config, ExperimentConfig};
use mudet::interference::count_transitions;
use mudet::sweep::{
    curves_to_csv, emit_results, mc_oracle_interference, results_to_json, run_analytic_curve,
    run_ber_sweep, BerCurve, BerPoint, OutputFormat,
};

#[derive(Parser)]
#[command(
    name = "mudet",
    version,
    about = "Multiuser detection BER curves under impulsive noise"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the analytic average BER over the configured SNR grid.
    Analytic(RunArgs),
    /// Run the seeded Monte Carlo sweep for every configured detector.
    Simulate(RunArgs),
    /// Sample the decision statistic directly (no detector in the loop).
    Oracle(RunArgs),
    /// Run the built-in self-checks and report each one.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Flat key/value experiment description.
    #[arg(long)]
    config: PathBuf,
    /// Replace the configured master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Replace the configured trial count per SNR point.
    #[arg(long)]
    trials: Option<u64>,
    /// Replace the SNR grid (comma-separated dB values).
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    snr: Option<Vec<f64>>,
    /// Write results here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output encoding.
    #[arg(long, default_value = "csv")]
    format: OutputFormat,
}

#[derive(Args)]
struct ValidateArgs {
    /// Also parse and validate this config file first.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Trial-count profile for the checks.
    #[arg(long, default_value = "quick")]
    level: CheckLevel,
}

enum Failure {
    /// Unreadable, unparsable, or invalid configuration.
    Config(String),
    /// Quadrature or cross-check breakdown inside the analysis.
    Numeric(String),
    /// Could not write results.
    Output(String),
    /// Self-checks ran and some failed; the report already printed.
    Checks(usize),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Checks(_) | Failure::Output(_) => 1,
            Failure::Config(_) => 2,
            Failure::Numeric(_) => 3,
        }
    }

    fn report(&self) {
        match self {
            Failure::Config(msg) => eprintln!("config error: {msg}"),
            Failure::Numeric(msg) => eprintln!("numeric failure: {msg}"),
            Failure::Output(msg) => eprintln!("output error: {msg}"),
            Failure::Checks(n) => eprintln!("{n} check(s) failed"),
        }
    }
}

impl From<BerError> for Failure {
    fn from(e: BerError) -> Self {
        match e {
            BerError::Param(p) => Failure::Config(p.to_string()),
            other => Failure::Numeric(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analytic(args) => run_analytic(args),
        Command::Simulate(args) => run_simulate(args),
        Command::Oracle(args) => run_oracle(args),
        Command::Validate(args) => run_validate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            failure.report();
            ExitCode::from(failure.exit_code())
        }
    }
}

fn load_with_overrides(args: &RunArgs) -> Result<ExperimentConfig, Failure> {
    let mut cfg = load_config(&args.config).map_err(|e| Failure::Config(e.to_string()))?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    if let Some(snr) = &args.snr {
        cfg.snr_grid_db = snr.clone();
    }
    cfg.validate().map_err(|e| Failure::Config(e.to_string()))?;
    Ok(cfg)
}

fn write_output(
    curves: &[BerCurve],
    cfg: &ExperimentConfig,
    args: &RunArgs,
) -> Result<(), Failure> {
    match &args.out {
        Some(path) => {
            emit_results(curves, cfg, args.format, path)
                .map_err(|e| Failure::Output(e.to_string()))?;
            eprintln!("wrote {}", path.display());
            Ok(())
        }
        None => {
            let payload = match args.format {
                OutputFormat::Csv => curves_to_csv(curves),
                OutputFormat::Json => results_to_json(cfg, curves),
            };
            print!("{payload}");
            Ok(())
        }
    }
}

fn run_analytic(args: RunArgs) -> Result<(), Failure> {
    let cfg = load_with_overrides(&args)?;
    let curve = run_analytic_curve(&cfg)?;
    write_output(&[curve], &cfg, &args)
}

fn run_simulate(args: RunArgs) -> Result<(), Failure> {
    let cfg = load_with_overrides(&args)?;
    let curves = run_ber_sweep(&cfg).map_err(|e| Failure::Config(e.to_string()))?;
    for curve in &curves {
        if curve.rank_deficient_excluded > 0 {
            eprintln!(
                "warning: {}: {} trial(s) excluded for rank deficiency",
                curve.detector, curve.rank_deficient_excluded
            );
        }
        if curve.nonconverged > 0 {
            eprintln!(
                "note: {}: {} trial(s) hit the iteration cap; last iterates still decided",
                curve.detector, curve.nonconverged
            );
        }
    }
    write_output(&curves, &cfg, &args)
}

fn run_oracle(args: RunArgs) -> Result<(), Failure> {
    let cfg = load_with_overrides(&args)?;
    let signatures = cfg
        .signature_set()
        .map_err(|e| Failure::Config(e.to_string()))?;
    let profile =
        count_transitions(signatures.user(0)).map_err(|e| Failure::Config(e.to_string()))?;
    let mut points = Vec::with_capacity(cfg.snr_grid_db.len());
    for (idx, &snr_db) in cfg.snr_grid_db.iter().enumerate() {
        let noise = cfg
            .noise_for_snr(snr_db)
            .map_err(|e| Failure::Config(e.to_string()))?;
        let inputs = AnalyticBerInputs::from_mixture(profile, cfg.num_users, noise, cfg.cf_mode)
            .map_err(|e| Failure::Config(e.to_string()))?;
        let estimate = mc_oracle_interference(
            &profile,
            cfg.num_users,
            inputs.sigma_n1(),
            cfg.trials,
            cfg.seed.wrapping_add(idx as u64),
        )
        .map_err(|e| Failure::Config(e.to_string()))?;
        points.push(BerPoint::from_counts(
            snr_db,
            estimate.trials,
            estimate.errors,
        ));
    }
    let curve = BerCurve {
        detector: "oracle".to_string(),
        points,
        nonconverged: 0,
        rank_deficient_excluded: 0,
    };
    write_output(&[curve], &cfg, &args)
}

fn run_validate(args: ValidateArgs) -> Result<(), Failure> {
    if let Some(path) = &args.config {
        let cfg = load_config(path).map_err(|e| Failure::Config(e.to_string()))?;
        println!(
            "config ok: {} ({} chips, {} users, {} snr points)",
            path.display(),
            cfg.n,
            cfg.num_users,
            cfg.snr_grid_db.len()
        );
    }
    let outcomes = run_checks(args.level);
    let mut failed = 0usize;
    for outcome in &outcomes {
        println!("{}", outcome.line());
        if !outcome.passed {
            failed += 1;
        }
    }
    println!(
        "{}/{} checks passed",
        outcomes.len() - failed,
        outcomes.len()
    );
    if failed > 0 {
        Err(Failure::Checks(failed))
    } else {
        Ok(())
    }
}
