//! Seeded BER sweeps and result emission.
//!
//! Trials are split into fixed-size shards, each driven by its own counter
//! RNG stream derived from `(seed, snr index, shard index)`. Shards run in
//! parallel and reduce by integer error counts, so output bytes depend only
//! on the configuration, never on the worker count. All detectors in a sweep
//! judge the same received vectors, which keeps their BER estimates paired
//! for ordering comparisons.

use std::fmt;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ber::{AnalyticBerInputs, BerError};
use crate::channel::{ChannelRealization, SymbolEpoch};
use crate::config::{DelaysMode, ExperimentConfig};
use crate::detect::{detect_symbols, m_estimate, PenaltyFunction, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::interference::{count_transitions, sample_interferer, BoundaryProfile};
use crate::sequences::SignatureSet;
use crate::ParamError;

/// Symbols per shard; part of the determinism contract, since each shard
/// owns one RNG stream.
pub const SHARD_SYMBOLS: u64 = 1 << 14;

/// One measured point of a BER curve. Analytic points carry `trials = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BerPoint {
    pub snr_db: f64,
    pub trials: u64,
    pub errors: u64,
    pub ber: f64,
    pub stderr: f64,
}

impl BerPoint {
    pub fn from_counts(snr_db: f64, trials: u64, errors: u64) -> Self {
        let (ber, stderr) = if trials == 0 {
            (0.0, 0.0)
        } else {
            let p = errors as f64 / trials as f64;
            (p, (p * (1.0 - p) / trials as f64).sqrt())
        };
        Self {
            snr_db,
            trials,
            errors,
            ber,
            stderr,
        }
    }

    pub fn analytic(snr_db: f64, ber: f64) -> Self {
        Self {
            snr_db,
            trials: 0,
            errors: 0,
            ber,
            stderr: 0.0,
        }
    }
}

/// A labeled BER-versus-SNR curve with solver diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerCurve {
    pub detector: String,
    pub points: Vec<BerPoint>,
    /// Trials whose IRLS hit the iteration cap; their last iterates still
    /// produced decisions.
    pub nonconverged: u64,
    /// Trials dropped because the composite matrix was rank-deficient.
    pub rank_deficient_excluded: u64,
}

fn shard_lengths(trials: u64) -> Vec<u64> {
    let full = trials / SHARD_SYMBOLS;
    let rest = trials % SHARD_SYMBOLS;
    let mut lengths = vec![SHARD_SYMBOLS; full as usize];
    if rest > 0 {
        lengths.push(rest);
    }
    lengths
}

fn stream_id(snr_idx: usize, shard_idx: usize) -> u64 {
    debug_assert!(shard_idx < (1 << 40));
    ((snr_idx as u64) << 40) | shard_idx as u64
}

struct ShardTally {
    snr_idx: usize,
    errors: Vec<u64>,
    nonconverged: Vec<u64>,
    included: u64,
    excluded: u64,
}

fn run_shard(
    cfg: &ExperimentConfig,
    signatures: &SignatureSet,
    snr_idx: usize,
    shard_idx: usize,
    shard_len: u64,
) -> Result<ShardTally, ParamError> {
    let noise = cfg.noise_for_snr(cfg.snr_grid_db[snr_idx])?;
    let penalties: Vec<PenaltyFunction> = cfg
        .detectors
        .iter()
        .map(|d| d.penalty(noise.nominal_std()))
        .collect::<Result<_, _>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream_id(snr_idx, shard_idx));

    // Index 0 never gets decided (interferers need a previous symbol), so
    // the shard draws one extra.
    let num_symbols = shard_len as usize + 1;
    let channel = match cfg.delays_mode {
        DelaysMode::RandomChip => {
            ChannelRealization::generate(signatures.clone(), num_symbols, &cfg.fading, &mut rng)?
        }
        DelaysMode::Zero => ChannelRealization::generate_with_delays(
            signatures.clone(),
            vec![0; signatures.num_users()],
            num_symbols,
            &cfg.fading,
            &mut rng,
        )?,
    };
    let target_col = channel
        .composite()
        .roles()
        .iter()
        .position(|r| r.user == 0 && r.epoch == SymbolEpoch::Current)
        .expect("the target user always contributes a current-epoch column");
    let matrix = channel.composite().matrix();

    let mut tally = ShardTally {
        snr_idx,
        errors: vec![0; penalties.len()],
        nonconverged: vec![0; penalties.len()],
        included: 0,
        excluded: 0,
    };
    let mut outcomes = Vec::with_capacity(penalties.len());
    for i in 1..num_symbols {
        let y = channel.synthesize_received(i, &noise, &mut rng)?;
        let g1 = channel.fading(0)[i];
        let truth = channel.symbols(0)[i];
        outcomes.clear();
        for pf in &penalties {
            let Ok(est) = m_estimate(&y, matrix, pf, DEFAULT_TOL, DEFAULT_MAX_ITER) else {
                break;
            };
            let Ok(decision) = detect_symbols(&[est.theta_hat[target_col]], &[g1]) else {
                break;
            };
            outcomes.push((decision[0] != truth, !est.converged));
        }
        // Estimation failures (a rank-deficient matrix, or fading exactly
        // zero) hit every detector the same way; the trial is excluded for
        // all of them so the per-curve denominators stay paired.
        if outcomes.len() < penalties.len() {
            tally.excluded += 1;
            continue;
        }
        tally.included += 1;
        for (d, &(error, nonconverged)) in outcomes.iter().enumerate() {
            tally.errors[d] += u64::from(error);
            tally.nonconverged[d] += u64::from(nonconverged);
        }
    }
    Ok(tally)
}

/// Monte Carlo BER of every configured detector over the SNR grid,
/// deterministic in `cfg` (seed included) regardless of worker count.
pub fn run_ber_sweep(cfg: &ExperimentConfig) -> Result<Vec<BerCurve>, ParamError> {
    cfg.validate()?;
    let signatures = cfg.signature_set()?;
    let lengths = shard_lengths(cfg.trials);
    let jobs: Vec<(usize, usize, u64)> = (0..cfg.snr_grid_db.len())
        .flat_map(|si| {
            lengths
                .iter()
                .enumerate()
                .map(move |(sh, &len)| (si, sh, len))
        })
        .collect();
    let tallies: Vec<ShardTally> = jobs
        .par_iter()
        .map(|&(si, sh, len)| run_shard(cfg, &signatures, si, sh, len))
        .collect::<Result<_, _>>()?;

    let num_detectors = cfg.detectors.len();
    let num_points = cfg.snr_grid_db.len();
    let mut errors = vec![vec![0u64; num_points]; num_detectors];
    let mut nonconverged = vec![0u64; num_detectors];
    let mut included = vec![0u64; num_points];
    let mut excluded = 0u64;
    for t in &tallies {
        included[t.snr_idx] += t.included;
        excluded += t.excluded;
        for d in 0..num_detectors {
            errors[d][t.snr_idx] += t.errors[d];
            nonconverged[d] += t.nonconverged[d];
        }
    }
    Ok(cfg
        .detectors
        .iter()
        .enumerate()
        .map(|(d, kind)| BerCurve {
            detector: kind.label().to_string(),
            points: (0..num_points)
                .map(|p| BerPoint::from_counts(cfg.snr_grid_db[p], included[p], errors[d][p]))
                .collect(),
            nonconverged: nonconverged[d],
            rank_deficient_excluded: excluded,
        })
        .collect())
}

/// Fourier-side BER of the target user over the SNR grid, as a curve with
/// `trials = 0` records.
pub fn run_analytic_curve(cfg: &ExperimentConfig) -> Result<BerCurve, BerError> {
    cfg.validate()?;
    let signatures = cfg.signature_set()?;
    let profile = count_transitions(signatures.user(0))?;
    let mut points = Vec::with_capacity(cfg.snr_grid_db.len());
    for &snr_db in &cfg.snr_grid_db {
        let noise = cfg.noise_for_snr(snr_db)?;
        let inputs = AnalyticBerInputs::from_mixture(profile, cfg.num_users, noise, cfg.cf_mode)?;
        let ber = inputs.average_ber(&inputs.averaging_spec())?;
        points.push(BerPoint::analytic(snr_db, ber));
    }
    Ok(BerCurve {
        detector: "analytic".to_string(),
        points,
        nonconverged: 0,
        rank_deficient_excluded: 0,
    })
}

/// Empirical BER with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleEstimate {
    pub trials: u64,
    pub errors: u64,
    pub ber: f64,
    pub stderr: f64,
}

/// Samples the target user's decision statistic directly, with no chips,
/// detector, or matrix in the loop: a unit-scale Rayleigh amplitude times
/// the gain, plus one composite interference draw per other user, plus
/// Gaussian noise of deviation `sigma_n1`. Reports the empirical probability
/// that the statistic goes negative given a +1 symbol. Serves as an
/// independent oracle for the Fourier-side average BER.
pub fn mc_oracle_interference(
    prof: &BoundaryProfile,
    num_users: usize,
    sigma_n1: f64,
    trials: u64,
    seed: u64,
) -> Result<OracleEstimate, ParamError> {
    if trials < 10_000 {
        return Err(ParamError(format!(
            "oracle needs at least 10000 trials for a meaningful standard error, got {trials}"
        )));
    }
    if num_users < 1 {
        return Err(ParamError("user count must be at least 1".into()));
    }
    if !(sigma_n1.is_finite() && sigma_n1 >= 0.0) {
        return Err(ParamError(format!(
            "noise deviation must be finite and nonnegative, got {sigma_n1}"
        )));
    }
    let gain = prof.chips() as f64;
    let errors: u64 = shard_lengths(trials)
        .par_iter()
        .enumerate()
        .map(|(shard_idx, &len)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(shard_idx as u64);
            let mut errors = 0u64;
            for _ in 0..len {
                let u: f64 = rng.random();
                let amplitude = (-2.0 * (1.0 - u).ln()).sqrt();
                let mut statistic = amplitude * gain;
                for _ in 1..num_users {
                    statistic += sample_interferer(prof, &mut rng);
                }
                let z: f64 = rng.sample(StandardNormal);
                statistic += sigma_n1 * z;
                if statistic < 0.0 {
                    errors += 1;
                }
            }
            errors
        })
        .sum();
    let ber = errors as f64 / trials as f64;
    Ok(OracleEstimate {
        trials,
        errors,
        ber,
        stderr: (ber * (1.0 - ber) / trials as f64).sqrt(),
    })
}

/// Output encoding for result files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        })
    }
}

impl FromStr for OutputFormat {
    type Err = ParamError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(ParamError(format!(
                "unknown format '{other}' (expected csv or json)"
            ))),
        }
    }
}

/// Everything needed to reproduce a result file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsDocument {
    pub seed: u64,
    pub config: ExperimentConfig,
    pub curves: Vec<BerCurve>,
}

/// Renders curves as CSV. Floats use the shortest representation that
/// parses back to the identical value.
pub fn curves_to_csv(curves: &[BerCurve]) -> String {
    let mut out = String::from("detector,snr_db,trials,errors,ber,stderr\n");
    for curve in curves {
        for p in &curve.points {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                curve.detector, p.snr_db, p.trials, p.errors, p.ber, p.stderr
            )
            .expect("string writes cannot fail");
        }
    }
    out
}

/// Renders curves plus the resolved configuration and seed as JSON.
pub fn results_to_json(cfg: &ExperimentConfig, curves: &[BerCurve]) -> String {
    let doc = ResultsDocument {
        seed: cfg.seed,
        config: cfg.clone(),
        curves: curves.to_vec(),
    };
    serde_json::to_string_pretty(&doc).expect("result documents hold only finite numbers")
}

/// File-writing failure with the attempted path.
#[derive(Debug, thiserror::Error)]
#[error("cannot write {path}: {source}")]
pub struct EmitError {
    pub path: PathBuf,
    #[source]
    pub source: std::io::Error,
}

/// Writes curves to `path` in the requested format.
pub fn emit_results(
    curves: &[BerCurve],
    cfg: &ExperimentConfig,
    format: OutputFormat,
    path: &Path,
) -> Result<(), EmitError> {
    let payload = match format {
        OutputFormat::Csv => curves_to_csv(curves),
        OutputFormat::Json => results_to_json(cfg, curves),
    };
    std::fs::write(path, payload).map_err(|source| EmitError {
        path: path.to_path_buf(),
        source,
    })
}
