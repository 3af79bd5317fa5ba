//! Experiment configuration: the flat key/value file format, detector
//! selection, and the SNR convention tying the sweep to the noise model.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::detect::PenaltyFunction;
use crate::fading::FadingParams;
use crate::noise::{CfMode, MixtureNoiseParams};
use crate::sequences::{default_taps, SignatureSet};
use crate::ParamError;

/// Core-breakpoint multiple of the nominal noise scale shared by all robust
/// kinds.
pub const CORE_TUNING: f64 = 1.345;
/// Redescent onset as a multiple of the nominal noise scale.
pub const REDESCEND_TUNING: f64 = 3.0;
/// Hampel's hard-cutoff multiple.
pub const CUTOFF_TUNING: f64 = 6.0;

/// Detector selected for a sweep; maps to a penalty with breakpoints scaled
/// by the nominal noise deviation of the operating point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectorKind {
    Decorrelating,
    Huber,
    Hampel,
    ExpTail,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 4] = [
        DetectorKind::Decorrelating,
        DetectorKind::Huber,
        DetectorKind::Hampel,
        DetectorKind::ExpTail,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            DetectorKind::Decorrelating => "decorrelating",
            DetectorKind::Huber => "huber",
            DetectorKind::Hampel => "hampel",
            DetectorKind::ExpTail => "exp-tail",
        }
    }

    /// Penalty with default breakpoints scaled by the nominal (uncontaminated)
    /// chip-noise deviation `nominal_std`.
    pub fn penalty(&self, nominal_std: f64) -> Result<PenaltyFunction, ParamError> {
        let v = nominal_std;
        match self {
            DetectorKind::Decorrelating => Ok(PenaltyFunction::LeastSquares),
            DetectorKind::Huber => PenaltyFunction::huber(CORE_TUNING * v),
            DetectorKind::Hampel => {
                PenaltyFunction::hampel(CORE_TUNING * v, REDESCEND_TUNING * v, CUTOFF_TUNING * v)
            }
            DetectorKind::ExpTail => {
                PenaltyFunction::exp_tail(CORE_TUNING * v, REDESCEND_TUNING * v)
            }
        }
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for DetectorKind {
    type Err = ParamError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .find(|k| k.label() == s)
            .copied()
            .ok_or_else(|| {
                ParamError(format!(
                    "unknown detector '{s}' (expected decorrelating, huber, hampel, or exp-tail)"
                ))
            })
    }
}

/// Interferer chip-delay policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DelaysMode {
    /// All users aligned (synchronous system).
    Zero,
    /// Interferer delays drawn uniformly over the chips of a symbol.
    RandomChip,
}

impl DelaysMode {
    pub fn label(&self) -> &'static str {
        match self {
            DelaysMode::Zero => "zero",
            DelaysMode::RandomChip => "random-chip",
        }
    }
}

impl fmt::Display for DelaysMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for DelaysMode {
    type Err = ParamError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "zero" => Ok(DelaysMode::Zero),
            "random-chip" => Ok(DelaysMode::RandomChip),
            other => Err(ParamError(format!(
                "unknown delays mode '{other}' (expected zero or random-chip)"
            ))),
        }
    }
}

/// A full experiment description. Fields are public; [`ExperimentConfig::validate`]
/// is called by every entry point that consumes one.
///
/// SNR convention: `snr_db = 10 log10(E[|g|^2] / (2 sigma_c^2))` where
/// `sigma_c^2 = (1-eps) v^2 + eps kappa v^2` is the per-component chip-noise
/// variance and the fading is normalized to `E[|g|^2] = 1`. Any fixed
/// monotone mapping would preserve detector orderings; this one is chosen so
/// fully Gaussian noise (`eps = 0`) gives the textbook per-chip SNR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Processing gain (chips per symbol); must be `2^m - 1` for a known
    /// m-sequence degree `m`.
    pub n: usize,
    pub num_users: usize,
    pub snr_grid_db: Vec<f64>,
    pub epsilon: f64,
    pub kappa: f64,
    /// Symbols simulated per SNR point.
    pub trials: u64,
    pub seed: u64,
    pub detectors: Vec<DetectorKind>,
    pub fading: FadingParams,
    pub delays_mode: DelaysMode,
    /// Noise transform used by analytic curves.
    pub cf_mode: CfMode,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ParamError> {
        self.degree()?;
        if self.num_users < 1 || self.num_users > self.n {
            return Err(ParamError(format!(
                "user count must lie in 1..={}, got {}",
                self.n, self.num_users
            )));
        }
        if self.delays_mode == DelaysMode::RandomChip && 2 * self.num_users - 1 > self.n {
            return Err(ParamError(format!(
                "random delays can split each interferer into two columns; \
                 need 2*num_users-1 <= n, got {} users against n={}",
                self.num_users, self.n
            )));
        }
        if self.snr_grid_db.is_empty() {
            return Err(ParamError("snr grid must be nonempty".into()));
        }
        if self.snr_grid_db.iter().any(|s| !s.is_finite()) {
            return Err(ParamError("snr grid entries must be finite".into()));
        }
        if self.snr_grid_db.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ParamError("snr grid must be strictly increasing".into()));
        }
        if self.trials < 1 {
            return Err(ParamError("trials must be at least 1".into()));
        }
        if self.detectors.is_empty() {
            return Err(ParamError("detector list must be nonempty".into()));
        }
        for (i, d) in self.detectors.iter().enumerate() {
            if self.detectors[..i].contains(d) {
                return Err(ParamError(format!("duplicate detector '{d}'")));
            }
        }
        // Noise shape parameters, checked with a placeholder scale.
        MixtureNoiseParams::new(1.0, self.epsilon, self.kappa)?;
        Ok(())
    }

    /// m-sequence degree for the configured gain.
    pub fn degree(&self) -> Result<u32, ParamError> {
        let next = self.n.checked_add(1).filter(|v| v.is_power_of_two());
        let degree = next.map(|v| v.trailing_zeros());
        match degree.and_then(|d| default_taps(d).map(|_| d)) {
            Some(d) => Ok(d),
            None => Err(ParamError(format!(
                "gain must be 2^m - 1 with a known degree-m polynomial, got {}",
                self.n
            ))),
        }
    }

    /// Shifted m-sequence signatures for the configured gain and user count.
    pub fn signature_set(&self) -> Result<SignatureSet, ParamError> {
        let degree = self.degree()?;
        SignatureSet::from_m_sequence(degree, default_taps(degree).unwrap(), self.num_users)
    }

    /// Per-component chip-noise deviation realizing the SNR convention.
    pub fn chip_noise_sigma(&self, snr_db: f64) -> f64 {
        (10f64.powf(-snr_db / 10.0) / 2.0).sqrt()
    }

    /// Mixture noise whose total per-component variance realizes `snr_db`.
    pub fn noise_for_snr(&self, snr_db: f64) -> Result<MixtureNoiseParams, ParamError> {
        let sigma_c = self.chip_noise_sigma(snr_db);
        let scale = ((1.0 - self.epsilon) + self.epsilon * self.kappa).sqrt();
        MixtureNoiseParams::new(sigma_c / scale, self.epsilon, self.kappa)
    }
}

/// Configuration failure, carrying the offending line for file input.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn parse_scalar<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value.parse().map_err(|e| ConfigError::Parse {
        line,
        message: format!("bad value for {key}: {e}"),
    })
}

fn parse_list<T: FromStr>(line: usize, key: &str, value: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: fmt::Display,
{
    value
        .split(',')
        .map(|item| parse_scalar(line, key, item.trim()))
        .collect()
}

/// Parses the flat `key = value` configuration format.
///
/// `#` starts a comment, blank lines are skipped, and every key is one of:
/// `n`, `num_users`, `snr_grid_db`, `epsilon`, `kappa`, `trials`, `seed`,
/// `detectors`, `fading.pole_radius`, `fading.peak_freq_hz`,
/// `fading.symbol_rate`, `delays_mode`, `cf_mode`. Lists are comma-separated.
/// Unknown and duplicate keys are errors. The three `fading.*` keys default
/// to a 80 Hz peak at pole radius 0.998 and 10 kbaud; `delays_mode` defaults
/// to `random-chip` and `cf_mode` to `effective-gaussian`.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut n = None;
    let mut num_users = None;
    let mut snr_grid_db: Option<Vec<f64>> = None;
    let mut epsilon = None;
    let mut kappa = None;
    let mut trials = None;
    let mut seed = None;
    let mut detectors: Option<Vec<DetectorKind>> = None;
    let mut pole_radius = None;
    let mut peak_freq_hz = None;
    let mut symbol_rate = None;
    let mut delays_mode = None;
    let mut cf_mode = None;

    let mut seen: Vec<String> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(ConfigError::Parse {
                line,
                message: format!("expected 'key = value', got '{content}'"),
            });
        };
        let key = key.trim();
        let value = value.trim();
        if seen.iter().any(|k| k == key) {
            return Err(ConfigError::Parse {
                line,
                message: format!("duplicate key '{key}'"),
            });
        }
        seen.push(key.to_string());
        match key {
            "n" => n = Some(parse_scalar(line, key, value)?),
            "num_users" => num_users = Some(parse_scalar(line, key, value)?),
            "snr_grid_db" => snr_grid_db = Some(parse_list(line, key, value)?),
            "epsilon" => epsilon = Some(parse_scalar(line, key, value)?),
            "kappa" => kappa = Some(parse_scalar(line, key, value)?),
            "trials" => trials = Some(parse_scalar(line, key, value)?),
            "seed" => seed = Some(parse_scalar(line, key, value)?),
            "detectors" => detectors = Some(parse_list(line, key, value)?),
            "fading.pole_radius" => pole_radius = Some(parse_scalar(line, key, value)?),
            "fading.peak_freq_hz" => peak_freq_hz = Some(parse_scalar(line, key, value)?),
            "fading.symbol_rate" => symbol_rate = Some(parse_scalar(line, key, value)?),
            "delays_mode" => delays_mode = Some(parse_scalar(line, key, value)?),
            "cf_mode" => {
                cf_mode = Some(match value {
                    "effective-gaussian" => CfMode::EffectiveGaussian,
                    "mixture" => CfMode::Mixture,
                    other => {
                        return Err(ConfigError::Parse {
                            line,
                            message: format!(
                                "unknown cf mode '{other}' (expected effective-gaussian or mixture)"
                            ),
                        })
                    }
                })
            }
            other => {
                return Err(ConfigError::Parse {
                    line,
                    message: format!("unknown key '{other}'"),
                })
            }
        }
    }

    let missing = |field: &str| ConfigError::Invalid(format!("missing required key '{field}'"));
    let fading = FadingParams::new(
        pole_radius.unwrap_or(0.998),
        peak_freq_hz.unwrap_or(80.0),
        symbol_rate.unwrap_or(10_000.0),
    )
    .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let cfg = ExperimentConfig {
        n: n.ok_or_else(|| missing("n"))?,
        num_users: num_users.ok_or_else(|| missing("num_users"))?,
        snr_grid_db: snr_grid_db.ok_or_else(|| missing("snr_grid_db"))?,
        epsilon: epsilon.ok_or_else(|| missing("epsilon"))?,
        kappa: kappa.ok_or_else(|| missing("kappa"))?,
        trials: trials.ok_or_else(|| missing("trials"))?,
        seed: seed.ok_or_else(|| missing("seed"))?,
        detectors: detectors.ok_or_else(|| missing("detectors"))?,
        fading,
        delays_mode: delays_mode.unwrap_or(DelaysMode::RandomChip),
        cf_mode: cf_mode.unwrap_or(CfMode::EffectiveGaussian),
    };
    cfg.validate()
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    Ok(cfg)
}

/// Reads and parses a configuration file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}
