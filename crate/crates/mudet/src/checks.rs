//! Self-validation: every library-level claim with an independent oracle,
//! packaged as named checks behind the CLI's `validate` subcommand and the
//! acceptance test target.
//!
//! Each check reports what it measured against what it expected, so a
//! failure is diagnosable from the report alone. `Quick` trims Monte Carlo
//! trial counts to finish fast; `Full` runs everything at the advertised
//! tolerances.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::ber::{AnalyticBerInputs, NoiseCf};
use crate::config::{DelaysMode, DetectorKind, ExperimentConfig};
use crate::detect::{decorrelate, m_estimate, PenaltyFunction, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::fading::{generate_fading, FadingParams};
use crate::interference::{
    interferer_cf, interferer_cf_at_offset, offset_kernel, sample_interferer, BoundaryProfile,
};
use crate::noise::{CfMode, MixtureNoiseParams};
use crate::quad::{integrate, integrate_oscillatory, QuadratureSpec};
use crate::sequences::{cyclic_autocorrelation, default_taps, generate_m_sequence, SignatureSet};
use crate::sweep::{curves_to_csv, mc_oracle_interference, run_ber_sweep};

/// Trial-count profile for the checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckLevel {
    /// Reduced Monte Carlo budgets; aims to finish in well under a minute.
    Quick,
    /// The advertised trial counts and tolerances.
    Full,
}

impl fmt::Display for CheckLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CheckLevel::Quick => "quick",
            CheckLevel::Full => "full",
        })
    }
}

impl FromStr for CheckLevel {
    type Err = crate::ParamError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "quick" => Ok(CheckLevel::Quick),
            "full" => Ok(CheckLevel::Full),
            other => Err(crate::ParamError(format!(
                "unknown level '{other}' (expected quick or full)"
            ))),
        }
    }
}

/// One check's verdict with its evidence.
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub measured: String,
    pub expected: String,
}

impl CheckOutcome {
    pub fn line(&self) -> String {
        format!(
            "{} {}: {} (expected {})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.expected
        )
    }
}

const OMEGA_GRID: [f64; 6] = [0.0, 0.1, 0.5, 1.0, 2.0, 5.0];

fn fail(name: &'static str, expected: &str, error: impl fmt::Display) -> CheckOutcome {
    CheckOutcome {
        name,
        passed: false,
        measured: format!("error: {error}"),
        expected: expected.to_string(),
    }
}

/// Closed-form offset kernel against direct numerical averaging of its
/// defining integral, over the whole lattice neighborhood used in practice.
pub fn check_offset_kernel_oracle() -> CheckOutcome {
    let name = "offset-kernel-oracle";
    let expected = "max |difference| <= 1e-8 over (i,j) in [-4,4]^2, omega in the grid";
    let spec = match QuadratureSpec::with_tolerances(1.0, 1e-13, 0.0, 40) {
        Ok(s) => s,
        Err(e) => return fail(name, expected, e),
    };
    let mut max_diff = 0.0f64;
    for i in -4..=4i64 {
        for j in -4..=4i64 {
            for &omega in &OMEGA_GRID {
                let integrand = |s: f64| {
                    let root = i as f64 + j as f64 * (1.0 - 2.0 * s);
                    (-0.5 * omega * omega * root * root).exp()
                };
                let oracle = match integrate(integrand, 0.0, 1.0, &spec) {
                    Ok(q) => q.value,
                    Err(e) => return fail(name, expected, e),
                };
                max_diff = max_diff.max((offset_kernel(i, j, omega) - oracle).abs());
            }
        }
    }
    CheckOutcome {
        name,
        passed: max_diff <= 1e-8,
        measured: format!("max |difference| = {max_diff:.3e}"),
        expected: expected.to_string(),
    }
}

/// Offset-averaged per-interferer CF against the numerical average of the
/// conditional CF, for every transition count at two gains.
pub fn check_cf_offset_average_closure() -> CheckOutcome {
    let name = "cf-offset-average-closure";
    let expected = "max |difference| <= 1e-8 for n in {5,7}, every transition count";
    let spec = match QuadratureSpec::with_tolerances(1.0, 1e-12, 0.0, 40) {
        Ok(s) => s,
        Err(e) => return fail(name, expected, e),
    };
    let mut max_diff = 0.0f64;
    for n in [5usize, 7] {
        for b in 0..n {
            let prof = match BoundaryProfile::new(n, b) {
                Ok(p) => p,
                Err(e) => return fail(name, expected, e),
            };
            for &omega in &OMEGA_GRID {
                // Quadrature nodes are interior, so the offset stays in
                // the half-open domain.
                let integrand = |s: f64| {
                    interferer_cf_at_offset(omega, s, &prof)
                        .expect("interior offsets are always valid")
                };
                let averaged = match integrate(integrand, 0.0, 1.0, &spec) {
                    Ok(q) => q.value,
                    Err(e) => return fail(name, expected, e),
                };
                max_diff = max_diff.max((interferer_cf(omega, &prof) - averaged).abs());
            }
        }
    }
    CheckOutcome {
        name,
        passed: max_diff <= 1e-8,
        measured: format!("max |difference| = {max_diff:.3e}"),
        expected: expected.to_string(),
    }
}

/// Empirical CF of composite-interference draws against the averaged CF.
pub fn check_cf_sampling_consistency() -> CheckOutcome {
    let name = "cf-sampling-consistency";
    let expected = "max |empirical - analytic| <= 3e-3 at 1e6 draws, n=7, 3 transitions";
    let prof = match BoundaryProfile::new(7, 3) {
        Ok(p) => p,
        Err(e) => return fail(name, expected, e),
    };
    let trials = 1_000_000u64;
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut sums = [0.0f64; OMEGA_GRID.len()];
    for _ in 0..trials {
        let x = sample_interferer(&prof, &mut rng);
        for (slot, &omega) in sums.iter_mut().zip(&OMEGA_GRID) {
            *slot += (omega * x).cos();
        }
    }
    let mut max_diff = 0.0f64;
    for (slot, &omega) in sums.iter().zip(&OMEGA_GRID) {
        let empirical = slot / trials as f64;
        max_diff = max_diff.max((empirical - interferer_cf(omega, &prof)).abs());
    }
    CheckOutcome {
        name,
        passed: max_diff <= 3e-3,
        measured: format!("max |difference| = {max_diff:.3e}"),
        expected: expected.to_string(),
    }
}

/// The sine-transform identity behind the fading average, plus agreement of
/// the two independently assembled average-BER forms across a configuration
/// battery.
pub fn check_quadrature_identities() -> CheckOutcome {
    let name = "quadrature-identities";
    let expected =
        "sine identity within 1e-8 for k in {0,0.5,1,2,4}; |direct - split| <= 1e-8 on the battery";
    let spec = match QuadratureSpec::with_tolerances(9.0, 1e-12, 0.0, 40) {
        Ok(s) => s,
        Err(e) => return fail(name, expected, e),
    };
    let mut max_sine = 0.0f64;
    for k in [0.0, 0.5, 1.0, 2.0, 4.0] {
        let integrand = |x: f64| (k * x).sin() * x * (-0.5 * x * x).exp();
        let value = match integrate_oscillatory(integrand, 0.0, 9.0, k, &spec) {
            Ok(q) => q.value,
            Err(e) => return fail(name, expected, e),
        };
        let closed = (PI / 2.0).sqrt() * k * (-0.5 * k * k).exp();
        max_sine = max_sine.max((value - closed).abs());
    }

    let mixture = |v, eps, kappa| MixtureNoiseParams::new(v, eps, kappa).unwrap();
    let battery: Vec<(usize, usize, usize, NoiseCf)> = vec![
        (7, 3, 1, NoiseCf::fixed_sigma(1.0).unwrap()),
        (7, 3, 3, NoiseCf::fixed_sigma(1.0).unwrap()),
        (
            7,
            3,
            3,
            NoiseCf::from_mixture(mixture(1.0, 0.1, 100.0), CfMode::EffectiveGaussian),
        ),
        (
            7,
            3,
            3,
            NoiseCf::from_mixture(mixture(1.0, 0.1, 100.0), CfMode::Mixture),
        ),
        (
            31,
            15,
            4,
            NoiseCf::from_mixture(mixture(0.5, 0.01, 100.0), CfMode::EffectiveGaussian),
        ),
        (
            31,
            15,
            2,
            NoiseCf::from_mixture(mixture(0.7, 0.2, 25.0), CfMode::Mixture),
        ),
    ];
    let mut max_forms = 0.0f64;
    for (n, b, users, noise) in battery {
        let inputs = match BoundaryProfile::new(n, b)
            .and_then(|prof| AnalyticBerInputs::new(prof, users, noise))
        {
            Ok(i) => i,
            Err(e) => return fail(name, expected, e),
        };
        let forms = match inputs.average_ber_forms(&inputs.averaging_spec()) {
            Ok(f) => f,
            Err(e) => return fail(name, expected, e),
        };
        max_forms = max_forms.max((forms.direct - forms.split).abs());
    }
    CheckOutcome {
        name,
        passed: max_sine <= 1e-8 && max_forms <= 1e-8,
        measured: format!("sine max |difference| = {max_sine:.3e}, forms max = {max_forms:.3e}"),
        expected: expected.to_string(),
    }
}

/// Single-user average BER against the Rayleigh-averaged closed form.
pub fn check_single_user_closed_form() -> CheckOutcome {
    let name = "single-user-closed-form";
    let expected = "0.0050252 +- 1e-6 (closed form (1 - 7/sqrt(50))/2)";
    let result = BoundaryProfile::new(7, 3)
        .and_then(|prof| {
            AnalyticBerInputs::new(prof, 1, NoiseCf::fixed_sigma(1.0).expect("valid sigma"))
        })
        .map_err(crate::ber::BerError::from)
        .and_then(|inputs| inputs.average_ber(&inputs.averaging_spec()));
    match result {
        Ok(ber) => CheckOutcome {
            name,
            passed: (ber - 0.0050252).abs() <= 1e-6,
            measured: format!("average ber = {ber:.10}"),
            expected: expected.to_string(),
        },
        Err(e) => fail(name, expected, e),
    }
}

/// Fourier-side average BER against the direct statistic sampler.
pub fn check_analytic_vs_sampling_oracle(level: CheckLevel) -> CheckOutcome {
    let name = "analytic-vs-sampling-oracle";
    let expected = "|z| <= 3 binomial standard errors at sigma in {1,3}, n=7, 3 users";
    let trials = match level {
        CheckLevel::Quick => 1_000_000,
        CheckLevel::Full => 10_000_000,
    };
    let prof = match BoundaryProfile::new(7, 3) {
        Ok(p) => p,
        Err(e) => return fail(name, expected, e),
    };
    let mut measured = Vec::new();
    let mut max_z = 0.0f64;
    for (idx, sigma) in [1.0f64, 3.0].into_iter().enumerate() {
        let noise = match NoiseCf::fixed_sigma(sigma) {
            Ok(n) => n,
            Err(e) => return fail(name, expected, e),
        };
        let analytic = match AnalyticBerInputs::new(prof, 3, noise)
            .map_err(crate::ber::BerError::from)
            .and_then(|inputs| inputs.average_ber(&inputs.averaging_spec()))
        {
            Ok(b) => b,
            Err(e) => return fail(name, expected, e),
        };
        let oracle = match mc_oracle_interference(&prof, 3, sigma, trials, 600 + idx as u64) {
            Ok(o) => o,
            Err(e) => return fail(name, expected, e),
        };
        let z = (analytic - oracle.ber) / oracle.stderr;
        max_z = max_z.max(z.abs());
        measured.push(format!(
            "sigma {sigma}: analytic {analytic:.6e}, sampled {:.6e}, z = {z:+.2}",
            oracle.ber
        ));
    }
    CheckOutcome {
        name,
        passed: max_z <= 3.0,
        measured: measured.join("; "),
        expected: expected.to_string(),
    }
}

/// Penalty derivative identities: finite differences against the influence
/// function, branch continuity, and the tail constant.
pub fn check_penalty_calculus() -> CheckOutcome {
    let name = "penalty-calculus";
    let expected = "fd |rho' - psi| <= 1e-6 off breakpoints; continuity <= 1e-12; \
                    tail constant = 3ab/2 - a^2/2";
    let a = 1.345f64;
    let b = 3.0f64;
    let c = 6.0f64;
    let kinds = [
        PenaltyFunction::Huber { a },
        PenaltyFunction::Hampel { a, b, c },
        PenaltyFunction::ExpTail { a, b },
    ];
    let mut max_fd = 0.0f64;
    let mut max_jump = 0.0f64;
    for pf in &kinds {
        let guards: &[f64] = match pf {
            PenaltyFunction::Huber { .. } => &[a],
            PenaltyFunction::Hampel { .. } => &[a, b, c],
            PenaltyFunction::ExpTail { .. } => &[a, b],
            PenaltyFunction::LeastSquares => &[],
        };
        let h = 1e-5;
        let steps = 1083;
        for k in 0..=steps {
            let x = -5.0 * b + 10.0 * b * k as f64 / steps as f64;
            if guards.iter().any(|&g| (x.abs() - g).abs() < 1e-3) {
                continue;
            }
            let slope = (pf.rho(x + h) - pf.rho(x - h)) / (2.0 * h);
            max_fd = max_fd.max((slope - pf.psi(x)).abs());
        }
        for &g in guards {
            for sign in [-1.0, 1.0] {
                let lo = sign * g * (1.0 - 1e-13);
                let hi = sign * g * (1.0 + 1e-13);
                max_jump = max_jump.max((pf.rho(lo) - pf.rho(hi)).abs());
                max_jump = max_jump.max((pf.psi(lo) - pf.psi(hi)).abs());
            }
        }
    }
    // Solve the tail constant from continuity at b and compare with the
    // closed form: the tail is d - (ab/2) exp(1 - x^2/b^2).
    let exp_tail = PenaltyFunction::ExpTail { a, b };
    let d_implied = exp_tail.rho(2.0 * b) + 0.5 * a * b * (1.0 - 4.0f64).exp();
    let d_closed = 1.5 * a * b - 0.5 * a * a;
    let d_diff = (d_implied - d_closed).abs();
    CheckOutcome {
        name,
        passed: max_fd <= 1e-6 && max_jump <= 1e-12 && d_diff <= 1e-12,
        measured: format!(
            "fd max = {max_fd:.3e}, continuity max = {max_jump:.3e}, |d - closed| = {d_diff:.3e}"
        ),
        expected: expected.to_string(),
    }
}

/// Noise-free recovery for every estimator kind and exact agreement of the
/// least-squares kind with the decorrelator.
pub fn check_detector_sanity() -> CheckOutcome {
    let name = "detector-sanity";
    let expected = "noise-free recovery <= 1e-10 for all kinds; least-squares bit-identical";
    let signatures = match SignatureSet::from_m_sequence(5, 0x25, 4) {
        Ok(s) => s,
        Err(e) => return fail(name, expected, e),
    };
    let m = DMatrix::from_fn(31, 4, |r, c| signatures.user(c)[r] as f64);
    let mut rng = ChaCha8Rng::seed_from_u64(801);
    let theta = DVector::from_fn(4, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let clean = DVector::from_fn(31, |r, _| {
        (0..4).map(|c| theta[c] * m[(r, c)]).sum::<Complex64>()
    });
    let kinds = [
        PenaltyFunction::LeastSquares,
        PenaltyFunction::Huber { a: 1.345 },
        PenaltyFunction::Hampel {
            a: 1.345,
            b: 3.0,
            c: 6.0,
        },
        PenaltyFunction::ExpTail { a: 1.345, b: 3.0 },
    ];
    let mut max_err = 0.0f64;
    for pf in &kinds {
        match m_estimate(&clean, &m, pf, DEFAULT_TOL, DEFAULT_MAX_ITER) {
            Ok(est) => max_err = max_err.max((est.theta_hat - &theta).norm()),
            Err(e) => return fail(name, expected, e),
        }
    }

    let noisy = DVector::from_fn(31, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let via_penalty = match m_estimate(
        &noisy,
        &m,
        &PenaltyFunction::LeastSquares,
        DEFAULT_TOL,
        DEFAULT_MAX_ITER,
    ) {
        Ok(est) => est.theta_hat,
        Err(e) => return fail(name, expected, e),
    };
    let direct = match decorrelate(&noisy, &m) {
        Ok(t) => t,
        Err(e) => return fail(name, expected, e),
    };
    let bit_identical = via_penalty
        .iter()
        .zip(direct.iter())
        .all(|(p, d)| p.re == d.re && p.im == d.im);
    CheckOutcome {
        name,
        passed: max_err <= 1e-10 && bit_identical,
        measured: format!("max recovery error = {max_err:.3e}, bit-identical = {bit_identical}"),
        expected: expected.to_string(),
    }
}

/// The headline claim: under impulsive contamination the redescending kind
/// beats Hampel beats Huber beats the decorrelator.
pub fn check_robustness_ordering(level: CheckLevel) -> CheckOutcome {
    let name = "robustness-ordering";
    let expected = "ber chain exp-tail <= hampel <= huber <= decorrelating within 2 combined \
                    standard errors at every snr; decorrelating - exp-tail >= 5 combined \
                    standard errors at >= 2 of 3 points";
    let trials = match level {
        CheckLevel::Quick => 16_384,
        CheckLevel::Full => 100_000,
    };
    let fading = match FadingParams::new(0.998, 80.0, 10_000.0) {
        Ok(f) => f,
        Err(e) => return fail(name, expected, e),
    };
    let cfg = ExperimentConfig {
        n: 31,
        num_users: 4,
        snr_grid_db: vec![6.0, 8.0, 10.0],
        epsilon: 0.1,
        kappa: 100.0,
        trials,
        seed: 1009,
        detectors: vec![
            DetectorKind::Decorrelating,
            DetectorKind::Huber,
            DetectorKind::Hampel,
            DetectorKind::ExpTail,
        ],
        fading,
        delays_mode: DelaysMode::RandomChip,
        cf_mode: CfMode::EffectiveGaussian,
    };
    let curves = match run_ber_sweep(&cfg) {
        Ok(c) => c,
        Err(e) => return fail(name, expected, e),
    };
    let combined = |i: usize, j: usize, p: usize| -> f64 {
        (curves[i].points[p].stderr.powi(2) + curves[j].points[p].stderr.powi(2)).sqrt()
    };
    let mut chain_ok = true;
    let mut separated = 0;
    let mut rows = Vec::new();
    for p in 0..cfg.snr_grid_db.len() {
        // Detector indices: 0 decorrelating, 1 huber, 2 hampel, 3 exp-tail.
        for (robust, weaker) in [(3, 2), (2, 1), (1, 0)] {
            let slack = 2.0 * combined(robust, weaker, p);
            if curves[robust].points[p].ber > curves[weaker].points[p].ber + slack {
                chain_ok = false;
            }
        }
        let gap = curves[0].points[p].ber - curves[3].points[p].ber;
        if gap >= 5.0 * combined(0, 3, p) {
            separated += 1;
        }
        rows.push(format!(
            "{} dB: {}",
            cfg.snr_grid_db[p],
            curves
                .iter()
                .map(|c| format!("{} {:.4e}", c.detector, c.points[p].ber))
                .collect::<Vec<_>>()
                .join(", ")
        ));
    }
    let nonconverged: u64 = curves.iter().map(|c| c.nonconverged).sum();
    CheckOutcome {
        name,
        passed: chain_ok && separated >= 2,
        measured: format!(
            "{}; separated at {separated}/3 points; nonconverged trials {nonconverged}",
            rows.join("; ")
        ),
        expected: expected.to_string(),
    }
}

fn dft_power(samples: &[Complex64], freq_hz: f64, rate: f64) -> f64 {
    let step = Complex64::from_polar(1.0, -TAU * freq_hz / rate);
    let mut phase = Complex64::new(1.0, 0.0);
    let mut acc = Complex64::new(0.0, 0.0);
    for &x in samples {
        acc += x * phase;
        phase *= step;
    }
    acc.norm_sqr()
}

/// Spreading-sequence properties, the fading spectral peak, and byte-level
/// determinism of sweep output across worker counts.
pub fn check_infrastructure(level: CheckLevel) -> CheckOutcome {
    let name = "infrastructure";
    let expected = "m-sequences balanced with two-valued autocorrelation for degrees 3-7; \
                    fading peak within 5 Hz of 80 Hz; identical csv bytes with 1, 4, 8 workers";

    let mut seq_ok = true;
    for degree in 3..=7u32 {
        let taps = match default_taps(degree) {
            Some(t) => t,
            None => return fail(name, expected, "missing default polynomial"),
        };
        let seq = match generate_m_sequence(degree, taps) {
            Ok(s) => s,
            Err(e) => return fail(name, expected, e),
        };
        let n = seq.len() as i64;
        let plus = seq.iter().filter(|&&c| c == 1).count() as i64;
        if 2 * plus != n + 1 {
            seq_ok = false;
        }
        if cyclic_autocorrelation(&seq, 0) != n {
            seq_ok = false;
        }
        for lag in 1..seq.len() {
            if cyclic_autocorrelation(&seq, lag) != -1 {
                seq_ok = false;
            }
        }
    }

    let fading = match FadingParams::new(0.998, 80.0, 10_000.0) {
        Ok(f) => f,
        Err(e) => return fail(name, expected, e),
    };
    let samples = match level {
        CheckLevel::Quick => 1 << 16,
        CheckLevel::Full => 1 << 19,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let stream = generate_fading(samples, &fading, &mut rng);
    let rate = fading.symbol_rate();
    let (peak_freq, _) = (2..=500)
        .into_par_iter()
        .map(|f| (f as f64, dft_power(&stream, f as f64, rate)))
        .reduce(
            || (0.0, f64::NEG_INFINITY),
            |a, b| if a.1 >= b.1 { a } else { b },
        );
    let peak_ok = (peak_freq - 80.0).abs() <= 5.0;

    let cfg = ExperimentConfig {
        n: 7,
        num_users: 2,
        snr_grid_db: vec![4.0, 8.0],
        epsilon: 0.1,
        kappa: 100.0,
        trials: match level {
            CheckLevel::Quick => 16_400,
            CheckLevel::Full => 40_000,
        },
        seed: 77,
        detectors: vec![DetectorKind::Decorrelating, DetectorKind::ExpTail],
        fading,
        delays_mode: DelaysMode::RandomChip,
        cf_mode: CfMode::EffectiveGaussian,
    };
    let mut outputs = Vec::new();
    for workers in [1usize, 4, 8] {
        let pool = match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
            Ok(p) => p,
            Err(e) => return fail(name, expected, e),
        };
        match pool.install(|| run_ber_sweep(&cfg)) {
            Ok(curves) => outputs.push(curves_to_csv(&curves)),
            Err(e) => return fail(name, expected, e),
        }
    }
    let deterministic = outputs.windows(2).all(|w| w[0] == w[1]);

    CheckOutcome {
        name,
        passed: seq_ok && peak_ok && deterministic,
        measured: format!(
            "sequences ok = {seq_ok}, spectral peak = {peak_freq} Hz, \
             identical bytes across workers = {deterministic}"
        ),
        expected: expected.to_string(),
    }
}

/// Runs every check in order.
pub fn run_checks(level: CheckLevel) -> Vec<CheckOutcome> {
    vec![
        check_offset_kernel_oracle(),
        check_cf_offset_average_closure(),
        check_cf_sampling_consistency(),
        check_quadrature_identities(),
        check_single_user_closed_form(),
        check_analytic_vs_sampling_oracle(level),
        check_penalty_calculus(),
        check_detector_sanity(),
        check_robustness_ordering(level),
        check_infrastructure(level),
    ]
}
