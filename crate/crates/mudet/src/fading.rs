//! Correlated flat Rayleigh fading via a second-order autoregression.
//!
//! Each user's complex coefficient stream comes from the all-pole filter
//! with conjugate poles at radius `r_d` and angle `2*pi*f_p*T`, driven by
//! circular white Gaussian innovations. The innovation variance is chosen in
//! closed form so the stationary process has unit average power, which keeps
//! the envelope exactly Rayleigh; no empirical rescaling is applied.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::ParamError;

/// Pole geometry and rates pinning the fading spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFadingParams")]
pub struct FadingParams {
    pole_radius: f64,
    peak_freq_hz: f64,
    symbol_rate: f64,
}

/// Unvalidated mirror so deserialization funnels through [`FadingParams::new`].
#[derive(Deserialize)]
struct RawFadingParams {
    pole_radius: f64,
    peak_freq_hz: f64,
    symbol_rate: f64,
}

impl TryFrom<RawFadingParams> for FadingParams {
    type Error = ParamError;

    fn try_from(raw: RawFadingParams) -> Result<Self, Self::Error> {
        Self::new(raw.pole_radius, raw.peak_freq_hz, raw.symbol_rate)
    }
}

impl FadingParams {
    pub fn new(pole_radius: f64, peak_freq_hz: f64, symbol_rate: f64) -> Result<Self, ParamError> {
        if !(pole_radius.is_finite() && pole_radius > 0.0 && pole_radius < 1.0) {
            return Err(ParamError(format!(
                "pole radius must lie strictly inside (0, 1), got {pole_radius}"
            )));
        }
        if !(symbol_rate.is_finite() && symbol_rate > 0.0) {
            return Err(ParamError(format!(
                "symbol rate must be finite and positive, got {symbol_rate}"
            )));
        }
        if !(peak_freq_hz.is_finite() && peak_freq_hz > 0.0 && peak_freq_hz < 0.5 * symbol_rate) {
            return Err(ParamError(format!(
                "peak frequency must lie in (0, rate/2) = (0, {}), got {peak_freq_hz}",
                0.5 * symbol_rate
            )));
        }
        Ok(Self {
            pole_radius,
            peak_freq_hz,
            symbol_rate,
        })
    }

    pub fn pole_radius(&self) -> f64 {
        self.pole_radius
    }

    pub fn peak_freq_hz(&self) -> f64 {
        self.peak_freq_hz
    }

    pub fn symbol_rate(&self) -> f64 {
        self.symbol_rate
    }

    /// Pole angle `2*pi*f_p*T` in radians per symbol.
    pub fn pole_angle(&self) -> f64 {
        std::f64::consts::TAU * self.peak_freq_hz / self.symbol_rate
    }

    /// Autoregression coefficients `(2 r cos(theta), -r^2)` of
    /// `g(i) = c1*g(i-1) + c2*g(i-2) + w(i)`.
    pub fn ar_coefficients(&self) -> (f64, f64) {
        let r = self.pole_radius;
        (2.0 * r * self.pole_angle().cos(), -r * r)
    }

    /// Samples discarded before the output window; ten transient time
    /// constants of the pole pair.
    pub fn warmup_len(&self) -> usize {
        (10.0 / (1.0 - self.pole_radius)).ceil() as usize
    }

    /// Per-component innovation standard deviation giving the stationary
    /// process unit average complex power.
    ///
    /// The stationary variance of a real AR(2) with coefficients
    /// `c1 = 2 r cos(theta)`, `c2 = -r^2` is
    /// `sigma_w^2 (1 + r^2) / ((1 - r^2) ((1 + r^2)^2 - c1^2))`;
    /// setting it to 1/2 per component yields this value.
    pub fn innovation_sigma(&self) -> f64 {
        let r2 = self.pole_radius * self.pole_radius;
        let (c1, _) = self.ar_coefficients();
        let var = (1.0 - r2) * ((1.0 + r2) * (1.0 + r2) - c1 * c1) / (2.0 * (1.0 + r2));
        var.sqrt()
    }
}

/// One unit-power fading stream of the given length; deterministic for a
/// fixed RNG stream.
pub fn generate_fading<R: Rng + ?Sized>(
    len: usize,
    params: &FadingParams,
    rng: &mut R,
) -> Vec<Complex64> {
    let (c1, c2) = params.ar_coefficients();
    let sigma = params.innovation_sigma();
    let mut prev = Complex64::new(0.0, 0.0);
    let mut prev2 = Complex64::new(0.0, 0.0);
    let mut out = Vec::with_capacity(len);
    let total = params.warmup_len() + len;
    for step in 0..total {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        let g = c1 * prev + c2 * prev2 + sigma * Complex64::new(re, im);
        prev2 = prev;
        prev = g;
        if step >= total - len {
            out.push(g);
        }
    }
    out
}
