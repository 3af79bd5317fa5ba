//! Error rates of the despreading receiver under multiple-access
//! interference and impulsive noise.
//!
//! The decision statistic for the target user is `A1*N*b1 + I + n1`: the
//! faded antipodal symbol scaled by the processing gain, the summed
//! interference of the other users, and despread noise. `I` and `n1` are
//! independent and symmetric, so error probabilities follow from Fourier
//! inversion of the product of their characteristic functions:
//!
//! * [`AnalyticBerInputs::disturbance_cdf`] inverts the product CF to the
//!   distribution of `I + n1`.
//! * [`AnalyticBerInputs::conditional_ber`] gives the error probability at a
//!   fixed fading amplitude as a closed-form noise tail plus an interference
//!   correction integral.
//! * [`AnalyticBerInputs::average_ber`] averages the conditional rate over a
//!   unit-scale Rayleigh amplitude. It evaluates two independent reductions
//!   of that average and insists they agree before reporting either, so a
//!   quadrature fault surfaces as an error instead of a plausible number.

use std::f64::consts::{PI, TAU};

use crate::interference::{interferer_cf, BoundaryProfile};
use crate::noise::{CfMode, MixtureNoiseParams};
use crate::quad::{self, QuadratureError, QuadratureSpec};
use crate::special::gaussian_q;
use crate::ParamError;

/// Argument beyond which a unit-width Gaussian CF factor drops under 1e-16,
/// making truncation error negligible against the default tolerances.
const CF_DECAY_ARG: f64 = 8.6;

/// Failure of a BER evaluation.
#[derive(Debug, thiserror::Error)]
pub enum BerError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    /// The two independent evaluations of the fading average disagree, which
    /// points at a quadrature fault rather than bad inputs.
    #[error(
        "fading-averaged BER forms disagree: direct {direct}, \
         tail-plus-correction {split}, budget {budget}"
    )]
    FormMismatch {
        direct: f64,
        split: f64,
        budget: f64,
    },
}

/// Noise model entering the analysis through its characteristic function.
///
/// The mixture-backed variants share [`MixtureNoiseParams`] and differ only
/// in which transform they expose; [`NoiseCf::FixedSigma`] covers plain
/// Gaussian noise of arbitrary width, which is also the bridge for matching
/// a simulated receiver whose despread noise scale is known directly.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseCf {
    /// Zero-mean Gaussian with the given standard deviation.
    FixedSigma { sigma: f64 },
    /// Mixture noise collapsed to its single-Gaussian surrogate, see
    /// [`MixtureNoiseParams::effective_gaussian_cf`]. The surrogate width is
    /// used exactly as defined there; no processing-gain rescaling is
    /// applied.
    EffectiveGaussian(MixtureNoiseParams),
    /// Exact two-component mixture CF.
    Mixture(MixtureNoiseParams),
}

impl NoiseCf {
    /// Plain Gaussian noise of standard deviation `sigma`.
    pub fn fixed_sigma(sigma: f64) -> Result<Self, ParamError> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(ParamError(format!(
                "noise sigma must be finite and positive, got {sigma}"
            )));
        }
        Ok(Self::FixedSigma { sigma })
    }

    /// Wraps mixture parameters under the requested transform mode.
    pub fn from_mixture(params: MixtureNoiseParams, mode: CfMode) -> Self {
        match mode {
            CfMode::EffectiveGaussian => Self::EffectiveGaussian(params),
            CfMode::Mixture => Self::Mixture(params),
        }
    }

    /// Characteristic function at `omega`.
    pub fn cf(&self, omega: f64) -> f64 {
        match self {
            Self::FixedSigma { sigma } => (-0.5 * (sigma * omega).powi(2)).exp(),
            Self::EffectiveGaussian(p) => p.effective_gaussian_cf(omega),
            Self::Mixture(p) => p.mixture_cf(omega),
        }
    }

    /// Upper-tail probability `P(n > x)`.
    pub fn tail(&self, x: f64) -> f64 {
        match self {
            Self::FixedSigma { sigma } => gaussian_q(x / sigma),
            Self::EffectiveGaussian(p) => gaussian_q(x / p.effective_gaussian_sigma()),
            Self::Mixture(p) => {
                let eps = p.contamination();
                let narrow = p.nominal_std();
                let wide = p.inflation().sqrt() * narrow;
                (1.0 - eps) * gaussian_q(x / narrow) + eps * gaussian_q(x / wide)
            }
        }
    }

    /// `E[tail(a * gain)]` over a unit-scale Rayleigh amplitude `a` with
    /// density `a * exp(-a^2 / 2)`; closed form obtained by parts from the
    /// Gaussian tail.
    pub fn rayleigh_tail_term(&self, gain: f64) -> f64 {
        match self {
            Self::FixedSigma { sigma } => rayleigh_q_average(*sigma, gain),
            Self::EffectiveGaussian(p) => rayleigh_q_average(p.effective_gaussian_sigma(), gain),
            Self::Mixture(p) => {
                let eps = p.contamination();
                let narrow = p.nominal_std();
                let wide = p.inflation().sqrt() * narrow;
                (1.0 - eps) * rayleigh_q_average(narrow, gain)
                    + eps * rayleigh_q_average(wide, gain)
            }
        }
    }

    /// Reported noise standard deviation: the surrogate its inflated width,
    /// the exact mixture its RMS value.
    pub fn sigma_n1(&self) -> f64 {
        match self {
            Self::FixedSigma { sigma } => *sigma,
            Self::EffectiveGaussian(p) => p.effective_gaussian_sigma(),
            Self::Mixture(p) => p.component_variance().sqrt(),
        }
    }

    /// Width of the narrowest Gaussian component. It sets how slowly the CF
    /// decays and therefore where transform integrals may be truncated.
    fn narrowest_sigma(&self) -> f64 {
        match self {
            Self::FixedSigma { sigma } => *sigma,
            Self::EffectiveGaussian(p) => p.effective_gaussian_sigma(),
            Self::Mixture(p) => p.nominal_std(),
        }
    }
}

/// `E[Q(a * gain / sigma)]` for unit-scale Rayleigh `a`: integrating by
/// parts against the Rayleigh density gives `(1 - gain/sqrt(sigma^2 +
/// gain^2)) / 2`.
fn rayleigh_q_average(sigma: f64, gain: f64) -> f64 {
    0.5 * (1.0 - gain / (sigma * sigma + gain * gain).sqrt())
}

/// `sin(scale * omega) / omega`, extended continuously to `omega = 0`.
fn sin_ratio(scale: f64, omega: f64) -> f64 {
    if omega == 0.0 {
        scale
    } else {
        (scale * omega).sin() / omega
    }
}

/// Both independent evaluations of the fading-averaged error rate.
#[derive(Debug, Clone, Copy)]
pub struct AverageBerForms {
    /// Single integral of the full disturbance CF against the Rayleigh
    /// averaging weight.
    pub direct: f64,
    /// Closed-form noise-only term plus an interference correction integral.
    pub split: f64,
    /// The closed-form noise-only term inside `split`; this is the exact
    /// error rate when no interferers are present.
    pub noise_only: f64,
}

/// Everything fixing one analytic error-rate evaluation: the target user's
/// signature boundary profile, the number of active users, and the noise
/// model.
///
/// ```
/// use mudet::ber::{AnalyticBerInputs, NoiseCf};
/// use mudet::interference::BoundaryProfile;
///
/// let prof = BoundaryProfile::new(7, 3)?;
/// let inputs = AnalyticBerInputs::new(prof, 1, NoiseCf::fixed_sigma(1.0)?)?;
/// let ber = inputs.average_ber(&inputs.averaging_spec())?;
/// // With one user the average reduces to a closed form, (1 - 7/sqrt(50))/2.
/// assert!((ber - 0.005025253169416733).abs() < 1e-9);
/// # Ok::<(), Box<dyn std::error::Error>>(())
/// ```
#[derive(Debug, Clone)]
pub struct AnalyticBerInputs {
    profile: BoundaryProfile,
    num_users: usize,
    noise: NoiseCf,
}

impl AnalyticBerInputs {
    pub fn new(
        profile: BoundaryProfile,
        num_users: usize,
        noise: NoiseCf,
    ) -> Result<Self, ParamError> {
        if !(1..=1_000_000).contains(&num_users) {
            return Err(ParamError(format!(
                "user count must lie in 1..=1000000, got {num_users}"
            )));
        }
        Ok(Self {
            profile,
            num_users,
            noise,
        })
    }

    /// Convenience wrapper building the noise model from mixture parameters.
    pub fn from_mixture(
        profile: BoundaryProfile,
        num_users: usize,
        params: MixtureNoiseParams,
        mode: CfMode,
    ) -> Result<Self, ParamError> {
        Self::new(profile, num_users, NoiseCf::from_mixture(params, mode))
    }

    pub fn profile(&self) -> &BoundaryProfile {
        &self.profile
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn noise(&self) -> &NoiseCf {
        &self.noise
    }

    /// Despreading gain: chips per symbol.
    pub fn gain(&self) -> f64 {
        self.profile.chips() as f64
    }

    /// Noise standard deviation entering the tail terms, see
    /// [`NoiseCf::sigma_n1`].
    pub fn sigma_n1(&self) -> f64 {
        self.noise.sigma_n1()
    }

    /// Spec for the fading average, truncated where the Rayleigh weight
    /// `exp(-omega^2 N^2 / 2)` has decayed past double precision.
    pub fn averaging_spec(&self) -> QuadratureSpec {
        QuadratureSpec::new(CF_DECAY_ARG / self.gain()).expect("gain is positive")
    }

    /// Spec for plain CF inversion, truncated where the noise CF has decayed
    /// past double precision. The noise factor is the only part of the
    /// disturbance CF guaranteed to vanish at infinity, so it governs.
    pub fn inversion_spec(&self) -> QuadratureSpec {
        QuadratureSpec::new(CF_DECAY_ARG / self.noise.narrowest_sigma())
            .expect("component widths are positive")
    }

    /// CF of the total multiple-access interference; unity when there is a
    /// single user.
    pub fn interference_cf(&self, omega: f64) -> f64 {
        if self.num_users == 1 {
            return 1.0;
        }
        interferer_cf(omega, &self.profile).powi(self.num_users as i32 - 1)
    }

    /// CF of interference plus noise.
    pub fn disturbance_cf(&self, omega: f64) -> f64 {
        self.interference_cf(omega) * self.noise.cf(omega)
    }

    /// Distribution function `P(I + n1 <= xi)` by Fourier inversion:
    /// `1/2 + (1/pi) * integral of sin(xi w)/w * cf(w)`.
    pub fn disturbance_cdf(&self, xi: f64, quad_spec: &QuadratureSpec) -> Result<f64, BerError> {
        if !xi.is_finite() {
            return Err(ParamError(format!("cdf argument must be finite, got {xi}")).into());
        }
        let q = quad::integrate_oscillatory(
            |w| sin_ratio(xi, w) * self.disturbance_cf(w),
            0.0,
            quad_spec.omega_max,
            xi.abs(),
            quad_spec,
        )?;
        let cdf = 0.5 + q.value / PI;
        debug_assert!((-1e-6..=1.0 + 1e-6).contains(&cdf));
        Ok(cdf.clamp(0.0, 1.0))
    }

    /// Error probability at fading amplitude `a1`, i.e. `P(I + n1 < -a1 N)`.
    ///
    /// Splitting off the noise-only part leaves an integrand damped by
    /// `1 - interference_cf`, which vanishes quadratically at the origin, so
    /// the noise tail is exact and only the interference correction is
    /// integrated.
    pub fn conditional_ber(&self, a1: f64, quad_spec: &QuadratureSpec) -> Result<f64, BerError> {
        if !(a1.is_finite() && a1 >= 0.0) {
            return Err(ParamError(format!(
                "fading amplitude must be finite and non-negative, got {a1}"
            ))
            .into());
        }
        let peak = a1 * self.gain();
        let tail = self.noise.tail(peak);
        if self.num_users == 1 {
            return Ok(tail);
        }
        let q = quad::integrate_oscillatory(
            |w| sin_ratio(peak, w) * (1.0 - self.interference_cf(w)) * self.noise.cf(w),
            0.0,
            quad_spec.omega_max,
            peak,
            quad_spec,
        )?;
        let ber = tail + q.value / PI;
        debug_assert!((-1e-6..=0.5 + 1e-6).contains(&ber));
        Ok(ber.clamp(0.0, 0.5))
    }

    /// Fading-averaged error rate; the `direct` form of
    /// [`AnalyticBerInputs::average_ber_forms`].
    pub fn average_ber(&self, quad_spec: &QuadratureSpec) -> Result<f64, BerError> {
        let forms = self.average_ber_forms(quad_spec)?;
        debug_assert!((-1e-6..=0.5 + 1e-6).contains(&forms.direct));
        Ok(forms.direct.clamp(0.0, 0.5))
    }

    /// Evaluates the fading average two independent ways and checks they
    /// agree.
    ///
    /// Averaging the conditional rate over the unit-scale Rayleigh amplitude
    /// turns the oscillatory `sin(a N w)` factor into the smooth weight
    /// `N w exp(-w^2 N^2 / 2) sqrt(pi/2)`. The `direct` form integrates the
    /// full disturbance CF against that weight; the `split` form takes the
    /// noise-only part in closed form and integrates only the interference
    /// correction. The two share no closed-form steps, so their agreement
    /// (within `10 * abs_tol`, widened proportionally when `rel_tol`
    /// dominates) is a live check on the quadrature.
    pub fn average_ber_forms(
        &self,
        quad_spec: &QuadratureSpec,
    ) -> Result<AverageBerForms, BerError> {
        let n = self.gain();
        let scale = n / TAU.sqrt();
        let weight = move |w: f64| (-0.5 * (n * w).powi(2)).exp();

        let direct_part = quad::integrate(
            |w| self.disturbance_cf(w) * weight(w),
            0.0,
            quad_spec.omega_max,
            quad_spec,
        )?;
        let direct = 0.5 - scale * direct_part.value;

        let noise_only = self.noise.rayleigh_tail_term(n);
        let split = if self.num_users == 1 {
            noise_only
        } else {
            let correction = quad::integrate(
                |w| (1.0 - self.interference_cf(w)) * self.noise.cf(w) * weight(w),
                0.0,
                quad_spec.omega_max,
                quad_spec,
            )?;
            noise_only + scale * correction.value
        };

        let budget = 10.0 * quad_spec.abs_tol.max(quad_spec.rel_tol * direct.abs());
        if (direct - split).abs() > budget {
            return Err(BerError::FormMismatch {
                direct,
                split,
                budget,
            });
        }
        Ok(AverageBerForms {
            direct,
            split,
            noise_only,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interference::sample_interferer;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn prof(chips: usize, transitions: usize) -> BoundaryProfile {
        BoundaryProfile::new(chips, transitions).unwrap()
    }

    fn gaussian_inputs(
        chips: usize,
        transitions: usize,
        users: usize,
        sigma: f64,
    ) -> AnalyticBerInputs {
        AnalyticBerInputs::new(
            prof(chips, transitions),
            users,
            NoiseCf::fixed_sigma(sigma).unwrap(),
        )
        .unwrap()
    }

    fn mixture_inputs(users: usize, mode: CfMode) -> AnalyticBerInputs {
        let params = MixtureNoiseParams::new(1.0, 0.1, 100.0).unwrap();
        AnalyticBerInputs::from_mixture(prof(7, 3), users, params, mode).unwrap()
    }

    /// Unit-scale Rayleigh amplitude via inverse-CDF sampling.
    fn rayleigh_amplitude<R: Rng + ?Sized>(rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        (-2.0 * (1.0 - u).ln()).sqrt()
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(NoiseCf::fixed_sigma(0.0).is_err());
        assert!(NoiseCf::fixed_sigma(-1.0).is_err());
        assert!(NoiseCf::fixed_sigma(f64::NAN).is_err());
        assert!(AnalyticBerInputs::new(prof(7, 3), 0, NoiseCf::fixed_sigma(1.0).unwrap()).is_err());

        let inputs = gaussian_inputs(7, 3, 2, 1.0);
        let spec = inputs.inversion_spec();
        assert!(inputs.conditional_ber(-0.5, &spec).is_err());
        assert!(inputs.disturbance_cdf(f64::NAN, &spec).is_err());
    }

    #[test]
    fn disturbance_cf_reduces_in_trivial_cases() {
        let single = mixture_inputs(1, CfMode::Mixture);
        let multi = mixture_inputs(3, CfMode::Mixture);
        assert_eq!(single.disturbance_cf(0.0), 1.0);
        assert_eq!(multi.disturbance_cf(0.0), 1.0);
        for &w in &[0.3, 1.0, 2.7] {
            // One user: no interference factor at all.
            assert_eq!(single.disturbance_cf(w), single.noise().cf(w));
            // Vanishing noise: the interference factor alone.
            let faint = gaussian_inputs(7, 3, 4, 1e-12);
            assert_abs_diff_eq!(
                faint.disturbance_cf(w),
                faint.interference_cf(w),
                epsilon = 1e-12
            );
            let cf = multi.disturbance_cf(w);
            assert!((0.0..=1.0).contains(&cf));
        }
    }

    #[test]
    fn single_user_average_matches_closed_form() {
        let inputs = gaussian_inputs(7, 3, 1, 1.0);
        let forms = inputs.average_ber_forms(&inputs.averaging_spec()).unwrap();
        // (1 - 7/sqrt(50)) / 2, from integrating the Gaussian tail against
        // the Rayleigh density by parts.
        assert_abs_diff_eq!(forms.direct, 0.005025253169416733, epsilon = 1e-9);
        assert_abs_diff_eq!(forms.split, 0.005025253169416733, epsilon = 1e-15);
        assert_eq!(forms.split, forms.noise_only);
    }

    #[test]
    fn single_user_conditional_is_noise_tail() {
        let spec = mixture_inputs(1, CfMode::Mixture).inversion_spec();
        for mode in [CfMode::Mixture, CfMode::EffectiveGaussian] {
            let inputs = mixture_inputs(1, mode);
            for &a in &[0.0, 0.4, 1.0, 2.5] {
                let ber = inputs.conditional_ber(a, &spec).unwrap();
                assert_eq!(ber, inputs.noise().tail(a * 7.0));
            }
        }
        let eff = mixture_inputs(1, CfMode::EffectiveGaussian);
        let sigma = eff.sigma_n1();
        assert_abs_diff_eq!(
            eff.conditional_ber(1.0, &spec).unwrap(),
            gaussian_q(7.0 / sigma),
            epsilon = 1e-15
        );
    }

    #[test]
    fn sigma_n1_follows_the_selected_transform() {
        let params = MixtureNoiseParams::new(1.0, 0.1, 100.0).unwrap();
        let eff = NoiseCf::from_mixture(params, CfMode::EffectiveGaussian);
        let expected = 2.0 * (1.0 * 0.81 + 1e6 * 1.0 * 0.01);
        assert_abs_diff_eq!(eff.sigma_n1() * eff.sigma_n1(), expected, epsilon = 1e-9);
        let exact = NoiseCf::from_mixture(params, CfMode::Mixture);
        assert_abs_diff_eq!(
            exact.sigma_n1(),
            params.component_variance().sqrt(),
            epsilon = 1e-12
        );
        assert_eq!(NoiseCf::fixed_sigma(2.5).unwrap().sigma_n1(), 2.5);
    }

    #[test]
    fn conditional_matches_cdf_complement() {
        // P(xi < -x) = 1 - F(x) for the symmetric continuous disturbance.
        let gaussian = gaussian_inputs(7, 3, 3, 1.0);
        let spec = gaussian.inversion_spec();
        for &a in &[0.3, 1.0, 2.0] {
            let direct = gaussian.conditional_ber(a, &spec).unwrap();
            let via_cdf = 1.0 - gaussian.disturbance_cdf(a * 7.0, &spec).unwrap();
            assert_abs_diff_eq!(direct, via_cdf, epsilon = 1e-8);
        }
        let exact = mixture_inputs(3, CfMode::Mixture);
        let spec = exact.inversion_spec();
        let direct = exact.conditional_ber(1.0, &spec).unwrap();
        let via_cdf = 1.0 - exact.disturbance_cdf(7.0, &spec).unwrap();
        assert_abs_diff_eq!(direct, via_cdf, epsilon = 1e-8);
    }

    #[test]
    fn cdf_pins_center_and_saturates() {
        let inputs = mixture_inputs(3, CfMode::Mixture);
        let spec = inputs.inversion_spec();
        assert_abs_diff_eq!(
            inputs.disturbance_cdf(0.0, &spec).unwrap(),
            0.5,
            epsilon = 1e-12
        );
        assert!(inputs.disturbance_cdf(60.0, &spec).unwrap() > 1.0 - 1e-7);
        assert!(inputs.disturbance_cdf(-60.0, &spec).unwrap() < 1e-7);
        let grid = [-5.0, -2.0, -0.5, 0.0, 0.5, 2.0, 5.0];
        let mut last = -1.0;
        for &x in &grid {
            let cdf = inputs.disturbance_cdf(x, &spec).unwrap();
            assert!(
                cdf >= last,
                "cdf must be non-decreasing, {cdf} after {last}"
            );
            last = cdf;
        }
    }

    #[test]
    fn cdf_matches_empirical_oracle() {
        // Two interferers plus unit Gaussian noise, 10^6 draws. Each grid
        // point must sit within three binomial standard errors.
        let inputs = gaussian_inputs(7, 3, 3, 1.0);
        let spec = inputs.inversion_spec();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let trials = 1_000_000usize;
        let grid = [-5.0, -1.0, 0.0, 1.0, 5.0];
        let mut below = [0u64; 5];
        for _ in 0..trials {
            let noise: f64 = rng.sample(rand_distr::StandardNormal);
            let xi = sample_interferer(inputs.profile(), &mut rng)
                + sample_interferer(inputs.profile(), &mut rng)
                + noise;
            for (count, &x) in below.iter_mut().zip(&grid) {
                if xi <= x {
                    *count += 1;
                }
            }
        }
        for (&x, &count) in grid.iter().zip(&below) {
            let analytic = inputs.disturbance_cdf(x, &spec).unwrap();
            let empirical = count as f64 / trials as f64;
            let se = (analytic * (1.0 - analytic) / trials as f64).sqrt();
            assert!(
                (analytic - empirical).abs() <= 3.0 * se,
                "cdf({x}): analytic {analytic}, empirical {empirical}, se {se}"
            );
        }
    }

    #[test]
    fn average_matches_conditional_composed_with_rayleigh() {
        // Independent reduction: integrate the conditional rate against the
        // Rayleigh density with Simpson instead of using the averaged forms.
        let inputs = mixture_inputs(3, CfMode::Mixture);
        let avg = inputs.average_ber(&inputs.averaging_spec()).unwrap();
        let spec = inputs.inversion_spec();
        let top = 6.0;
        let composed = crate::test_util::simpson_01(
            |u| {
                let a = top * u;
                let cond = inputs.conditional_ber(a, &spec).unwrap();
                cond * a * (-0.5 * a * a).exp() * top
            },
            256,
        );
        // Truncating the amplitude at 6 discards under 1e-8 of mass.
        assert_abs_diff_eq!(avg, composed, epsilon = 1e-6);
    }

    #[test]
    fn average_matches_mc_oracle() {
        let inputs = mixture_inputs(3, CfMode::Mixture);
        let analytic = inputs.average_ber(&inputs.averaging_spec()).unwrap();
        let params = MixtureNoiseParams::new(1.0, 0.1, 100.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let trials = 1_000_000usize;
        let mut errors = 0u64;
        for _ in 0..trials {
            let signal = rayleigh_amplitude(&mut rng) * 7.0;
            let disturbance = sample_interferer(inputs.profile(), &mut rng)
                + sample_interferer(inputs.profile(), &mut rng)
                + params.sample_component(&mut rng);
            if signal + disturbance < 0.0 {
                errors += 1;
            }
        }
        let empirical = errors as f64 / trials as f64;
        let se = (analytic * (1.0 - analytic) / trials as f64).sqrt();
        assert!(
            (analytic - empirical).abs() <= 3.0 * se,
            "analytic {analytic}, empirical {empirical}, se {se}"
        );
    }

    #[test]
    fn average_grows_with_user_count() {
        for mode in [CfMode::Mixture, CfMode::EffectiveGaussian] {
            let mut last = 0.0;
            for users in [1, 2, 3, 4] {
                let inputs = mixture_inputs(users, mode);
                let ber = inputs.average_ber(&inputs.averaging_spec()).unwrap();
                assert!(
                    ber > last,
                    "{mode} ber must grow with users: {ber} after {last}"
                );
                last = ber;
            }
        }
    }

    #[test]
    fn average_shrinks_with_processing_gain() {
        let mut last = 1.0;
        for chips in [7, 15, 31] {
            let inputs = gaussian_inputs(chips, 3, 3, 1.0);
            let ber = inputs.average_ber(&inputs.averaging_spec()).unwrap();
            assert!(ber < last, "ber must shrink with gain: {ber} after {last}");
            last = ber;
        }
        // Single user, large gain: the closed form drives the rate toward 0.
        let wide = gaussian_inputs(63, 0, 1, 1.0);
        let ber = wide.average_ber(&wide.averaging_spec()).unwrap();
        assert!(ber < 1e-4);
        assert!(ber > 0.0);
    }

    #[test]
    fn truncation_point_is_conservative() {
        let inputs = mixture_inputs(3, CfMode::Mixture);
        let spec = inputs.averaging_spec();
        let wider = QuadratureSpec::new(2.0 * spec.omega_max).unwrap();
        let a = inputs.average_ber(&spec).unwrap();
        let b = inputs.average_ber(&wider).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-9);
    }

    #[test]
    fn transform_modes_genuinely_differ() {
        let eff = mixture_inputs(3, CfMode::EffectiveGaussian);
        let exact = mixture_inputs(3, CfMode::Mixture);
        let ber_eff = eff.average_ber(&eff.averaging_spec()).unwrap();
        let ber_exact = exact.average_ber(&exact.averaging_spec()).unwrap();
        assert!((ber_eff - ber_exact).abs() > 1e-3);
        for ber in [ber_eff, ber_exact] {
            assert!(ber > 0.0 && ber < 0.5);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn probabilities_stay_in_range(
            v in 0.3f64..3.0,
            eps in 0.0f64..0.5,
            kappa in 1.0f64..50.0,
            users in 1usize..5,
            transitions in 0usize..7,
            exact in any::<bool>(),
        ) {
            let params = MixtureNoiseParams::new(v, eps, kappa).unwrap();
            let mode = if exact { CfMode::Mixture } else { CfMode::EffectiveGaussian };
            let inputs = AnalyticBerInputs::from_mixture(
                prof(7, transitions), users, params, mode,
            ).unwrap();

            let avg = inputs.average_ber(&inputs.averaging_spec()).unwrap();
            prop_assert!(avg > 0.0 && avg <= 0.5);

            let spec = inputs.inversion_spec();
            let cond = inputs.conditional_ber(1.0, &spec).unwrap();
            prop_assert!((0.0..=0.5).contains(&cond));

            let cdf = inputs.disturbance_cdf(1.2, &spec).unwrap();
            prop_assert!((0.5..=1.0).contains(&cdf));
        }
    }
}
