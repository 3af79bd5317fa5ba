//! Matched-filter statistics of one asynchronous interferer.
//!
//! Condition on the target user's signature and look at a single interferer
//! with random spreading chips, random data symbols, Rayleigh-faded amplitude
//! and a delay of `s` chip fractions past some integer chip offset. Its
//! contribution to the target's matched-filter output is `I = G * W`, with
//! `G` standard normal (fading amplitude folded with the carrier phase) and
//!
//! ```text
//! W = P s + Q (1 - s) + X + Y (1 - 2s)
//! ```
//!
//! `P` and `Q` are the independent equiprobable signs straddling the symbol
//! boundary, `X` sums the chip-product signs over the `A` boundaries where
//! the target signature does not change sign, and `Y` over the `B = N-1-A`
//! boundaries where it does. Averaging the conditional Gaussian over the four
//! `(P, Q)` sign combinations and the lattice of `(X, Y)` values gives the
//! conditional density and characteristic function; averaging the latter over
//! `s` uniform on `[0, 1)` has a closed form through [`offset_kernel`].
//!
//! Binomial weights are evaluated in log space so signature lengths such as
//! `N = 127` stay far from `f64` overflow.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::special::gaussian_q;
use crate::ParamError;

const SQRT_PI_OVER_2: f64 = 1.253_314_137_315_500_3;
const SQRT_TAU: f64 = 2.506_628_274_631_000_7;

/// Sign-transition profile of a spreading signature: its chip count and the
/// number of adjacent chip pairs with opposite signs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryProfile {
    chips: usize,
    transitions: usize,
}

impl BoundaryProfile {
    pub fn new(chips: usize, transitions: usize) -> Result<Self, ParamError> {
        if chips == 0 {
            return Err(ParamError("signature length must be positive".into()));
        }
        if transitions > chips - 1 {
            return Err(ParamError(format!(
                "{transitions} transitions impossible in a {chips}-chip signature \
                 ({} boundaries)",
                chips - 1
            )));
        }
        Ok(Self { chips, transitions })
    }

    /// Signature length `N`.
    pub fn chips(&self) -> usize {
        self.chips
    }

    /// Boundaries where the signature flips sign (`B`).
    pub fn transitions(&self) -> usize {
        self.transitions
    }

    /// Boundaries where it does not (`A = N - 1 - B`).
    pub fn non_transitions(&self) -> usize {
        self.chips - 1 - self.transitions
    }
}

/// Boundary profile of a concrete signature.
pub fn count_transitions(signature: &[i8]) -> Result<BoundaryProfile, ParamError> {
    if signature.is_empty() {
        return Err(ParamError("signature must not be empty".into()));
    }
    if let Some(&bad) = signature.iter().find(|&&c| c != 1 && c != -1) {
        return Err(ParamError(format!(
            "signature entries must be +1 or -1, found {bad}"
        )));
    }
    let transitions = signature.windows(2).filter(|w| w[0] != w[1]).count();
    BoundaryProfile::new(signature.len(), transitions)
}

/// Probability of each value of a sum of `count` independent equiprobable
/// `+/-1` signs; entry `k` is the weight of the sum `2k - count`.
///
/// Weights are computed in log space and sum to 1 within 1e-12 for any
/// `count` a signature can produce.
pub fn symmetric_sign_weights(count: usize) -> Vec<f64> {
    let mut ln_fact = Vec::with_capacity(count + 1);
    ln_fact.push(0.0_f64);
    for k in 1..=count {
        ln_fact.push(ln_fact[k - 1] + (k as f64).ln());
    }
    let scale = count as f64 * std::f64::consts::LN_2;
    (0..=count)
        .map(|k| (ln_fact[count] - ln_fact[k] - ln_fact[count - k] - scale).exp())
        .collect()
}

/// Squared conditional amplitude of `W` for one `(P, Q)` sign combination.
///
/// Branches 1..4 are `(P, Q) = (+,+), (+,-), (-,+), (-,-)`; `i` and `j` are
/// the realized sign sums over non-transition and transition boundaries.
pub fn sigma_sq(branch: usize, i: i64, j: i64, offset: f64) -> Result<f64, ParamError> {
    if !(0.0..1.0).contains(&offset) {
        return Err(ParamError(format!(
            "chip offset must lie in [0, 1), got {offset}"
        )));
    }
    let base = i as f64 + j as f64 * (1.0 - 2.0 * offset);
    let root = match branch {
        1 => 1.0 + base,
        2 => 2.0 * offset - 1.0 + base,
        3 => 1.0 - 2.0 * offset + base,
        4 => -1.0 + base,
        _ => {
            return Err(ParamError(format!(
                "branch index must be 1..=4, got {branch}"
            )))
        }
    };
    Ok(root * root)
}

fn branch_roots(i: i64, j: i64, offset: f64) -> [f64; 4] {
    let base = i as f64 + j as f64 * (1.0 - 2.0 * offset);
    [
        1.0 + base,
        2.0 * offset - 1.0 + base,
        1.0 - 2.0 * offset + base,
        -1.0 + base,
    ]
}

fn validate_offset(offset: f64) -> Result<(), ParamError> {
    if (0.0..1.0).contains(&offset) {
        Ok(())
    } else {
        Err(ParamError(format!(
            "chip offset must lie in [0, 1), got {offset}"
        )))
    }
}

/// Iterates the `(i, j)` lattice with its product weight.
fn lattice_sum<F: FnMut(i64, i64) -> f64>(prof: &BoundaryProfile, mut term: F) -> f64 {
    let a = prof.non_transitions();
    let b = prof.transitions();
    let wa = symmetric_sign_weights(a);
    let wb = symmetric_sign_weights(b);
    let mut acc = 0.0;
    for (ka, &wi) in wa.iter().enumerate() {
        let i = 2 * ka as i64 - a as i64;
        for (kb, &wj) in wb.iter().enumerate() {
            let j = 2 * kb as i64 - b as i64;
            acc += wi * wj * term(i, j);
        }
    }
    acc
}

/// Density of `I` conditioned on the fractional offset. Zero-amplitude
/// branches are point masses at the origin and are excluded, so the density
/// integrates to one minus their total weight.
pub fn interferer_pdf_at_offset(
    x: f64,
    offset: f64,
    prof: &BoundaryProfile,
) -> Result<f64, ParamError> {
    validate_offset(offset)?;
    Ok(lattice_sum(prof, |i, j| {
        let mut dens = 0.0;
        for root in branch_roots(i, j, offset) {
            let sigma = root.abs();
            if sigma > 0.0 {
                dens += (-0.5 * x * x / (sigma * sigma)).exp() / (sigma * SQRT_TAU);
            }
        }
        0.25 * dens
    }))
}

/// Characteristic function of `I` conditioned on the fractional offset.
pub fn interferer_cf_at_offset(
    omega: f64,
    offset: f64,
    prof: &BoundaryProfile,
) -> Result<f64, ParamError> {
    validate_offset(offset)?;
    let half_w2 = 0.5 * omega * omega;
    Ok(lattice_sum(prof, |i, j| {
        let mut cf = 0.0;
        for root in branch_roots(i, j, offset) {
            cf += (-half_w2 * root * root).exp();
        }
        0.25 * cf
    }))
}

/// Uniform-offset average of `exp(-omega^2 (i + j (1 - 2s))^2 / 2)` over
/// `s` in `[0, 1)`:
///
/// ```text
/// sqrt(pi/2) / (j |omega|) * (Q(|omega| (i - j)) - Q(|omega| (i + j)))
/// ```
///
/// with the degenerate limits `exp(-i^2 omega^2 / 2)` at `j = 0` and `1` at
/// `omega = 0`. Signed `j` is evaluated literally; the result is even in `j`.
pub fn offset_kernel(i: i64, j: i64, omega: f64) -> f64 {
    if omega == 0.0 {
        return 1.0;
    }
    let om = omega.abs();
    if j == 0 {
        let q = i as f64 * om;
        return (-0.5 * q * q).exp();
    }
    let lo = om * (i - j) as f64;
    let hi = om * (i + j) as f64;
    SQRT_PI_OVER_2 / (j as f64 * om) * (gaussian_q(lo) - gaussian_q(hi))
}

/// Characteristic function of `I` with the offset averaged out.
pub fn interferer_cf(omega: f64, prof: &BoundaryProfile) -> f64 {
    if omega == 0.0 {
        // Exactly 1 by definition; the lattice weights only sum to 1 within
        // roundoff.
        return 1.0;
    }
    lattice_sum(prof, |i, j| {
        0.25 * (offset_kernel(i + 1, j, omega)
            + offset_kernel(i, j - 1, omega)
            + offset_kernel(i, j + 1, omega)
            + offset_kernel(i - 1, j, omega))
    })
}

/// Characteristic function of the sum of `num_users - 1` independent
/// identically distributed interferers.
pub fn total_interference_cf(
    omega: f64,
    prof: &BoundaryProfile,
    num_users: usize,
) -> Result<f64, ParamError> {
    if num_users == 0 {
        return Err(ParamError("user count must be at least 1".into()));
    }
    Ok(interferer_cf(omega, prof).powi(num_users as i32 - 1))
}

/// One draw of the interferer model, kept disaggregated for diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct InterfererDraw {
    /// Boundary sign weighting the `s` fraction.
    pub lead_sign: i8,
    /// Boundary sign weighting the `1 - s` fraction.
    pub trail_sign: i8,
    /// Sign sum over non-transition boundaries (`|.| <= A`, same parity).
    pub steady_sum: i64,
    /// Sign sum over transition boundaries (`|.| <= B`, same parity).
    pub flip_sum: i64,
    /// Fractional chip offset in `[0, 1)`.
    pub offset: f64,
    /// Standard normal amplitude factor.
    pub amplitude: f64,
}

impl InterfererDraw {
    pub fn sample<R: Rng + ?Sized>(prof: &BoundaryProfile, rng: &mut R) -> Self {
        Self {
            lead_sign: if rng.random::<bool>() { 1 } else { -1 },
            trail_sign: if rng.random::<bool>() { 1 } else { -1 },
            steady_sum: symmetric_sign_sum(prof.non_transitions(), rng),
            flip_sum: symmetric_sign_sum(prof.transitions(), rng),
            offset: rng.random::<f64>(),
            amplitude: rng.sample(StandardNormal),
        }
    }

    /// The composite factor `W`.
    pub fn composite(&self) -> f64 {
        self.lead_sign as f64 * self.offset
            + self.trail_sign as f64 * (1.0 - self.offset)
            + self.steady_sum as f64
            + self.flip_sum as f64 * (1.0 - 2.0 * self.offset)
    }

    /// The matched-filter contribution `I = G * W`.
    pub fn value(&self) -> f64 {
        self.amplitude * self.composite()
    }
}

/// One interferer contribution; see [`InterfererDraw`] for the pieces.
pub fn sample_interferer<R: Rng + ?Sized>(prof: &BoundaryProfile, rng: &mut R) -> f64 {
    InterfererDraw::sample(prof, rng).value()
}

/// Sum of `count` independent equiprobable `+/-1` signs.
fn symmetric_sign_sum<R: Rng + ?Sized>(count: usize, rng: &mut R) -> i64 {
    let mut ones: i64 = 0;
    let mut left = count;
    while left > 0 {
        let take = left.min(64);
        let mask = if take == 64 {
            u64::MAX
        } else {
            (1u64 << take) - 1
        };
        ones += i64::from((rng.random::<u64>() & mask).count_ones());
        left -= take;
    }
    2 * ones - count as i64
}
