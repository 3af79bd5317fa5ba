//! One-shot observation model of the asynchronous chip-rate channel.
//!
//! The target user is delay-aligned; every interferer straddles the symbol
//! boundary at an integer chip delay, so within one symbol window it shows
//! the tail of its previous symbol and the head of its current one. Each
//! straddling interferer therefore occupies two columns of the composite
//! matrix, and the stacked coefficient vector carries `b * g / sqrt(n)` per
//! column: the epoch's symbol times the interferer's current fading
//! coefficient.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use crate::fading::{generate_fading, FadingParams};
use crate::noise::MixtureNoiseParams;
use crate::sequences::SignatureSet;
use crate::ParamError;

/// Which symbol of the column's user a composite column carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymbolEpoch {
    Current,
    Previous,
}

/// Provenance of one composite-matrix column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ColumnRole {
    pub user: usize,
    pub epoch: SymbolEpoch,
}

/// Chip-level mixing matrix with per-column provenance. Entries are in
/// {-1, 0, +1}; the target column has no zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeMatrix {
    matrix: DMatrix<f64>,
    roles: Vec<ColumnRole>,
}

impl CompositeMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn roles(&self) -> &[ColumnRole] {
        &self.roles
    }

    pub fn num_rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn num_cols(&self) -> usize {
        self.matrix.ncols()
    }
}

/// Builds the composite matrix for the given per-user chip delays. The
/// target (user 0) must have delay 0; a delayed interferer contributes a
/// tail column (last `d` chips, rows `0..d`) and a head column (first
/// `n - d` chips, rows `d..n`), whose supports partition the window.
pub fn build_composite_matrix(
    sig: &SignatureSet,
    delays: &[usize],
) -> Result<CompositeMatrix, ParamError> {
    let n = sig.gain();
    if delays.len() != sig.num_users() {
        return Err(ParamError(format!(
            "got {} delays for {} users",
            delays.len(),
            sig.num_users()
        )));
    }
    if delays[0] != 0 {
        return Err(ParamError(format!(
            "the target user must be delay-aligned, got delay {}",
            delays[0]
        )));
    }
    if let Some(&bad) = delays.iter().find(|&&d| d >= n) {
        return Err(ParamError(format!("delays must lie in 0..{n}, got {bad}")));
    }

    let mut columns: Vec<DVector<f64>> = Vec::new();
    let mut roles = Vec::new();
    for (user, &d) in delays.iter().enumerate() {
        let chips = sig.user(user);
        if d == 0 {
            let full = DVector::from_iterator(n, chips.iter().map(|&c| c as f64));
            columns.push(full);
            roles.push(ColumnRole {
                user,
                epoch: SymbolEpoch::Current,
            });
            continue;
        }
        let mut tail = DVector::zeros(n);
        for r in 0..d {
            tail[r] = chips[n - d + r] as f64;
        }
        columns.push(tail);
        roles.push(ColumnRole {
            user,
            epoch: SymbolEpoch::Previous,
        });
        let mut head = DVector::zeros(n);
        for r in d..n {
            head[r] = chips[r - d] as f64;
        }
        columns.push(head);
        roles.push(ColumnRole {
            user,
            epoch: SymbolEpoch::Current,
        });
    }
    Ok(CompositeMatrix {
        matrix: DMatrix::from_columns(&columns),
        roles,
    })
}

/// One frozen draw of the channel: signatures, delays, fading streams and
/// symbol streams. Immutable after construction, freely shareable across
/// trial workers.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    signatures: SignatureSet,
    delays: Vec<usize>,
    composite: CompositeMatrix,
    fading: Vec<Vec<Complex64>>,
    symbols: Vec<Vec<i8>>,
}

impl ChannelRealization {
    /// Assembles a realization from explicitly provided streams.
    pub fn new(
        signatures: SignatureSet,
        delays: Vec<usize>,
        fading: Vec<Vec<Complex64>>,
        symbols: Vec<Vec<i8>>,
    ) -> Result<Self, ParamError> {
        let composite = build_composite_matrix(&signatures, &delays)?;
        let users = signatures.num_users();
        if fading.len() != users || symbols.len() != users {
            return Err(ParamError(format!(
                "need one fading and one symbol stream per user, \
                 got {} and {} for {users} users",
                fading.len(),
                symbols.len()
            )));
        }
        let len = symbols[0].len();
        if len == 0 {
            return Err(ParamError("symbol streams must be non-empty".into()));
        }
        for u in 0..users {
            if symbols[u].len() != len || fading[u].len() != len {
                return Err(ParamError(format!(
                    "user {u} streams disagree on length: {} symbols, {} coefficients, expected {len}",
                    symbols[u].len(),
                    fading[u].len()
                )));
            }
            if symbols[u].iter().any(|&b| b != 1 && b != -1) {
                return Err(ParamError(format!(
                    "user {u} has symbols outside {{-1, +1}}"
                )));
            }
        }
        Ok(Self {
            signatures,
            delays,
            composite,
            fading,
            symbols,
        })
    }

    /// Draws a realization: uniform interferer delays, equiprobable symbols,
    /// and one AR(2) fading stream per user. Draw order is delays, then all
    /// symbol streams, then all fading streams, so a fixed RNG stream pins
    /// the realization.
    pub fn generate<R: Rng + ?Sized>(
        signatures: SignatureSet,
        num_symbols: usize,
        fading_params: &FadingParams,
        rng: &mut R,
    ) -> Result<Self, ParamError> {
        let users = signatures.num_users();
        let n = signatures.gain();
        let mut delays = vec![0usize; users];
        for d in delays.iter_mut().skip(1) {
            *d = rng.random_range(0..n);
        }
        Self::generate_with_delays(signatures, delays, num_symbols, fading_params, rng)
    }

    /// Like [`ChannelRealization::generate`] but with the chip delays pinned
    /// by the caller (for example, all zero for a synchronous system).
    pub fn generate_with_delays<R: Rng + ?Sized>(
        signatures: SignatureSet,
        delays: Vec<usize>,
        num_symbols: usize,
        fading_params: &FadingParams,
        rng: &mut R,
    ) -> Result<Self, ParamError> {
        if num_symbols < 2 {
            return Err(ParamError(format!(
                "need at least 2 symbols so interferers have a previous one, got {num_symbols}"
            )));
        }
        let users = signatures.num_users();
        let symbols: Vec<Vec<i8>> = (0..users)
            .map(|_| {
                (0..num_symbols)
                    .map(|_| if rng.random::<bool>() { 1 } else { -1 })
                    .collect()
            })
            .collect();
        let fading: Vec<Vec<Complex64>> = (0..users)
            .map(|_| generate_fading(num_symbols, fading_params, rng))
            .collect();
        Self::new(signatures, delays, fading, symbols)
    }

    pub fn signatures(&self) -> &SignatureSet {
        &self.signatures
    }

    pub fn delays(&self) -> &[usize] {
        &self.delays
    }

    pub fn composite(&self) -> &CompositeMatrix {
        &self.composite
    }

    pub fn gain(&self) -> usize {
        self.signatures.gain()
    }

    pub fn num_users(&self) -> usize {
        self.signatures.num_users()
    }

    pub fn num_symbols(&self) -> usize {
        self.symbols[0].len()
    }

    pub fn fading(&self, user: usize) -> &[Complex64] {
        &self.fading[user]
    }

    pub fn symbols(&self, user: usize) -> &[i8] {
        &self.symbols[user]
    }

    fn check_index(&self, symbol_index: usize) -> Result<(), ParamError> {
        if symbol_index == 0 || symbol_index >= self.num_symbols() {
            return Err(ParamError(format!(
                "symbol index must lie in 1..{}, got {symbol_index}",
                self.num_symbols()
            )));
        }
        Ok(())
    }

    /// Stacked coefficient vector at one symbol: `b * g / sqrt(n)` per
    /// column, with `b` taken from the column's epoch.
    pub fn theta(&self, symbol_index: usize) -> Result<DVector<Complex64>, ParamError> {
        self.check_index(symbol_index)?;
        let scale = 1.0 / (self.gain() as f64).sqrt();
        let entries = self.composite.roles().iter().map(|role| {
            let b = match role.epoch {
                SymbolEpoch::Current => self.symbols[role.user][symbol_index],
                SymbolEpoch::Previous => self.symbols[role.user][symbol_index - 1],
            };
            self.fading[role.user][symbol_index] * (b as f64 * scale)
        });
        Ok(DVector::from_iterator(self.composite.num_cols(), entries))
    }

    /// The exact noise-free observation `M * theta`, accumulated row by row
    /// in ascending column order.
    pub fn noiseless_received(
        &self,
        symbol_index: usize,
    ) -> Result<DVector<Complex64>, ParamError> {
        let theta = self.theta(symbol_index)?;
        let m = self.composite.matrix();
        let mut y = DVector::from_element(m.nrows(), Complex64::new(0.0, 0.0));
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                y[r] += theta[c] * m[(r, c)];
            }
        }
        Ok(y)
    }

    /// Observation with additive mixture noise, independent per chip and
    /// component; deterministic for a fixed RNG stream.
    pub fn synthesize_received<R: Rng + ?Sized>(
        &self,
        symbol_index: usize,
        noise: &MixtureNoiseParams,
        rng: &mut R,
    ) -> Result<DVector<Complex64>, ParamError> {
        let mut y = self.noiseless_received(symbol_index)?;
        for (chip, sample) in y.iter_mut().zip(noise.sample_complex(self.gain(), rng)) {
            *chip += sample;
        }
        Ok(y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interference::{count_transitions, interferer_cf_at_offset, symmetric_sign_weights};
    use crate::quad::{self, QuadratureSpec};
    use crate::sequences::generate_m_sequence;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_user_set() -> SignatureSet {
        SignatureSet::from_m_sequence(3, 0xB, 2).unwrap()
    }

    #[test]
    fn synchronous_matrix_is_the_signature_matrix() {
        let set = SignatureSet::from_m_sequence(3, 0xB, 3).unwrap();
        let comp = build_composite_matrix(&set, &[0, 0, 0]).unwrap();
        assert_eq!(comp.num_cols(), 3);
        for (c, role) in comp.roles().iter().enumerate() {
            assert_eq!(role.user, c);
            assert_eq!(role.epoch, SymbolEpoch::Current);
            for r in 0..7 {
                assert_eq!(comp.matrix()[(r, c)], set.user(c)[r] as f64);
            }
        }
    }

    #[test]
    fn delayed_interferer_splits_into_disjoint_columns() {
        let set = two_user_set();
        let comp = build_composite_matrix(&set, &[0, 3]).unwrap();
        assert_eq!(comp.num_cols(), 3);
        assert_eq!(
            comp.roles()[1],
            ColumnRole {
                user: 1,
                epoch: SymbolEpoch::Previous
            }
        );
        assert_eq!(
            comp.roles()[2],
            ColumnRole {
                user: 1,
                epoch: SymbolEpoch::Current
            }
        );
        let m = comp.matrix();
        let tail_support: Vec<usize> = (0..7).filter(|&r| m[(r, 1)] != 0.0).collect();
        let head_support: Vec<usize> = (0..7).filter(|&r| m[(r, 2)] != 0.0).collect();
        assert_eq!(tail_support, vec![0, 1, 2]);
        assert_eq!(head_support, vec![3, 4, 5, 6]);
        // Tail rows carry the last three chips, head rows the first four.
        let chips = set.user(1);
        for (r, &row) in tail_support.iter().enumerate() {
            assert_eq!(m[(row, 1)], chips[4 + r] as f64);
        }
        for (offset, &row) in head_support.iter().enumerate() {
            assert_eq!(m[(row, 2)], chips[offset] as f64);
        }
        // All entries stay in {-1, 0, +1} and the target column has no zeros.
        for r in 0..7 {
            assert_ne!(m[(r, 0)], 0.0);
            for c in 0..3 {
                assert!([-1.0, 0.0, 1.0].contains(&m[(r, c)]));
            }
        }
    }

    #[test]
    fn rejects_bad_delays() {
        let set = two_user_set();
        assert!(build_composite_matrix(&set, &[0]).is_err());
        assert!(build_composite_matrix(&set, &[1, 0]).is_err());
        assert!(build_composite_matrix(&set, &[0, 7]).is_err());
    }

    #[test]
    fn realization_validates_stream_shapes() {
        let set = two_user_set();
        let g = vec![Complex64::new(1.0, 0.0); 2];
        let b = vec![1i8, -1];
        assert!(ChannelRealization::new(
            set.clone(),
            vec![0, 1],
            vec![g.clone()],
            vec![b.clone(), b.clone()]
        )
        .is_err());
        assert!(ChannelRealization::new(
            set.clone(),
            vec![0, 1],
            vec![g.clone(), vec![Complex64::new(1.0, 0.0); 3]],
            vec![b.clone(), b.clone()]
        )
        .is_err());
        assert!(ChannelRealization::new(
            set.clone(),
            vec![0, 1],
            vec![g.clone(), g.clone()],
            vec![b.clone(), vec![1, 2]]
        )
        .is_err());
        let ok = ChannelRealization::new(set, vec![0, 1], vec![g.clone(), g], vec![b.clone(), b])
            .unwrap();
        assert!(ok.theta(0).is_err());
        assert!(ok.theta(2).is_err());
    }

    #[test]
    fn single_user_noiseless_is_the_scaled_signature() {
        let chips = generate_m_sequence(3, 0xB).unwrap();
        let set = SignatureSet::from_chips(vec![chips.clone()]).unwrap();
        let one = Complex64::new(1.0, 0.0);
        let ch =
            ChannelRealization::new(set, vec![0], vec![vec![one, one]], vec![vec![1, 1]]).unwrap();
        let y = ch.noiseless_received(1).unwrap();
        let scale = 1.0 / 7f64.sqrt();
        for (v, &c) in y.iter().zip(&chips) {
            assert_eq!(*v, Complex64::new(c as f64 * scale, 0.0));
        }
    }

    #[test]
    fn synchronous_noiseless_reproduces_the_matrix_model_exactly() {
        let set = SignatureSet::from_m_sequence(3, 0xB, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let params = FadingParams::new(0.9, 80.0, 1e4).unwrap();
        let mut ch = ChannelRealization::generate(set.clone(), 4, &params, &mut rng).unwrap();
        // Force the synchronous geometry while keeping the drawn streams.
        ch = ChannelRealization::new(
            set,
            vec![0, 0, 0],
            (0..3).map(|u| ch.fading(u).to_vec()).collect(),
            (0..3).map(|u| ch.symbols(u).to_vec()).collect(),
        )
        .unwrap();
        let theta = ch.theta(2).unwrap();
        let y = ch.noiseless_received(2).unwrap();
        let m = ch.composite().matrix();
        for r in 0..7 {
            let mut want = Complex64::new(0.0, 0.0);
            for c in 0..3 {
                want += theta[c] * m[(r, c)];
            }
            // Bit-exact: same accumulation order as the production path.
            assert_eq!(y[r], want);
        }
    }

    #[test]
    fn generate_draws_valid_streams_deterministically() {
        let params = FadingParams::new(0.998, 80.0, 1e4).unwrap();
        let make = |seed: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            ChannelRealization::generate(two_user_set(), 6, &params, &mut rng).unwrap()
        };
        let a = make(3);
        let b = make(3);
        let c = make(4);
        assert_eq!(a.delays(), b.delays());
        assert_eq!(a.fading(1), b.fading(1));
        assert_eq!(a.symbols(0), b.symbols(0));
        assert!(a.fading(1) != c.fading(1));
        assert_eq!(a.delays()[0], 0);
        assert!(a.delays()[1] < 7);
        assert!(a.symbols(1).iter().all(|&s| s == 1 || s == -1));
        assert_eq!(a.fading(0).len(), 6);
        assert!(ChannelRealization::generate(
            two_user_set(),
            1,
            &params,
            &mut ChaCha8Rng::seed_from_u64(5)
        )
        .is_err());
    }

    #[test]
    fn synthesized_noise_is_additive_and_stream_deterministic() {
        let params = FadingParams::new(0.9, 80.0, 1e4).unwrap();
        let noise = MixtureNoiseParams::new(0.5, 0.1, 100.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let ch = ChannelRealization::generate(two_user_set(), 3, &params, &mut rng).unwrap();
        let clean = ch.noiseless_received(1).unwrap();
        let y1 = ch
            .synthesize_received(1, &noise, &mut ChaCha8Rng::seed_from_u64(15))
            .unwrap();
        let y2 = ch
            .synthesize_received(1, &noise, &mut ChaCha8Rng::seed_from_u64(15))
            .unwrap();
        assert_eq!(y1, y2);
        assert!(y1 != clean);
    }

    /// Matched-filter error rate against the chip-synchronous variant of the
    /// analysis. With interferer chips drawn at random, the despread
    /// interference of one interferer at any integer delay is a sum of N
    /// signed chips times an independent N(0,1) projection of its fading, so
    /// the zero-offset slice of the interference CF applies; the analytic
    /// units differ from the simulator's matched filter by sqrt(2 n).
    #[test]
    fn matched_filter_error_rate_matches_chip_synchronous_analysis() {
        let n = 7usize;
        let users = 3usize;
        let chip_sigma = 0.4;
        let desired = generate_m_sequence(3, 0xB).unwrap();
        let prof = count_transitions(&desired).unwrap();

        // The zero-offset slice must equal the CF of (sum of n random
        // signs) * N(0,1), independent of the transition split.
        let weights = symmetric_sign_weights(n);
        let slice = |w: f64| interferer_cf_at_offset(w, 0.0, &prof).unwrap();
        for &w in &[0.3, 1.0, 2.4] {
            let oracle: f64 = weights
                .iter()
                .enumerate()
                .map(|(k, &p)| {
                    let s = 2.0 * k as f64 - n as f64;
                    p * (-0.5 * (s * w).powi(2)).exp()
                })
                .sum();
            assert_abs_diff_eq!(slice(w), oracle, epsilon = 1e-10);
        }

        // Analytic side: Rayleigh-averaged rate with the slice CF squared
        // (two interferers) and matched-filter noise sqrt(2) * n * sigma.
        let gain = n as f64;
        let mf_sigma = 2f64.sqrt() * gain * chip_sigma;
        let spec = QuadratureSpec::new(8.6 / gain).unwrap();
        let integral = quad::integrate(
            |w| {
                slice(w).powi((users - 1) as i32)
                    * (-0.5 * (mf_sigma * w).powi(2)).exp()
                    * (-0.5 * (gain * w).powi(2)).exp()
            },
            0.0,
            spec.omega_max,
            &spec,
        )
        .unwrap();
        let analytic = 0.5 - gain / std::f64::consts::TAU.sqrt() * integral.value;

        // Simulator side: fresh random interferer chips, delays and white
        // fading per trial, through the production synthesis path.
        let fparams = FadingParams::new(1e-9, 80.0, 1e4).unwrap();
        let noise = MixtureNoiseParams::new(chip_sigma, 0.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let trials = 100_000usize;
        let mut errors = 0u64;
        for _ in 0..trials {
            let mut chip_rows = vec![desired.clone()];
            for _ in 1..users {
                chip_rows.push(
                    (0..n)
                        .map(|_| if rng.random::<bool>() { 1 } else { -1 })
                        .collect(),
                );
            }
            let set = SignatureSet::from_chips(chip_rows).unwrap();
            let ch = ChannelRealization::generate(set, 2, &fparams, &mut rng).unwrap();
            let y = ch.synthesize_received(1, &noise, &mut rng).unwrap();
            let mf: Complex64 = desired
                .iter()
                .zip(y.iter())
                .map(|(&c, v)| v * c as f64)
                .sum();
            let statistic = (ch.fading(0)[1].conj() * mf).re;
            if statistic * f64::from(ch.symbols(0)[1]) < 0.0 {
                errors += 1;
            }
        }
        let empirical = errors as f64 / trials as f64;
        let se = (analytic * (1.0 - analytic) / trials as f64).sqrt();
        assert!(
            (empirical - analytic).abs() <= 3.0 * se,
            "analytic {analytic}, empirical {empirical}, se {se}"
        );
    }

    /// Signatures are cyclic shifts of one base sequence, so a chip delay
    /// that exactly undoes an interferer's shift re-aligns its periodic
    /// chip stream with the target's: the interferer's previous and current
    /// columns then sum to the target's column and the composite matrix
    /// loses rank. Such draws genuinely admit no linear separation; the
    /// sweep counts and excludes them rather than pretending otherwise.
    #[test]
    fn shift_cancelling_delay_collapses_composite_rank() {
        let set = SignatureSet::from_m_sequence(5, 0x25, 4).unwrap();
        // User 3 is shifted by 21 chips; a 21-chip delay cancels it.
        let comp = build_composite_matrix(&set, &[0, 1, 2, 21]).unwrap();
        let m = comp.matrix();
        let split_sum = m.column(5) + m.column(6);
        assert_eq!(comp.roles()[5].user, 3);
        assert_eq!(split_sum, m.column(0).clone_owned());
        let gram = m.transpose() * m;
        assert!(nalgebra::Cholesky::new(gram).is_none());

        // Shifting the same user by one more chip restores full rank.
        let comp = build_composite_matrix(&set, &[0, 1, 2, 20]).unwrap();
        let gram = comp.matrix().transpose() * comp.matrix();
        assert!(nalgebra::Cholesky::new(gram).is_some());
    }
}
