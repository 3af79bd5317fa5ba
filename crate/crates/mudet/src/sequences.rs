//! Maximal-length spreading sequences and per-user signature assignment.
//!
//! Signatures are cyclic shifts of one m-sequence generated by a Galois
//! LFSR. The generator polynomial is passed as a full coefficient mask
//! including the leading and constant terms, so `x^3 + x + 1` is `0b1011`.
//! Primitivity is not assumed: the period is measured and anything short of
//! `2^m - 1` is rejected.

use crate::ParamError;

/// Well-known primitive polynomial for each supported degree, as a full
/// coefficient mask. The period check in [`generate_m_sequence`] verifies
/// every entry at test time, so a typo here cannot survive.
pub fn default_taps(degree: u32) -> Option<u32> {
    Some(match degree {
        2 => 0x7,      // x^2 + x + 1
        3 => 0xB,      // x^3 + x + 1
        4 => 0x13,     // x^4 + x + 1
        5 => 0x25,     // x^5 + x^2 + 1
        6 => 0x43,     // x^6 + x + 1
        7 => 0x89,     // x^7 + x^3 + 1
        8 => 0x11D,    // x^8 + x^4 + x^3 + x^2 + 1
        9 => 0x211,    // x^9 + x^4 + 1
        10 => 0x409,   // x^10 + x^3 + 1
        11 => 0x805,   // x^11 + x^2 + 1
        12 => 0x1053,  // x^12 + x^6 + x^4 + x + 1
        13 => 0x201B,  // x^13 + x^4 + x^3 + x + 1
        14 => 0x4443,  // x^14 + x^10 + x^6 + x + 1
        15 => 0x8003,  // x^15 + x + 1
        16 => 0x1100B, // x^16 + x^12 + x^3 + x + 1
        _ => return None,
    })
}

fn validate_poly(degree: u32, taps: u32) -> Result<(), ParamError> {
    if !(2..=16).contains(&degree) {
        return Err(ParamError(format!(
            "sequence degree must lie in 2..=16, got {degree}"
        )));
    }
    if taps >> degree != 1 {
        return Err(ParamError(format!(
            "taps {taps:#x} do not encode a monic polynomial of degree {degree}"
        )));
    }
    if taps & 1 == 0 {
        return Err(ParamError(format!(
            "taps {taps:#x} lack a constant term, the register would stall"
        )));
    }
    Ok(())
}

/// Runs the Galois LFSR from state 1 until it returns there, reporting the
/// cycle length. The constant term makes the state map a permutation, so the
/// walk always closes.
fn lfsr_period(taps: u32) -> u64 {
    let feedback = taps >> 1;
    let mut state: u32 = 1;
    let mut steps: u64 = 0;
    loop {
        let out = state & 1;
        state >>= 1;
        if out == 1 {
            state ^= feedback;
        }
        steps += 1;
        if state == 1 {
            return steps;
        }
    }
}

/// One period of the maximal-length sequence for the given primitive
/// polynomial, as chips in {-1, +1} (register output 1 maps to +1).
pub fn generate_m_sequence(degree: u32, taps: u32) -> Result<Vec<i8>, ParamError> {
    validate_poly(degree, taps)?;
    let n = (1u64 << degree) - 1;
    let period = lfsr_period(taps);
    if period != n {
        return Err(ParamError(format!(
            "taps {taps:#x} are not primitive for degree {degree}: period {period}, need {n}"
        )));
    }
    let feedback = taps >> 1;
    let mut state: u32 = 1;
    let mut chips = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let out = state & 1;
        chips.push(if out == 1 { 1 } else { -1 });
        state >>= 1;
        if out == 1 {
            state ^= feedback;
        }
    }
    Ok(chips)
}

/// Cyclic autocorrelation `sum_i seq[i] * seq[(i + lag) mod n]`.
pub fn cyclic_autocorrelation(seq: &[i8], lag: usize) -> i64 {
    let n = seq.len();
    (0..n)
        .map(|i| seq[i] as i64 * seq[(i + lag) % n] as i64)
        .sum()
}

/// The spreading sequences of all active users, one row per user.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignatureSet {
    gain: usize,
    chips: Vec<Vec<i8>>,
}

impl SignatureSet {
    /// Signatures as evenly spaced cyclic shifts of one m-sequence; user `l`
    /// is shifted by `l * floor(n / num_users)` chips.
    pub fn from_m_sequence(degree: u32, taps: u32, num_users: usize) -> Result<Self, ParamError> {
        let base = generate_m_sequence(degree, taps)?;
        let n = base.len();
        if num_users == 0 || num_users > n {
            return Err(ParamError(format!(
                "user count must lie in 1..={n}, got {num_users}"
            )));
        }
        let spacing = n / num_users;
        let chips = (0..num_users)
            .map(|l| {
                let shift = l * spacing;
                (0..n).map(|i| base[(i + shift) % n]).collect()
            })
            .collect();
        Ok(Self { gain: n, chips })
    }

    /// Arbitrary signatures, one row per user. Escape hatch for experiments
    /// that do not want the m-sequence family; entries must be ±1 and all
    /// rows the same length.
    pub fn from_chips(chips: Vec<Vec<i8>>) -> Result<Self, ParamError> {
        let gain = match chips.first() {
            Some(row) if !row.is_empty() => row.len(),
            _ => {
                return Err(ParamError(
                    "signature set needs at least one non-empty sequence".into(),
                ))
            }
        };
        for (l, row) in chips.iter().enumerate() {
            if row.len() != gain {
                return Err(ParamError(format!(
                    "user {l} has {} chips, expected {gain}",
                    row.len()
                )));
            }
            if row.iter().any(|&c| c != 1 && c != -1) {
                return Err(ParamError(format!("user {l} has chips outside {{-1, +1}}")));
            }
        }
        Ok(Self { gain, chips })
    }

    /// Chips per symbol (the processing gain N).
    pub fn gain(&self) -> usize {
        self.gain
    }

    pub fn num_users(&self) -> usize {
        self.chips.len()
    }

    /// Signature of one user.
    pub fn user(&self, index: usize) -> &[i8] {
        &self.chips[index]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_malformed_polynomials() {
        assert!(generate_m_sequence(1, 0x3).is_err());
        assert!(generate_m_sequence(17, 0x2_0001).is_err());
        // Degree mismatch: mask says degree 4, argument says 3.
        assert!(generate_m_sequence(3, 0x13).is_err());
        // Missing constant term.
        assert!(generate_m_sequence(3, 0xA).is_err());
    }

    #[test]
    fn rejects_non_primitive_taps() {
        // x^4 + x^2 + 1 = (x^2 + x + 1)^2 is not primitive.
        let err = generate_m_sequence(4, 0x15).unwrap_err();
        assert!(err.to_string().contains("not primitive"), "{err}");
    }

    #[test]
    fn degree_three_sequence_is_the_hand_enumerated_one() {
        let seq = generate_m_sequence(3, 0xB).unwrap();
        assert_eq!(seq, vec![1, 1, 1, -1, 1, -1, -1]);
        assert_eq!(cyclic_autocorrelation(&seq, 3), -1);
    }

    #[test]
    fn degree_seven_sequence_has_length_127() {
        let seq = generate_m_sequence(7, default_taps(7).unwrap()).unwrap();
        assert_eq!(seq.len(), 127);
    }

    #[test]
    fn every_default_polynomial_is_primitive_and_balanced() {
        for degree in 2..=16u32 {
            let taps = default_taps(degree).unwrap();
            let seq = generate_m_sequence(degree, taps).unwrap();
            let n = (1usize << degree) - 1;
            assert_eq!(seq.len(), n);
            let plus = seq.iter().filter(|&&c| c == 1).count();
            // One more +1 than -1: the all-zero state is the missing one.
            assert_eq!(2 * plus, n + 1, "degree {degree} unbalanced");
        }
        assert!(default_taps(17).is_none());
    }

    #[test]
    fn autocorrelation_is_two_valued() {
        for degree in 2..=9u32 {
            let seq = generate_m_sequence(degree, default_taps(degree).unwrap()).unwrap();
            let n = seq.len();
            assert_eq!(cyclic_autocorrelation(&seq, 0), n as i64);
            for lag in 1..n {
                assert_eq!(
                    cyclic_autocorrelation(&seq, lag),
                    -1,
                    "degree {degree} lag {lag}"
                );
            }
        }
    }

    #[test]
    fn signature_set_shifts_the_base_sequence() {
        let set = SignatureSet::from_m_sequence(3, 0xB, 3).unwrap();
        assert_eq!(set.gain(), 7);
        assert_eq!(set.num_users(), 3);
        let base = generate_m_sequence(3, 0xB).unwrap();
        assert_eq!(set.user(0), &base[..]);
        // Spacing floor(7/3) = 2 chips per user.
        let expect: Vec<i8> = (0..7).map(|i| base[(i + 2) % 7]).collect();
        assert_eq!(set.user(1), &expect[..]);
        for l in 0..3 {
            let mut sorted = set.user(l).to_vec();
            sorted.sort_unstable();
            assert_eq!(sorted.iter().filter(|&&c| c == 1).count(), 4);
        }
    }

    #[test]
    fn signature_set_rejects_bad_shapes() {
        assert!(SignatureSet::from_m_sequence(3, 0xB, 0).is_err());
        assert!(SignatureSet::from_m_sequence(3, 0xB, 8).is_err());
        assert!(SignatureSet::from_chips(vec![]).is_err());
        assert!(SignatureSet::from_chips(vec![vec![]]).is_err());
        assert!(SignatureSet::from_chips(vec![vec![1, -1], vec![1]]).is_err());
        assert!(SignatureSet::from_chips(vec![vec![1, 0, -1]]).is_err());
        let ok = SignatureSet::from_chips(vec![vec![1, -1, 1], vec![-1, -1, 1]]).unwrap();
        assert_eq!(ok.gain(), 3);
        assert_eq!(ok.num_users(), 2);
    }
}
