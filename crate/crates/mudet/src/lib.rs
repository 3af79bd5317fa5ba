//! Multiuser detection toolkit for asynchronous CDMA in impulsive noise.
//!
//! The crate has two halves that check each other:
//!
//! * an analytic half ([`noise`], [`interference`], [`ber`]) that computes
//!   matched-filter bit error rates in flat Rayleigh fading by inverting
//!   characteristic functions, and
//! * a simulation half ([`sequences`], [`fading`], [`channel`], [`detect`],
//!   [`sweep`]) that synthesizes chip-level received vectors and benchmarks
//!   robust M-estimation detectors against the decorrelator.
//!
//! The [`checks`] module wires both halves into a self-validation suite; the
//! `mudet` command-line tool in this workspace drives sweeps, analytic
//! curves and the validation suite from flat config files.

pub mod quad;
pub mod special;

pub mod noise;

pub mod interference;

pub mod ber;

pub mod channel;
pub mod config;
pub mod detect;
pub mod fading;
pub mod sequences;
pub mod sweep;

pub mod checks;

/// Parameter validation failure reported by constructors across the crate.
#[derive(Debug, Clone, thiserror::Error)]
#[error("invalid parameter: {0}")]
pub struct ParamError(pub String);

// Every fenced Rust block in the guide compiles and runs as a doctest, so
// the book cannot drift from the API.
#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $file:literal) => {
            #[doc = include_str!(concat!("../../../book/src/", $file))]
            pub mod $name {}
        };
    }

    chapter!(introduction, "introduction.md");
    chapter!(noise_model, "noise-model.md");
    chapter!(interference, "interference.md");
    chapter!(analytic_ber, "analytic-ber.md");
    chapter!(detectors, "detectors.md");
    chapter!(simulation, "simulation.md");
    chapter!(cli, "cli.md");
}

#[cfg(test)]
pub(crate) mod test_util;
