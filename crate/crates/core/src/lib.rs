//! Achievable per-stream rates of "binoisy" MIMO channels
//! `y = H(x + v) + w`, where `v` is transmit-side distortion and `w` is
//! receive-side noise.
//!
//! The crate evaluates large-system replica predictions for matched
//! decoding (mutual information) and mismatched decoding (generalized
//! mutual information, GMI) for Gaussian and discrete constellations,
//! brute-force Monte Carlo oracles for finite antenna counts, and an EVM
//! planner that inverts the rate loss caused by transmitter impairments.
//!
//! All rates are in nats per stream internally; [`RateResult`] also carries
//! the value in bits.

pub mod decoupled;
pub mod error;
pub mod matched;
pub mod mismatched;
pub mod model;
pub mod montecarlo;
pub mod numerics;
pub mod planner;
pub mod rate;

pub use error::{Error, Result};
pub use model::{Constellation, ConstellationKind, SystemConfig};
pub use rate::{AuxSnapshot, RateResult, SolverOptions};

/// Natural log of 2, for nats to bits conversion.
pub const LN_2: f64 = std::f64::consts::LN_2;

/// Converts nats to bits.
#[inline]
pub fn nats_to_bits(nats: f64) -> f64 {
    nats / LN_2
}
