//! Result type shared by the rate evaluators.

use crate::matched::MatchedAux;
use crate::mismatched::MismatchedAux;
use crate::nats_to_bits;
use crate::numerics::{FixedPointOptions, LogGridSearch, DEFAULT_ORDER};

/// Auxiliary replica parameters at the reported solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AuxSnapshot {
    Mismatched(MismatchedAux),
    Matched(MatchedAux),
    /// Closed-form limits carry no fixed-point state.
    None,
}

/// Per-stream achievable rate with solver diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateResult {
    pub rate_nats: f64,
    pub rate_bits: f64,
    /// Maximizing decoder scale `s̃*` (mismatched decoding only).
    pub s_tilde: Option<f64>,
    pub aux: AuxSnapshot,
    pub converged: bool,
    /// Fixed-point map evaluations spent on the reported solution.
    pub iterations: usize,
    /// Largest fixed-point residual at the reported solution.
    pub residual: f64,
    /// Replica free energy at the reported solution, in nats.
    pub free_energy: Option<f64>,
}

impl RateResult {
    pub(crate) fn closed_form(rate_nats: f64) -> Self {
        Self {
            rate_nats,
            rate_bits: nats_to_bits(rate_nats),
            s_tilde: None,
            aux: AuxSnapshot::None,
            converged: true,
            iterations: 0,
            residual: 0.0,
            free_energy: None,
        }
    }
}

/// Numerical settings shared by the replica solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub fixed_point: FixedPointOptions,
    /// Seed grid and refinement for the decoder-scale search.
    pub search: LogGridSearch,
    /// Quadrature resolution for discrete alphabets.
    pub order: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            fixed_point: FixedPointOptions::default(),
            search: LogGridSearch::default(),
            order: DEFAULT_ORDER,
        }
    }
}
