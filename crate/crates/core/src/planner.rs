//! Rate loss caused by transmitter EVM and its inverse: the largest EVM
//! that keeps the loss within a budget.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{CMatrix, Constellation, SystemConfig};
use crate::rate::RateResult;
use crate::{matched, mismatched};

/// Lower end of the EVM search range, in dB.
pub const EVM_SEARCH_MIN_DB: f64 = -60.0;
/// Upper end of the EVM search range, in dB.
pub const EVM_SEARCH_MAX_DB: f64 = 0.0;

/// Receiver type whose rate is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Decoder {
    /// Optimal receiver; the rate is the mutual information.
    Matched,
    /// Receiver that postulates `R̃ = R_w`; the rate is the GMI.
    Mismatched,
}

impl fmt::Display for Decoder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decoder::Matched => "matched",
            Decoder::Mismatched => "mismatched",
        })
    }
}

impl FromStr for Decoder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "matched" => Ok(Decoder::Matched),
            "mismatched" => Ok(Decoder::Mismatched),
            other => Err(Error::InvalidArgument(format!("unknown decoder `{other}`"))),
        }
    }
}

/// Rate of `decoder` with the constellation rescaled to the configured power.
pub fn rate(cfg: &SystemConfig, constellation: &Constellation, decoder: Decoder) -> Result<RateResult> {
    let c = constellation.with_power(cfg.gamma_bar())?;
    match decoder {
        Decoder::Matched => matched::matched_mi(cfg, &c),
        Decoder::Mismatched => mismatched::gmi(cfg, &c),
    }
}

/// `1 − R(cfg)/R(ideal)`, where the reference differs from `cfg` only in
/// having no transmit distortion. Small negative values from solver noise
/// are reported as zero.
pub fn rate_loss(cfg: &SystemConfig, constellation: &Constellation, decoder: Decoder) -> Result<f64> {
    let reference = rate(&cfg.ideal(), constellation, decoder)?.rate_nats;
    loss_against(reference, cfg, constellation, decoder)
}

fn loss_against(reference: f64, cfg: &SystemConfig, c: &Constellation, decoder: Decoder) -> Result<f64> {
    if !(reference > 0.0) {
        return Err(Error::UndefinedLoss { reference });
    }
    if cfg.r_v() == 0.0 {
        return Ok(0.0);
    }
    let r = rate(cfg, c, decoder)?.rate_nats;
    Ok((1.0 - r / reference).max(0.0))
}

/// A request for the largest tolerable EVM.
#[derive(Debug, Clone, PartialEq)]
pub struct LossQuery {
    pub m: usize,
    pub n: usize,
    pub snr_db: f64,
    pub constellation: Constellation,
    /// Allowed fractional loss, strictly between 0 and 1.
    pub loss_frac: f64,
    pub decoder: Decoder,
    /// Bisection stops once the bracket is narrower than this (dB).
    pub tol_db: f64,
    /// Receive noise covariance; `None` for `R_w = I`.
    pub noise_covariance: Option<CMatrix>,
}

impl LossQuery {
    pub fn new(m: usize, n: usize, snr_db: f64, constellation: Constellation, loss_frac: f64, decoder: Decoder) -> Result<Self> {
        if !(loss_frac > 0.0 && loss_frac < 1.0) {
            return Err(Error::InvalidArgument(format!("loss fraction must lie in (0, 1), got {loss_frac}")));
        }
        Ok(Self {
            m,
            n,
            snr_db,
            constellation,
            loss_frac,
            decoder,
            tol_db: 1e-3,
            noise_covariance: None,
        })
    }

    fn config(&self, evm_db: f64) -> Result<SystemConfig> {
        match &self.noise_covariance {
            None => SystemConfig::new(self.m, self.n, self.snr_db, evm_db),
            Some(rw) => SystemConfig::with_noise_covariance(self.m, self.n, self.snr_db, evm_db, rw.clone()),
        }
    }
}

/// Where the answer of [`max_evm_for_loss`] lies in the search range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BudgetStatus {
    /// The loss crosses the budget inside the range.
    Interior,
    /// Even the top of the range stays within budget.
    AlwaysWithin,
    /// The budget is exceeded already at the bottom of the range.
    Exceeded,
}

/// Outcome of [`max_evm_for_loss`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxEvm {
    /// Largest EVM found to satisfy the budget (the range bottom when
    /// `status` is `Exceeded`).
    pub evm_db: f64,
    /// Rate loss at `evm_db`.
    pub loss: f64,
    pub status: BudgetStatus,
    /// Rate evaluations spent, including the reference.
    pub evaluations: usize,
}

/// Largest EVM in `[-60, 0]` dB whose rate loss stays within
/// `query.loss_frac`.
///
/// A coarse scan in 10 dB steps first checks that the loss is nondecreasing
/// in EVM and brackets the crossing; bisection then narrows the bracket to
/// `query.tol_db` and returns its feasible end.
pub fn max_evm_for_loss(query: &LossQuery) -> Result<MaxEvm> {
    if !(query.tol_db > 0.0) {
        return Err(Error::InvalidArgument(format!("bisection tolerance must be positive, got {}", query.tol_db)));
    }
    let ideal = query.config(f64::NEG_INFINITY)?;
    let reference = rate(&ideal, &query.constellation, query.decoder)?.rate_nats;
    let mut evaluations = 1;
    let mut loss_at = |evm: f64| -> Result<f64> {
        evaluations += 1;
        loss_against(reference, &query.config(evm)?, &query.constellation, query.decoder)
    };

    let steps = 6;
    let scan: Vec<f64> = (0..=steps)
        .map(|i| EVM_SEARCH_MIN_DB + (EVM_SEARCH_MAX_DB - EVM_SEARCH_MIN_DB) * i as f64 / steps as f64)
        .collect();
    let mut losses = Vec::with_capacity(scan.len());
    for &evm in &scan {
        losses.push(loss_at(evm)?);
    }
    for (w, e) in losses.windows(2).zip(scan.windows(2)) {
        if w[1] < w[0] - 1e-9 {
            return Err(Error::NonMonotoneLoss(format!(
                "loss {} at {} dB exceeds loss {} at {} dB",
                w[0], e[0], w[1], e[1]
            )));
        }
    }

    let budget = query.loss_frac;
    if losses[0] > budget {
        return Ok(MaxEvm {
            evm_db: EVM_SEARCH_MIN_DB,
            loss: losses[0],
            status: BudgetStatus::Exceeded,
            evaluations,
        });
    }
    let Some(k) = losses.iter().position(|&l| l > budget) else {
        return Ok(MaxEvm {
            evm_db: EVM_SEARCH_MAX_DB,
            loss: losses[steps],
            status: BudgetStatus::AlwaysWithin,
            evaluations,
        });
    };
    let (mut lo, mut hi) = (scan[k - 1], scan[k]);
    let mut loss_lo = losses[k - 1];
    while hi - lo > query.tol_db {
        let mid = 0.5 * (lo + hi);
        let l = loss_at(mid)?;
        if l <= budget {
            lo = mid;
            loss_lo = l;
        } else {
            hi = mid;
        }
    }
    Ok(MaxEvm {
        evm_db: lo,
        loss: loss_lo,
        status: BudgetStatus::Interior,
        evaluations,
    })
}

/// Linear lower bound on the tolerable EVM for Gaussian signaling with
/// matched decoding at a 5% loss budget: `−0.7·snr_db − 13`.
pub fn rule_of_thumb_evm(snr_db: f64) -> f64 {
    -0.7 * snr_db - 13.0
}
