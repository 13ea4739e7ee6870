//! Mutual information of the matched (optimal) receiver, which knows both
//! the transmit distortion and the receive noise statistics.
//!
//! The large-system MI combines two pairs of replica parameters. `(η, ε)`
//! describe the decoupled channel from `χ = x + v` to `z`; `(η′, ε′)` do
//! the same for the distortion `v` alone. Traces over `R_w` are evaluated
//! on its eigenvalues, which the configuration caches.

use crate::decoupled::{self, DecoupledTrue};
use crate::error::{Error, Result};
use crate::model::{Constellation, SystemConfig};
use crate::numerics::{compensated_sum, scalar_fixed_point, FixedPointOptions, DEFAULT_ORDER};
use crate::rate::{AuxSnapshot, RateResult};

/// Replica parameters of the matched-decoding solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchedAux {
    pub eta: f64,
    pub eps: f64,
    pub eta_prime: f64,
    pub eps_prime: f64,
}

/// Tight tolerance, floored at a few ulps of the largest variance involved.
fn solver_options(scale: f64) -> FixedPointOptions {
    FixedPointOptions {
        tol: 1e-13f64.max(8.0 * f64::EPSILON * scale),
        max_iter: 5000,
        ..FixedPointOptions::default()
    }
}

/// `tr[(R_w + εI)⁻¹]/(αN)`.
fn eta_of(cfg: &SystemConfig, eps: f64) -> f64 {
    let mu = cfg.r_w_eigenvalues();
    compensated_sum(mu.iter().map(|&m| 1.0 / (m + eps))) / (mu.len() as f64 * cfg.alpha())
}

fn check_solution(context: &'static str, r: &crate::numerics::FixedPointResult) -> Result<f64> {
    if r.converged {
        Ok(r.solution[0])
    } else {
        Err(Error::NotConverged {
            context,
            iterations: r.iterations,
            residual: r.residual,
        })
    }
}

/// All distinct solutions `(η, ε)` found from the high-error and
/// low-error starting points.
/// Also returns the map evaluations spent.
fn primary_branches(cfg: &SystemConfig, c: &Constellation, order: usize) -> Result<(Vec<(f64, f64)>, usize)> {
    let total = c.gamma_bar() + cfg.r_v();
    let map = |eps: f64| -> Result<f64> {
        let ctx = DecoupledTrue::new(eta_of(cfg, eps), cfg.r_v(), c)?.with_order(order);
        decoupled::matched_mmse(&ctx)
    };
    let opts = solver_options(total);
    let mut out: Vec<(f64, f64)> = Vec::new();
    let mut evaluations = 0;
    let seeds: &[f64] = if c.is_gaussian() { &[total] } else { &[total, 1e-6 * total] };
    for &seed in seeds {
        let r = scalar_fixed_point(map, seed, &opts)?;
        evaluations += r.iterations;
        let eps = check_solution("matched fixed point", &r)?;
        if !out.iter().any(|&(_, e)| (e - eps).abs() <= 1e-7 * (total + eps)) {
            out.push((eta_of(cfg, eps), eps));
        }
    }
    Ok((out, evaluations))
}

/// Solves `η = tr[(R_w+εI)⁻¹]/(αN)`, `ε = γ̄ + r_v − E|⟨χ⟩|²`.
///
/// When several solutions exist the one of least mutual information (least
/// free energy) is returned.
pub fn solve_matched_primary(cfg: &SystemConfig, constellation: &Constellation) -> Result<(f64, f64)> {
    let prime = solve_matched_prime(cfg)?;
    let (branches, _) = primary_branches(cfg, constellation, DEFAULT_ORDER)?;
    let mut best: Option<(f64, (f64, f64))> = None;
    for b in branches {
        let mi = assemble(cfg, constellation, b, prime, DEFAULT_ORDER)?;
        if best.is_none_or(|(v, _)| mi < v) {
            best = Some((mi, b));
        }
    }
    Ok(best.expect("at least one branch").1)
}

/// Solves `η′ = tr[(R_w+ε′I)⁻¹]/(αN)`, `ε′ = r_v/(1+η′r_v)`.
pub fn solve_matched_prime(cfg: &SystemConfig) -> Result<(f64, f64)> {
    let r_v = cfg.r_v();
    if r_v == 0.0 {
        return Ok((eta_of(cfg, 0.0), 0.0));
    }
    let map = |eps: f64| -> Result<f64> { Ok(r_v / (1.0 + eta_of(cfg, eps) * r_v)) };
    let r = scalar_fixed_point(map, r_v, &solver_options(r_v))?;
    let eps = check_solution("distortion-only fixed point", &r)?;
    Ok((eta_of(cfg, eps), eps))
}

fn assemble(cfg: &SystemConfig, c: &Constellation, (eta, eps): (f64, f64), (eta_p, eps_p): (f64, f64), order: usize) -> Result<f64> {
    let mu = cfg.r_w_eigenvalues();
    let log_det = compensated_sum(mu.iter().map(|&m| ((eps - eps_p) / (m + eps_p)).ln_1p())) / (mu.len() as f64 * cfg.alpha());
    let ctx = DecoupledTrue::new(eta, cfg.r_v(), c)?.with_order(order);
    let scalar = decoupled::matched_scalar_mi(&ctx)?;
    let value = log_det - (eta * eps - eta_p * eps_p) + scalar - (eta_p * cfg.r_v()).ln_1p();
    if !value.is_finite() {
        return Err(Error::NonFinite {
            context: "matched mutual information",
            iteration: 0,
            value,
        });
    }
    Ok(value)
}

/// Per-stream MI of the matched receiver, clamped at zero.
pub fn matched_mi(cfg: &SystemConfig, constellation: &Constellation) -> Result<RateResult> {
    matched_mi_with_order(cfg, constellation, DEFAULT_ORDER)
}

/// [`matched_mi`] with an explicit quadrature resolution.
pub fn matched_mi_with_order(cfg: &SystemConfig, constellation: &Constellation, order: usize) -> Result<RateResult> {
    let prime = solve_matched_prime(cfg)?;
    let mut best: Option<(f64, (f64, f64))> = None;
    let (branches, evaluations) = primary_branches(cfg, constellation, order)?;
    for b in branches {
        let mi = assemble(cfg, constellation, b, prime, order)?;
        if best.is_none_or(|(v, _)| mi < v) {
            best = Some((mi, b));
        }
    }
    let (mi, (eta, eps)) = best.expect("at least one branch");
    let aux = MatchedAux {
        eta,
        eps,
        eta_prime: prime.0,
        eps_prime: prime.1,
    };
    let residual = matched_residual(cfg, constellation, &aux, order)?;
    let mut out = RateResult::closed_form(mi.max(0.0));
    out.aux = AuxSnapshot::Matched(aux);
    out.residual = residual;
    out.iterations = evaluations;
    out.converged = residual <= 1e-9;
    Ok(out)
}

/// Largest residual of the four matched fixed-point equations.
pub fn matched_residual(cfg: &SystemConfig, c: &Constellation, aux: &MatchedAux, order: usize) -> Result<f64> {
    let ctx = DecoupledTrue::new(aux.eta, cfg.r_v(), c)?.with_order(order);
    let r = [
        aux.eta - eta_of(cfg, aux.eps),
        aux.eps - decoupled::matched_mmse(&ctx)?,
        aux.eta_prime - eta_of(cfg, aux.eps_prime),
        aux.eps_prime - cfg.r_v() / (1.0 + aux.eta_prime * cfg.r_v()),
    ];
    Ok(r.iter().map(|v| v.abs()).fold(0.0, f64::max))
}

/// High-SNR limit of the matched MI in nats: `ln((1+κ²)/κ²)` for `α ≤ 1`,
/// divided by `α` otherwise.
pub fn matched_mi_highsnr(alpha: f64, kappa: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha.is_finite() && kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "high-SNR limit needs α > 0 and κ > 0, got α={alpha}, κ={kappa}"
        )));
    }
    let base = (1.0 / (kappa * kappa)).ln_1p();
    Ok(if alpha <= 1.0 { base } else { base / alpha })
}
