//! Evaluation of a [`SweepSpec`] into an output table.

use std::time::Instant;

use binoisy::matched::{matched_mi, matched_mi_highsnr};
use binoisy::mismatched::{gmi, gmi_highsnr_gaussian};
use binoisy::montecarlo::{mc_gmi_gaussian, mc_mi_matched_discrete, mc_mi_matched_gaussian};
use binoisy::planner::{max_evm_for_loss, rule_of_thumb_evm, BudgetStatus, LossQuery};
use binoisy::{AuxSnapshot, Constellation, ConstellationKind, Error, RateResult, SystemConfig, LN_2};
use rayon::prelude::*;

use crate::error::SpecError;
use crate::output::{Cell, Table};
use crate::spec::{RateMode, SweepSpec, Task};

/// Output of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub table: Table,
    /// Rows whose solver or search did not succeed.
    pub failures: usize,
}

/// Errors that describe an impossible request rather than a numerical
/// failure at one point.
fn is_spec_error(e: &Error) -> bool {
    matches!(
        e,
        Error::InvalidConfig(_)
            | Error::InvalidConstellation(_)
            | Error::UnknownConstellation(_)
            | Error::InvalidArgument(_)
            | Error::AlphabetTooLarge { .. }
    )
}

/// Splits a point's outcome into a value and a failure flag, passing spec
/// errors through.
fn settle<T>(r: binoisy::Result<T>) -> Result<Option<T>, SpecError> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(e) if is_spec_error(&e) => Err(e.into()),
        Err(_) => Ok(None),
    }
}

struct Units {
    nats: bool,
}

impl Units {
    fn rate(&self, nats: f64) -> f64 {
        if self.nats {
            nats
        } else {
            nats / LN_2
        }
    }

    fn suffix(&self) -> &'static str {
        if self.nats {
            "nats"
        } else {
            "bits"
        }
    }
}

/// Elapsed milliseconds, only when timing was requested.
fn wall(spec: &SweepSpec, start: Instant) -> Cell {
    if spec.timing {
        Cell::Num(start.elapsed().as_secs_f64() * 1e3)
    } else {
        Cell::Empty
    }
}

fn text(s: impl ToString) -> Cell {
    Cell::Text(s.to_string())
}

/// Runs every point of `spec` on the current rayon pool. Rows come out in
/// spec order: constellation, then SNR, then EVM, then mode.
pub fn run_sweep(spec: &SweepSpec) -> Result<Report, SpecError> {
    let units = Units { nats: spec.nats };
    match &spec.task {
        Task::RateSweep { modes } if modes == &[RateMode::HighSnr] => high_snr(spec, &units),
        Task::RateSweep { modes } => rate_sweep(spec, modes, &units),
        Task::Validate { .. } => validate(spec, &units),
        Task::EvmPlan { loss, decoder } => evm_plan(spec, *loss, *decoder),
    }
}

fn grid(spec: &SweepSpec) -> Vec<(ConstellationKind, f64, f64)> {
    let mut out = Vec::new();
    for &k in &spec.constellations {
        for &snr in &spec.snr_db {
            for &evm in &spec.evm_db {
                out.push((k, snr, evm));
            }
        }
    }
    out
}

fn rate_sweep(spec: &SweepSpec, modes: &[RateMode], units: &Units) -> Result<Report, SpecError> {
    let rate_col = format!("rate_{}_per_stream", units.suffix());
    let table = Table::new(&[
        "constellation", "mode", "M", "N", "snr_db", "evm_db", &rate_col, "s_tilde_star", "eta", "xi", "eps", "eps_tilde", "eta_prime",
        "eps_prime", "converged", "iterations", "residual", "wall_ms",
    ]);
    let points: Vec<_> = grid(spec).into_iter().flat_map(|p| modes.iter().map(move |&m| (p, m))).collect();
    let rows = points
        .par_iter()
        .map(|&((kind, snr, evm), mode)| -> Result<Vec<Cell>, SpecError> {
            let start = Instant::now();
            let cfg = SystemConfig::new(spec.m, spec.n, snr, evm)?;
            let c = Constellation::new(kind, cfg.gamma_bar())?;
            let (name, result) = match mode {
                RateMode::Matched => ("matched", matched_mi(&cfg, &c)),
                _ => ("mismatched", gmi(&cfg, &c)),
            };
            let result: Option<RateResult> = settle(result)?;
            let mut row = vec![text(kind), text(name), Cell::Int(spec.m as u64), Cell::Int(spec.n as u64), Cell::Num(snr), Cell::Num(evm)];
            let [mut s, mut eta, mut xi, mut eps, mut eps_t, mut eta_p, mut eps_p] = [None; 7];
            if let Some(r) = &result {
                s = r.s_tilde;
                match r.aux {
                    AuxSnapshot::Matched(a) => (eta, eps, eta_p, eps_p) = (Some(a.eta), Some(a.eps), Some(a.eta_prime), Some(a.eps_prime)),
                    AuxSnapshot::Mismatched(a) => (eta, xi, eps, eps_t) = (Some(a.eta), Some(a.xi), Some(a.eps), Some(a.eps_tilde)),
                    AuxSnapshot::None => {}
                }
            }
            row.push(Cell::opt(result.as_ref().map(|r| units.rate(r.rate_nats))));
            row.extend([s, eta, xi, eps, eps_t, eta_p, eps_p].map(Cell::opt));
            row.push(Cell::Bool(result.as_ref().is_some_and(|r| r.converged)));
            row.push(result.as_ref().map_or(Cell::Empty, |r| Cell::Int(r.iterations as u64)));
            row.push(Cell::opt(result.as_ref().map(|r| r.residual)));
            row.push(wall(spec, start));
            Ok(row)
        })
        .collect::<Result<Vec<_>, _>>()?;
    finish(table, rows)
}

fn high_snr(spec: &SweepSpec, units: &Units) -> Result<Report, SpecError> {
    let rate_col = format!("rate_{}_per_stream", units.suffix());
    let table = Table::new(&["constellation", "mode", "M", "N", "snr_db", "evm_db", &rate_col, "converged", "wall_ms"]);
    let alpha = spec.m as f64 / spec.n as f64;
    let mut rows = Vec::new();
    for &evm in &spec.evm_db {
        let kappa = 10f64.powf(evm / 20.0);
        let limits: [(&str, fn(f64, f64) -> binoisy::Result<f64>); 2] =
            [("highsnr-matched", matched_mi_highsnr), ("highsnr-mismatched", gmi_highsnr_gaussian)];
        for (name, limit) in limits {
            let start = Instant::now();
            let value = settle(limit(alpha, kappa))?;
            rows.push(vec![
                text(ConstellationKind::Gaussian),
                text(name),
                Cell::Int(spec.m as u64),
                Cell::Int(spec.n as u64),
                Cell::Num(f64::INFINITY),
                Cell::Num(evm),
                Cell::opt(value.map(|v| units.rate(v))),
                Cell::Bool(value.is_some()),
                wall(spec, start),
            ]);
        }
    }
    finish(table, rows)
}

fn validate(spec: &SweepSpec, units: &Units) -> Result<Report, SpecError> {
    let u = units.suffix();
    let (replica, mc, se, diff) = (format!("replica_{u}"), format!("monte_carlo_{u}"), format!("mc_stderr_{u}"), format!("abs_diff_{u}"));
    let table = Table::new(&[
        "constellation", "quantity", "M", "N", "snr_db", "evm_db", &replica, &mc, &se, &diff, "channels", "seed", "converged", "wall_ms",
    ]);
    let points: Vec<_> = grid(spec)
        .into_iter()
        .flat_map(|p| {
            let quantities: &[&str] = if p.0.is_discrete() { &["mi"] } else { &["mi", "gmi"] };
            quantities.iter().map(move |&q| (p, q))
        })
        .collect();
    let rows = points
        .par_iter()
        .map(|&((kind, snr, evm), quantity)| -> Result<Vec<Cell>, SpecError> {
            let start = Instant::now();
            let settings = spec.mc_settings(kind).expect("validate task");
            let cfg = SystemConfig::new(spec.m, spec.n, snr, evm)?;
            let c = Constellation::new(kind, cfg.gamma_bar())?;
            let (r, est) = if quantity == "gmi" {
                (settle(gmi(&cfg, &c))?, settle(mc_gmi_gaussian(&cfg, &settings))?)
            } else if kind.is_discrete() {
                (settle(matched_mi(&cfg, &c))?, settle(mc_mi_matched_discrete(&cfg, &c, &settings))?)
            } else {
                (settle(matched_mi(&cfg, &c))?, settle(mc_mi_matched_gaussian(&cfg, &settings))?)
            };
            let rv = r.as_ref().map(|r| units.rate(r.rate_nats));
            let mv = est.map(|e| units.rate(e.rate_nats));
            Ok(vec![
                text(kind),
                text(quantity),
                Cell::Int(spec.m as u64),
                Cell::Int(spec.n as u64),
                Cell::Num(snr),
                Cell::Num(evm),
                Cell::opt(rv),
                Cell::opt(mv),
                Cell::opt(est.map(|e| units.rate(e.stderr_nats))),
                Cell::opt(rv.zip(mv).map(|(a, b)| (a - b).abs())),
                Cell::Int(settings.n_channels as u64),
                Cell::Int(settings.seed),
                Cell::Bool(r.is_some_and(|r| r.converged) && est.is_some()),
                wall(spec, start),
            ])
        })
        .collect::<Result<Vec<_>, _>>()?;
    finish(table, rows)
}

fn evm_plan(spec: &SweepSpec, loss: f64, decoder: binoisy::planner::Decoder) -> Result<Report, SpecError> {
    let table = Table::new(&[
        "constellation", "decoder", "M", "N", "snr_db", "loss_budget", "max_evm_db", "loss_at_max", "status", "rule_of_thumb_evm_db", "evaluations",
        "converged", "wall_ms",
    ]);
    let points: Vec<_> = spec.constellations.iter().flat_map(|&k| spec.snr_db.iter().map(move |&s| (k, s))).collect();
    let rows = points
        .par_iter()
        .map(|&(kind, snr)| -> Result<Vec<Cell>, SpecError> {
            let start = Instant::now();
            let c = Constellation::new(kind, 1.0)?;
            let query = LossQuery::new(spec.m, spec.n, snr, c, loss, decoder)?;
            let r = settle(max_evm_for_loss(&query))?;
            let status = r.map_or("failed", |r| match r.status {
                BudgetStatus::Interior => "interior",
                BudgetStatus::AlwaysWithin => "always-within",
                BudgetStatus::Exceeded => "exceeded",
            });
            Ok(vec![
                text(kind),
                text(decoder),
                Cell::Int(spec.m as u64),
                Cell::Int(spec.n as u64),
                Cell::Num(snr),
                Cell::Num(loss),
                Cell::opt(r.map(|r| r.evm_db)),
                Cell::opt(r.map(|r| r.loss)),
                text(status),
                Cell::Num(rule_of_thumb_evm(snr)),
                r.map_or(Cell::Empty, |r| Cell::Int(r.evaluations as u64)),
                Cell::Bool(r.is_some()),
                wall(spec, start),
            ])
        })
        .collect::<Result<Vec<_>, _>>()?;
    finish(table, rows)
}

/// Attaches `rows` and counts those whose `converged` cell is not true.
fn finish(mut table: Table, rows: Vec<Vec<Cell>>) -> Result<Report, SpecError> {
    let col = table.header.iter().position(|h| h == "converged").expect("converged column");
    let failures = rows.iter().filter(|r| r[col] != Cell::Bool(true)).count();
    for row in rows {
        table.push(row);
    }
    Ok(Report { table, failures })
}
