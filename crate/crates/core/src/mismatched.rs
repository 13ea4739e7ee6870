//! Generalized mutual information of a receiver that decodes with a
//! postulated noise covariance `R̃` and ignores the transmit distortion.
//!
//! For a decoder scale `s > 0` the large-system GMI is the replica free
//! energy `f(s)` minus a penalty linear in `s`; the reported GMI is its
//! supremum over `s`. The free energy depends on four auxiliary scalars:
//! `(ξ, ε̃)` describe the postulated decoupled channel and `(η, ε)` the true
//! channel seen by the postulated estimator. `ε̃` is the posterior variance
//! of the postulated channel averaged over outputs of the true one, which
//! makes the free energy stationary in all four. For Gaussian inputs that
//! variance does not depend on the output, the `(ξ, ε̃)` pair decouples and
//! everything is in closed form; discrete inputs are solved jointly.
//!
//! With white `R̃ = r̃ I` only the product `s̃ = s / r̃` matters, so white
//! postulates are solved in `s̃` directly. A general `R̃` is handled in its
//! eigenbasis, where every trace reduces to sums over eigenvalues of `R̃`
//! and the matching diagonal entries of `R_w`.

use std::cell::Cell;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::decoupled::{self, DecoupledPostulated, DecoupledTrue};
use crate::error::{Error, Result};
use crate::model::{CMatrix, Constellation, SystemConfig};
use crate::numerics::{maximize_around, scalar_fixed_point, FixedPointOptions, LogGridSearch};
use crate::rate::{AuxSnapshot, RateResult, SolverOptions};
use crate::nats_to_bits;

/// Replica parameters of one solution branch at a fixed decoder scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MismatchedAux {
    /// Decoder scale: `s̃ = s/r̃` for white postulates, `s` otherwise.
    pub s_tilde: f64,
    pub xi: f64,
    pub eta: f64,
    pub eps: f64,
    pub eps_tilde: f64,
    /// Replica free energy `f(s̃)` in nats.
    pub free_energy: f64,
    /// Largest residual over the four fixed-point equations.
    pub residual: f64,
    /// Fixed-point map evaluations spent on this branch.
    pub iterations: usize,
}

/// Noise covariance assumed by the decoder.
#[derive(Debug, Clone, PartialEq)]
pub enum Postulate {
    /// `R̃ = r̃ I`.
    White(f64),
    /// General Hermitian positive-definite `R̃`.
    Matrix(CMatrix),
}

impl Postulate {
    /// The decoder that trusts the receive noise model, `R̃ = R_w`.
    pub fn receiver_noise(cfg: &SystemConfig) -> Self {
        if cfg.is_white_noise() {
            Postulate::White(cfg.r_w()[(0, 0)].re)
        } else {
            Postulate::Matrix(cfg.r_w().clone())
        }
    }
}

/// `R̃` and `R_w` in the eigenbasis of `R̃`, normalized so that every
/// trace in the solver becomes a mean over `lambda`/`d`.
#[derive(Debug, Clone)]
struct Geometry {
    /// Eigenvalues of `R̃` (a single `1` for white postulates, in `s̃` units).
    lambda: Vec<f64>,
    /// `(Uᴴ R_w U)_ii` (a single `tr(R_w)/N` for white postulates).
    d: Vec<f64>,
    white: bool,
}

impl Geometry {
    fn new(cfg: &SystemConfig, postulate: &Postulate) -> Result<Self> {
        match postulate {
            Postulate::White(r) => {
                if !(*r > 0.0 && r.is_finite()) {
                    return Err(Error::InvalidArgument(format!("postulated noise level must be positive, got {r}")));
                }
                Ok(Self::white(cfg))
            }
            Postulate::Matrix(rt) => match scalar_multiple_of_identity(rt) {
                Some(r) if r > 0.0 => Ok(Self::white(cfg)),
                _ => Self::from_matrix(cfg, rt),
            },
        }
    }

    fn white(cfg: &SystemConfig) -> Self {
        Self {
            lambda: vec![1.0],
            d: vec![cfg.mean_noise()],
            white: true,
        }
    }

    fn from_matrix(cfg: &SystemConfig, rt: &CMatrix) -> Result<Self> {
        let n = cfg.n();
        if rt.nrows() != n || rt.ncols() != n {
            return Err(Error::InvalidArgument(format!(
                "postulated covariance must be {n}x{n}, got {}x{}",
                rt.nrows(),
                rt.ncols()
            )));
        }
        crate::model::hermitian_pd_eigenvalues(rt, "postulated covariance")
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let herm = (rt + rt.adjoint()).scale(0.5);
        let eig = herm.symmetric_eigen();
        let u = &eig.eigenvectors;
        let rotated = u.adjoint() * cfg.r_w() * u;
        Ok(Self {
            lambda: eig.eigenvalues.iter().copied().collect(),
            d: (0..n).map(|i| rotated[(i, i)].re).collect(),
            white: false,
        })
    }

    fn mean(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        self.lambda.iter().zip(&self.d).map(|(&l, &d)| f(l, d)).sum::<f64>() / self.lambda.len() as f64
    }

    /// `ξ = tr(Ω̃⁻¹)/(αN)` with `Ω̃ = s⁻¹R̃ + ε̃I`.
    fn xi(&self, alpha: f64, s: f64, eps_tilde: f64) -> f64 {
        self.mean(|l, _| 1.0 / (l / s + eps_tilde)) / alpha
    }

    /// `η = (1/α)[tr(Ω̃⁻¹)/N]² / [tr(Ω̃⁻¹ΩΩ̃⁻¹)/N]` with `Ω = R_w + εI`.
    /// `η` for either geometry; white postulates do not depend on `(s, ε̃)`.
    fn eta_at(&self, alpha: f64, s: f64, eps_tilde: f64, eps: f64) -> f64 {
        if self.white {
            1.0 / (alpha * (self.d[0] + eps))
        } else {
            self.eta(alpha, s, eps_tilde, eps)
        }
    }

    fn eta(&self, alpha: f64, s: f64, eps_tilde: f64, eps: f64) -> f64 {
        let t1 = self.mean(|l, _| 1.0 / (l / s + eps_tilde));
        let t2 = self.mean(|l, d| (d + eps) / (l / s + eps_tilde).powi(2));
        t1 * t1 / (alpha * t2)
    }

    /// `(1/(αN))[ln det Ω̃ + tr(Ω̃⁻¹Ω) − ln det(s⁻¹R̃)]`.
    fn log_det_term(&self, alpha: f64, s: f64, eps_tilde: f64, eps: f64) -> f64 {
        self.mean(|l, d| {
            let w = l / s + eps_tilde;
            // ln(w) − ln(l/s) = ln(1 + s ε̃ / l)
            (s * eps_tilde / l).ln_1p() + (d + eps) / w
        }) / alpha
    }

    /// `(s/M)[tr(R̃⁻¹R_w) + r_v tr(R̃⁻¹)]`.
    fn penalty(&self, alpha: f64, s: f64, r_v: f64) -> f64 {
        s * self.mean(|l, d| (d + r_v) / l) / alpha
    }

    /// Natural center of the decoder-scale search: the scale at which the
    /// decoder's noise model matches the average true noise power.
    fn center(&self, r_v: f64) -> f64 {
        let tl = self.mean(|l, _| l);
        let td = self.mean(|_, d| d);
        tl / (td + r_v)
    }
}

fn scalar_multiple_of_identity(m: &CMatrix) -> Option<f64> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return None;
    }
    let r = m[(0, 0)];
    if r.im != 0.0 {
        return None;
    }
    let n = m.nrows();
    let ok = (0..n).all(|i| {
        (0..n).all(|j| {
            let want = if i == j { r } else { Complex64::new(0.0, 0.0) };
            m[(i, j)] == want
        })
    });
    ok.then_some(r.re)
}

/// Closed-form `ξ` for Gaussian inputs and white postulates: the positive
/// root of `αξ(1 + s̃γ̄/(1 + ξγ̄)) = s̃`.
pub fn xi_gaussian_closed_form(alpha: f64, gamma_bar: f64, s_tilde: f64) -> f64 {
    let b = gamma_bar * s_tilde * (1.0 - alpha) - alpha;
    let disc = (4.0 * alpha * gamma_bar * s_tilde + b * b).sqrt();
    if b >= 0.0 {
        (b + disc) / (2.0 * alpha * gamma_bar)
    } else {
        // Rationalized to avoid cancellation when b ≈ −disc.
        2.0 * s_tilde / (disc - b)
    }
}

/// Postulated-stage solution `(ξ, ε̃)` for a white postulate, obtained by
/// iterating `ε̃ ← mmse(s̃/(α(1 + s̃ε̃)))` from the prior-only start `ε̃ = γ̄`.
///
/// Here `ε̃` is the MMSE of the postulated channel on its own outputs. That
/// is the exact postulated stage for Gaussian inputs, and for discrete
/// inputs whenever the true and postulated channels coincide (`r_v = 0`,
/// `s̃ = 1`); otherwise [`gmi`] solves `ε̃` jointly with the true stage.
/// Gaussian constellations are accepted and iterated too.
pub fn solve_xi_discrete(constellation: &Constellation, alpha: f64, s_tilde: f64) -> Result<(f64, f64)> {
    check_scale(s_tilde)?;
    let geom = Geometry {
        lambda: vec![1.0],
        d: vec![1.0],
        white: true,
    };
    let mut opts = SolverOptions::default();
    opts.fixed_point.tol = 1e-13;
    let b = iterate_postulated(&geom, constellation, alpha, s_tilde, constellation.gamma_bar(), &opts)?;
    Ok((b.xi, b.eps_tilde))
}

/// True-stage solutions `(η, ε)` for a white postulate given `ξ`.
///
/// Gaussian inputs have a single solution in closed form. Discrete inputs
/// are iterated from `ε = 10⁻⁶` and `ε = γ̄ + r_v`; every distinct converged
/// solution is returned.
pub fn solve_eta_eps(constellation: &Constellation, cfg: &SystemConfig, xi: f64) -> Result<Vec<(f64, f64)>> {
    if !(xi > 0.0 && xi.is_finite()) {
        return Err(Error::InvalidArgument(format!("xi must be positive, got {xi}")));
    }
    let geom = Geometry::white(cfg);
    // For a white postulate η does not depend on (s̃, ε̃) beyond ξ: pick the
    // pair that reproduces this ξ.
    let alpha = cfg.alpha();
    let post = PostulatedBranch {
        xi,
        eps_tilde: 0.0,
        s: alpha * xi,
        residual: 0.0,
        iterations: 0,
    };
    let branches = true_branches(&geom, cfg, constellation, &post, &SolverOptions::default())?;
    Ok(branches.into_iter().map(|b| (b.eta, b.eps)).collect())
}

#[derive(Debug, Clone, Copy)]
struct PostulatedBranch {
    xi: f64,
    eps_tilde: f64,
    /// Decoder scale the branch was solved at.
    s: f64,
    residual: f64,
    iterations: usize,
}

#[derive(Debug, Clone, Copy)]
struct TrueBranch {
    eta: f64,
    eps: f64,
    iterations: usize,
}

fn check_scale(s: f64) -> Result<()> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::InvalidArgument(format!("decoder scale must be positive and finite, got {s}")));
    }
    Ok(())
}

fn iterate_postulated(
    geom: &Geometry,
    c: &Constellation,
    alpha: f64,
    s: f64,
    seed: f64,
    opts: &SolverOptions,
) -> Result<PostulatedBranch> {
    let order = opts.order;
    let map = |et: f64| -> Result<f64> {
        let xi = geom.xi(alpha, s, et);
        decoupled::postulated_mmse(&DecoupledPostulated::new(xi, c)?.with_order(order))
    };
    let r = scalar_fixed_point(map, seed, &opts.fixed_point)?;
    let eps_tilde = r.solution[0];
    Ok(PostulatedBranch {
        xi: geom.xi(alpha, s, eps_tilde),
        eps_tilde,
        s,
        residual: r.residual,
        iterations: r.iterations,
    })
}

fn postulated_branches(
    geom: &Geometry,
    c: &Constellation,
    alpha: f64,
    s: f64,
    opts: &SolverOptions,
) -> Result<Vec<PostulatedBranch>> {
    let gb = c.gamma_bar();
    if c.is_gaussian() && geom.white {
        let xi = xi_gaussian_closed_form(alpha, gb, s);
        return Ok(vec![PostulatedBranch {
            xi,
            eps_tilde: gb / (1.0 + xi * gb),
            s,
            residual: 0.0,
            iterations: 0,
        }]);
    }
    let mut out: Vec<PostulatedBranch> = Vec::new();
    let mut last_err = None;
    for seed in [gb, 1e-6 * gb] {
        match iterate_postulated(geom, c, alpha, s, seed, opts) {
            Ok(b) if b.residual <= opts.fixed_point.tol => {
                if !out.iter().any(|o| same_root(o.eps_tilde, b.eps_tilde, gb)) {
                    out.push(b);
                }
            }
            Ok(b) => {
                last_err = Some(Error::NotConverged {
                    context: "postulated-channel fixed point",
                    iterations: b.iterations,
                    residual: b.residual,
                })
            }
            Err(e) => last_err = Some(e),
        }
    }
    if out.is_empty() {
        return Err(last_err.unwrap_or(Error::NotConverged {
            context: "postulated-channel fixed point",
            iterations: 0,
            residual: f64::NAN,
        }));
    }
    Ok(out)
}

fn same_root(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 1e-7 * (scale + a.abs().max(b.abs()))
}

fn true_branches(
    geom: &Geometry,
    cfg: &SystemConfig,
    c: &Constellation,
    post: &PostulatedBranch,
    opts: &SolverOptions,
) -> Result<Vec<TrueBranch>> {
    let alpha = cfg.alpha();
    let r_v = cfg.r_v();
    let (s, et, xi) = (post.s, post.eps_tilde, post.xi);
    let gb = c.gamma_bar();

    if c.is_gaussian() {
        // ε = A + B/η and 1/η = α(P + εQ)/T², so ε solves a linear equation.
        let xg = xi * gb;
        let a = (gb + r_v) / (1.0 + xg).powi(2);
        let b = (xg / (1.0 + xg)).powi(2);
        let (t, p, q) = if geom.white {
            // White postulates: η = 1/(α(d + ε)) regardless of (s, ε̃).
            (1.0, geom.d[0], 1.0)
        } else {
            (
                geom.mean(|l, _| 1.0 / (l / s + et)),
                geom.mean(|l, d| d / (l / s + et).powi(2)),
                geom.mean(|l, _| 1.0 / (l / s + et).powi(2)),
            )
        };
        let denom = 1.0 - b * alpha * q / (t * t);
        if denom <= 0.0 {
            return Err(Error::NotConverged {
                context: "Gaussian true-channel equations (no positive solution)",
                iterations: 0,
                residual: f64::INFINITY,
            });
        }
        let eps = (a + b * alpha * p / (t * t)) / denom;
        let eta = if geom.white {
            1.0 / (alpha * (geom.d[0] + eps))
        } else {
            geom.eta(alpha, s, et, eps)
        };
        return Ok(vec![TrueBranch {
            eta,
            eps,
            iterations: 0,
        }]);
    }

    let mut out: Vec<TrueBranch> = Vec::new();
    let mut last_err = None;
    for seed in [1e-6, gb + r_v] {
        match iterate_true(geom, cfg, c, xi, s, et, seed, &opts.fixed_point, opts.order) {
            Ok(tb) => {
                if !out.iter().any(|o| same_root(o.eps, tb.eps, gb + r_v)) {
                    out.push(tb);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    if out.is_empty() {
        return Err(last_err.unwrap_or(Error::NotConverged {
            context: "true-channel fixed point",
            iterations: 0,
            residual: f64::NAN,
        }));
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn iterate_true(
    geom: &Geometry,
    cfg: &SystemConfig,
    c: &Constellation,
    xi: f64,
    s: f64,
    et: f64,
    seed: f64,
    fp: &FixedPointOptions,
    order: usize,
) -> Result<TrueBranch> {
    let alpha = cfg.alpha();
    let r_v = cfg.r_v();
    let qctx = DecoupledPostulated::new(xi, c)?.with_order(order);
    let eta_of = |eps: f64| {
        if geom.white {
            1.0 / (alpha * (geom.d[0] + eps))
        } else {
            geom.eta(alpha, s, et, eps)
        }
    };
    let map = |eps: f64| -> Result<f64> {
        let tctx = DecoupledTrue::new(eta_of(eps), r_v, c)?.with_order(order);
        decoupled::true_mse(&tctx, &qctx)
    };
    let r = scalar_fixed_point(map, seed, fp)?;
    if !r.converged {
        return Err(Error::NotConverged {
            context: "true-channel fixed point",
            iterations: r.iterations,
            residual: r.residual,
        });
    }
    let eps = r.solution[0];
    Ok(TrueBranch {
        eta: eta_of(eps),
        eps,
        iterations: r.iterations,
    })
}

/// Joint solutions for discrete inputs, where `ε̃` is the postulated
/// posterior variance averaged over outputs of the true channel and thus
/// depends on `η`. An outer iteration on `ε̃` re-solves the true stage,
/// warm-started, at every step. It is seeded from a nearly error-free state
/// and from the prior-only state; every distinct converged solution is
/// returned.
fn coupled_branches(
    geom: &Geometry,
    cfg: &SystemConfig,
    c: &Constellation,
    s: f64,
    opts: &SolverOptions,
) -> Result<Vec<(PostulatedBranch, TrueBranch)>> {
    let gb = c.gamma_bar();
    let total = gb + cfg.r_v();
    let mut out: Vec<(PostulatedBranch, TrueBranch)> = Vec::new();
    let mut last_err = None;
    for (et0, eps0) in [(1e-6 * gb, 1e-6 * total), (gb, total)] {
        match solve_coupled(geom, cfg, c, s, et0, eps0, opts) {
            Ok(pair) => {
                let dup = out
                    .iter()
                    .any(|(p, t)| same_root(p.eps_tilde, pair.0.eps_tilde, gb) && same_root(t.eps, pair.1.eps, total));
                if !dup {
                    out.push(pair);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    if out.is_empty() {
        return Err(last_err.unwrap_or(Error::NotConverged {
            context: "joint replica fixed point",
            iterations: 0,
            residual: f64::NAN,
        }));
    }
    Ok(out)
}

/// Joint solve from `(ε̃, ε) = (et0, eps0)`: Newton's method first, the
/// nested scalar iteration when Newton does not converge.
fn solve_coupled(
    geom: &Geometry,
    cfg: &SystemConfig,
    c: &Constellation,
    s: f64,
    et0: f64,
    eps0: f64,
    opts: &SolverOptions,
) -> Result<(PostulatedBranch, TrueBranch)> {
    if let Some(pair) = newton_coupled(geom, cfg, c, s, [et0, eps0], opts)? {
        return Ok(pair);
    }
    nested_coupled(geom, cfg, c, s, et0, eps0, opts)
}

const NEWTON_MAX_EVALS: usize = 80;

/// Newton's method on `G(ε̃, ε) = F(ε̃, ε) − (ε̃, ε)` with a forward-difference
/// Jacobian and backtracking on `|G|∞`. `Ok(None)` when it stalls.
fn newton_coupled(
    geom: &Geometry,
    cfg: &SystemConfig,
    c: &Constellation,
    s: f64,
    x0: [f64; 2],
    opts: &SolverOptions,
) -> Result<Option<(PostulatedBranch, TrueBranch)>> {
    let alpha = cfg.alpha();
    let order = opts.order;
    let tol = opts.fixed_point.tol;
    let beta = opts.fixed_point.damping;
    let evals = Cell::new(0usize);
    let gap = |x: [f64; 2]| -> Result<[f64; 2]> {
        evals.set(evals.get() + 1);
        let xi = geom.xi(alpha, s, x[0]);
        let eta = geom.eta_at(alpha, s, x[0], x[1]);
        let q = DecoupledPostulated::new(xi, c)?.with_order(order);
        let t = DecoupledTrue::new(eta, cfg.r_v(), c)?.with_order(order);
        Ok([
            decoupled::postulated_variance(&t, &q)? - x[0],
            decoupled::true_mse(&t, &q)? - x[1],
        ])
    };
    let norm = |g: [f64; 2]| g[0].abs().max(g[1].abs());
    let merit = |g: [f64; 2]| g[0] * g[0] + g[1] * g[1];
    let mut x = x0;
    let mut g = gap(x)?;
    // Substitution until the residual starts to shrink: between the seed and
    // a repelling region the residual norm can have a spurious local
    // minimum that would trap the Newton iteration.
    while norm(g) > tol && evals.get() < NEWTON_MAX_EVALS / 2 {
        let next = [(x[0] + beta * g[0]).max(0.0), (x[1] + beta * g[1]).max(0.0)];
        let g_next = gap(next)?;
        let shrinking = merit(g_next) < merit(g);
        x = next;
        g = g_next;
        if shrinking {
            break;
        }
    }
    loop {
        if norm(g) <= tol {
            break;
        }
        if evals.get() >= NEWTON_MAX_EVALS {
            return Ok(None);
        }
        let mut jac = [[0.0; 2]; 2];
        for j in 0..2 {
            let h = 1e-7 * x[j].abs().max(1e-12);
            let mut xp = x;
            xp[j] += h;
            let gp = gap(xp)?;
            for i in 0..2 {
                jac[i][j] = (gp[i] - g[i]) / h;
            }
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let step = [
            -(jac[1][1] * g[0] - jac[0][1] * g[1]) / det,
            -(jac[0][0] * g[1] - jac[1][0] * g[0]) / det,
        ];
        let mut lambda = if step.iter().all(|v| v.is_finite()) { 1.0 } else { 0.0 };
        let mut accepted = false;
        while lambda >= 1.0 / 16.0 {
            let trial = [x[0] + lambda * step[0], x[1] + lambda * step[1]];
            if trial.iter().any(|&v| v < 0.0) {
                lambda *= 0.5;
                continue;
            }
            let gt = gap(trial)?;
            if merit(gt) < (1.0 - 1e-4 * lambda) * merit(g) {
                x = trial;
                g = gt;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            // Plain substitution step towards the attracting solution.
            x = [(x[0] + beta * g[0]).max(0.0), (x[1] + beta * g[1]).max(0.0)];
            g = gap(x)?;
        }
    }
    let xi = geom.xi(alpha, s, x[0]);
    let residual = norm(g);
    Ok(Some((
        PostulatedBranch {
            xi,
            eps_tilde: x[0],
            s,
            residual,
            iterations: evals.get(),
        },
        TrueBranch {
            eta: geom.eta_at(alpha, s, x[0], x[1]),
            eps: x[1],
            iterations: 0,
        },
    )))
}

fn nested_coupled(
    geom: &Geometry,
    cfg: &SystemConfig,
    c: &Constellation,
    s: f64,
    et0: f64,
    eps0: f64,
    opts: &SolverOptions,
) -> Result<(PostulatedBranch, TrueBranch)> {
    let alpha = cfg.alpha();
    let order = opts.order;
    let inner = FixedPointOptions {
        tol: opts.fixed_point.tol * 0.1,
        ..opts.fixed_point
    };
    let warm = Cell::new(eps0);
    let spent = Cell::new(0usize);
    let map = |et: f64| -> Result<f64> {
        let xi = geom.xi(alpha, s, et);
        let tb = iterate_true(geom, cfg, c, xi, s, et, warm.get(), &inner, order)?;
        warm.set(tb.eps);
        spent.set(spent.get() + tb.iterations);
        let q = DecoupledPostulated::new(xi, c)?.with_order(order);
        let t = DecoupledTrue::new(tb.eta, cfg.r_v(), c)?.with_order(order);
        decoupled::postulated_variance(&t, &q)
    };
    let r = scalar_fixed_point(map, et0, &opts.fixed_point)?;
    if !r.converged {
        return Err(Error::NotConverged {
            context: "joint replica fixed point",
            iterations: r.iterations,
            residual: r.residual,
        });
    }
    let et = r.solution[0];
    let xi = geom.xi(alpha, s, et);
    let tb = iterate_true(geom, cfg, c, xi, s, et, warm.get(), &inner, order)?;
    Ok((
        PostulatedBranch {
            xi,
            eps_tilde: et,
            s,
            residual: r.residual,
            iterations: r.iterations,
        },
        TrueBranch {
            iterations: tb.iterations + spent.get(),
            ..tb
        },
    ))
}

/// Free energy `f(s̃)` for white postulates, in nats.
///
/// Gaussian inputs use the closed form
/// `(1/α)(ξ/η + ln s̃ − ln αξ) − ξε + ln(1+ξγ̄) + ξr_v/(1+ξγ̄)`; discrete
/// inputs add the scalar cross-entropy term of the decoupled channels.
pub fn free_energy(aux: &MismatchedAux, cfg: &SystemConfig, constellation: &Constellation) -> Result<f64> {
    free_energy_with_order(aux, cfg, constellation, crate::numerics::DEFAULT_ORDER)
}

fn free_energy_with_order(aux: &MismatchedAux, cfg: &SystemConfig, c: &Constellation, order: usize) -> Result<f64> {
    check_aux(aux)?;
    let alpha = cfg.alpha();
    let r_v = cfg.r_v();
    let MismatchedAux {
        s_tilde: s,
        xi,
        eta,
        eps,
        eps_tilde,
        ..
    } = *aux;
    let lead = (xi / eta + s.ln() - (alpha * xi).ln()) / alpha - xi * eps;
    if c.is_gaussian() {
        let xg = xi * c.gamma_bar();
        return Ok(lead + xg.ln_1p() + xi * r_v / (1.0 + xg));
    }
    let ce = cross_entropy(c, eta, r_v, xi, order)?;
    Ok(lead + xi * (xi - eta) * eps_tilde / eta - (xi / eta + (std::f64::consts::PI / xi).ln() + ce))
}

/// Free energy for a general postulate `R̃` at decoder scale `s` (not
/// `s̃`), from the determinant and trace form. Valid for any constellation.
pub fn free_energy_general(
    aux: &MismatchedAux,
    cfg: &SystemConfig,
    constellation: &Constellation,
    r_tilde: &CMatrix,
) -> Result<f64> {
    let geom = Geometry::from_matrix(cfg, r_tilde)?;
    free_energy_geometry(aux, cfg, constellation, &geom, crate::numerics::DEFAULT_ORDER)
}

fn free_energy_geometry(aux: &MismatchedAux, cfg: &SystemConfig, c: &Constellation, geom: &Geometry, order: usize) -> Result<f64> {
    check_aux(aux)?;
    let alpha = cfg.alpha();
    let MismatchedAux {
        s_tilde: s,
        xi,
        eta,
        eps,
        eps_tilde,
        ..
    } = *aux;
    let ce = cross_entropy(c, eta, cfg.r_v(), xi, order)?;
    Ok(geom.log_det_term(alpha, s, eps_tilde, eps) - ((std::f64::consts::PI / xi).ln() + xi / eta + ce) - xi * eps
        + xi * (xi - eta) * eps_tilde / eta)
}

fn cross_entropy(c: &Constellation, eta: f64, r_v: f64, xi: f64, order: usize) -> Result<f64> {
    let t = DecoupledTrue::new(eta, r_v, c)?.with_order(order);
    let q = DecoupledPostulated::new(xi, c)?.with_order(order);
    decoupled::cross_entropy(&t, &q)
}

fn check_aux(aux: &MismatchedAux) -> Result<()> {
    let ok = aux.s_tilde > 0.0
        && aux.xi > 0.0
        && aux.eta > 0.0
        && aux.eps >= 0.0
        && aux.eps_tilde >= 0.0
        && [aux.s_tilde, aux.xi, aux.eta, aux.eps, aux.eps_tilde].iter().all(|v| v.is_finite());
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("invalid replica parameters {aux:?}")))
    }
}

/// GMI objective at decoder scale `s̃` for the decoder with `R̃ = R_w`:
/// `f(s̃) − (s̃/α)(tr(R_w)/N + r_v)` in nats, with the branch of least free
/// energy.
pub fn gmi_at_s(s_tilde: f64, cfg: &SystemConfig, constellation: &Constellation) -> Result<(f64, MismatchedAux)> {
    let geom = Geometry::new(cfg, &Postulate::receiver_noise(cfg))?;
    objective(&geom, s_tilde, cfg, constellation, &SolverOptions::default())
}

/// [`gmi_at_s`] for an arbitrary postulate. For white postulates `s` is
/// `s̃ = s/r̃`; for general ones it is the decoder scale itself.
pub fn gmi_at_s_with(
    s: f64,
    cfg: &SystemConfig,
    constellation: &Constellation,
    postulate: &Postulate,
    opts: &SolverOptions,
) -> Result<(f64, MismatchedAux)> {
    let geom = Geometry::new(cfg, postulate)?;
    objective(&geom, s, cfg, constellation, opts)
}

fn objective(
    geom: &Geometry,
    s: f64,
    cfg: &SystemConfig,
    c: &Constellation,
    opts: &SolverOptions,
) -> Result<(f64, MismatchedAux)> {
    check_scale(s)?;
    let alpha = cfg.alpha();
    let mut best: Option<MismatchedAux> = None;
    let pairs = if c.is_gaussian() {
        let mut pairs = Vec::new();
        for post in postulated_branches(geom, c, alpha, s, opts)? {
            for tb in true_branches(geom, cfg, c, &post, opts)? {
                pairs.push((post, tb));
            }
        }
        pairs
    } else {
        coupled_branches(geom, cfg, c, s, opts)?
    };
    for (post, tb) in pairs {
        let mut aux = MismatchedAux {
            s_tilde: s,
            xi: post.xi,
            eta: tb.eta,
            eps: tb.eps,
            eps_tilde: post.eps_tilde,
            free_energy: 0.0,
            residual: 0.0,
            iterations: post.iterations + tb.iterations,
        };
        aux.free_energy = if geom.white {
            free_energy_with_order(&aux, cfg, c, opts.order)?
        } else {
            free_energy_geometry(&aux, cfg, c, geom, opts.order)?
        };
        if !aux.free_energy.is_finite() {
            return Err(Error::NonFinite {
                context: "replica free energy",
                iteration: aux.iterations,
                value: aux.free_energy,
            });
        }
        if best.is_none_or(|b| aux.free_energy < b.free_energy) {
            best = Some(aux);
        }
    }
    let mut aux = best.expect("branch lists are nonempty");
    aux.residual = residual(geom, cfg, c, &aux, opts.order)?;
    Ok((aux.free_energy - geom.penalty(alpha, s, cfg.r_v()), aux))
}

/// Largest residual of the four fixed-point equations at `aux`.
fn residual(geom: &Geometry, cfg: &SystemConfig, c: &Constellation, aux: &MismatchedAux, order: usize) -> Result<f64> {
    let alpha = cfg.alpha();
    let s = aux.s_tilde;
    let q = DecoupledPostulated::new(aux.xi, c)?.with_order(order);
    let t = DecoupledTrue::new(aux.eta, cfg.r_v(), c)?.with_order(order);
    let r_xi = aux.xi - geom.xi(alpha, s, aux.eps_tilde);
    let r_et = aux.eps_tilde - decoupled::postulated_variance(&t, &q)?;
    let eta = if geom.white {
        1.0 / (alpha * (geom.d[0] + aux.eps))
    } else {
        geom.eta(alpha, s, aux.eps_tilde, aux.eps)
    };
    let r_eta = aux.eta - eta;
    let r_eps = aux.eps - decoupled::true_mse(&t, &q)?;
    Ok([r_xi, r_et, r_eta, r_eps].iter().map(|r| r.abs()).fold(0.0, f64::max))
}

/// GMI for the decoder that postulates `R̃ = R_w`.
pub fn gmi(cfg: &SystemConfig, constellation: &Constellation) -> Result<RateResult> {
    gmi_with(cfg, constellation, &Postulate::receiver_noise(cfg), &SolverOptions::default())
}

/// GMI for an arbitrary postulate, maximized over the decoder scale.
pub fn gmi_with(
    cfg: &SystemConfig,
    constellation: &Constellation,
    postulate: &Postulate,
    opts: &SolverOptions,
) -> Result<RateResult> {
    let geom = Geometry::new(cfg, postulate)?;
    let max = maximize_around(
        |s| objective(&geom, s, cfg, constellation, opts).map(|(v, _)| v),
        geom.center(cfg.r_v()),
        &opts.search,
    )?;
    let (value, aux) = objective(&geom, max.argmax, cfg, constellation, opts)?;
    Ok(RateResult {
        rate_nats: value,
        rate_bits: nats_to_bits(value),
        s_tilde: Some(max.argmax),
        aux: AuxSnapshot::Mismatched(aux),
        converged: aux.residual <= 1e-9,
        iterations: aux.iterations,
        residual: aux.residual,
        free_energy: Some(aux.free_energy),
    })
}

/// High-SNR limit of the Gaussian-input GMI with white postulate, in nats:
/// `sup_s (1/α) ln(s/(αξ)) + ln(1+ξ) + κ²ξ/(1+ξ) − sκ²/α`, where `ξ` is the
/// closed-form root at unit power.
pub fn gmi_highsnr_gaussian(alpha: f64, kappa: f64) -> Result<f64> {
    gmi_highsnr_gaussian_with(alpha, kappa, &LogGridSearch::default())
}

pub fn gmi_highsnr_gaussian_with(alpha: f64, kappa: f64, search: &LogGridSearch) -> Result<f64> {
    if !(alpha > 0.0 && alpha.is_finite() && kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "high-SNR limit needs α > 0 and κ > 0, got α={alpha}, κ={kappa}"
        )));
    }
    let k2 = kappa * kappa;
    let f = |s: f64| Ok(highsnr_objective(alpha, k2, s));
    Ok(maximize_around(f, 1.0 / k2, search)?.max)
}

/// Objective of [`gmi_highsnr_gaussian`] at scale `s_gamma`.
pub fn highsnr_objective(alpha: f64, kappa_sq: f64, s_gamma: f64) -> f64 {
    let xi = xi_gaussian_closed_form(alpha, 1.0, s_gamma);
    (s_gamma / (alpha * xi)).ln() / alpha + xi.ln_1p() + kappa_sq * xi / (1.0 + xi) - s_gamma * kappa_sq / alpha
}

/// `(η, ξ)` from the trace formulas with explicit matrix inverses:
/// `Ω = R_w + εI`, `Ω̃ = s⁻¹R̃ + ε̃I`, `ξ = tr(Ω̃⁻¹)/(αN)` and
/// `η = (1/α)[tr(Ω̃⁻¹)/N]² / [tr(Ω̃⁻¹ΩΩ̃⁻¹)/N]`.
pub fn general_aux_traces(
    r_w: &CMatrix,
    r_tilde: &CMatrix,
    s: f64,
    eps: f64,
    eps_tilde: f64,
    alpha: f64,
) -> Result<(f64, f64)> {
    let n = r_w.nrows();
    if r_w.ncols() != n || r_tilde.nrows() != n || r_tilde.ncols() != n || n == 0 {
        return Err(Error::InvalidArgument("covariances must be square and of equal size".into()));
    }
    check_scale(s)?;
    let id = DMatrix::<Complex64>::identity(n, n);
    let omega = r_w + id.scale(eps);
    let omega_t = r_tilde.unscale(s) + id.scale(eps_tilde);
    let inv = omega_t.try_inverse().ok_or(Error::Singular("postulated covariance Ω̃"))?;
    let nf = n as f64;
    let t1 = inv.trace().re / nf;
    let t2 = (&inv * &omega * &inv).trace().re / nf;
    Ok((t1 * t1 / (alpha * t2), t1 / alpha))
}
