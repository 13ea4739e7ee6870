//! Scalar decoupled channels shared by the replica solvers.
//!
//! The true decoupled channel is `z = x + v + n` with `v ~ CN(0, r_v)` and
//! `n ~ CN(0, 1/η)`; the postulated one is `z = x̃ + ñ` with
//! `ñ ~ CN(0, 1/ξ)`. Both use the constellation's uniform prior.
//!
//! Integrals over `z` are taken per mixture component with a
//! Gaussian-weighted trapezoid rule. Posterior means and log-densities of a
//! finite alphabet have complex singularities close to the real axis near
//! decision boundaries, which makes Gauss–Hermite rules converge slowly; the
//! trapezoid rule converges geometrically in the width of the analytic
//! strip, and its step is set from the alphabet geometry and the noise
//! variance before integration.
//!
//! Alphabets that are a Cartesian product of two real sets (BPSK, QPSK,
//! square QAM) split every quantity into two one-dimensional integrals.
//! Expectations over the transmit distortion `v` are done in closed form:
//! given `x` and `z`, `v` is Gaussian with mean `c(z − x)`,
//! `c = ηr_v/(1 + ηr_v)`, and variance `r_v/(1 + ηr_v)`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{Constellation, Layout};
use crate::numerics::{GaussLegendre, DEFAULT_ORDER};

/// Postulated decoupled channel with inverse noise variance `xi`.
#[derive(Debug, Clone, Copy)]
pub struct DecoupledPostulated<'a> {
    pub xi: f64,
    pub constellation: &'a Constellation,
    /// Quadrature resolution; node density scales linearly with it.
    pub order: usize,
}

impl<'a> DecoupledPostulated<'a> {
    pub fn new(xi: f64, constellation: &'a Constellation) -> Result<Self> {
        if !(xi > 0.0 && xi.is_finite()) {
            return Err(Error::InvalidArgument(format!("xi must be positive and finite, got {xi}")));
        }
        Ok(Self {
            xi,
            constellation,
            order: DEFAULT_ORDER,
        })
    }

    pub fn with_order(mut self, order: usize) -> Self {
        self.order = order;
        self
    }

    fn noise_var(&self) -> f64 {
        1.0 / self.xi
    }
}

/// True decoupled channel with inverse noise variance `eta` and transmit
/// distortion variance `r_v`.
#[derive(Debug, Clone, Copy)]
pub struct DecoupledTrue<'a> {
    pub eta: f64,
    pub r_v: f64,
    pub constellation: &'a Constellation,
    pub order: usize,
}

impl<'a> DecoupledTrue<'a> {
    pub fn new(eta: f64, r_v: f64, constellation: &'a Constellation) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::InvalidArgument(format!("eta must be positive and finite, got {eta}")));
        }
        if !(r_v >= 0.0 && r_v.is_finite()) {
            return Err(Error::InvalidArgument(format!("r_v must be nonnegative, got {r_v}")));
        }
        Ok(Self {
            eta,
            r_v,
            constellation,
            order: DEFAULT_ORDER,
        })
    }

    pub fn with_order(mut self, order: usize) -> Self {
        self.order = order;
        self
    }

    /// Per-component variance of `p(z)`: `1/η + r_v`.
    fn component_var(&self) -> f64 {
        1.0 / self.eta + self.r_v
    }

    /// Weight `c = ηr_v/(1+ηr_v)` of `z − x` in `E[v | x, z]`.
    fn shrink(&self) -> f64 {
        let t = self.eta * self.r_v;
        t / (1.0 + t)
    }

    /// `Var[v | x, z] = r_v/(1+ηr_v)`.
    fn residual_distortion(&self) -> f64 {
        self.r_v / (1.0 + self.eta * self.r_v)
    }
}

fn check_order(order: usize) -> Result<()> {
    if order < 2 {
        return Err(Error::InvalidArgument(format!("quadrature order must be at least 2, got {order}")));
    }
    Ok(())
}

/// `⟨x̃⟩_q`: posterior mean of the postulated input given `z`.
pub fn posterior_mean(z: Complex64, ctx: &DecoupledPostulated) -> Complex64 {
    let c = ctx.constellation;
    let var = ctx.noise_var();
    match c.layout() {
        Layout::Gaussian => {
            let g = ctx.xi * c.gamma_bar();
            z * (g / (1.0 + g))
        }
        Layout::Separable { re, im } => {
            Complex64::new(axis::posterior_mean(z.re, re, var), axis::posterior_mean(z.im, im, var))
        }
        Layout::Points => plane::posterior_mean(z, c.points(), var),
    }
}

/// `q(z)`: postulated output density.
pub fn postulated_marginal(z: Complex64, ctx: &DecoupledPostulated) -> f64 {
    log_mixture_density(z, ctx.constellation, ctx.noise_var()).exp()
}

/// `p(z)`: true output density, a mixture with component variance `1/η + r_v`.
pub fn true_marginal(z: Complex64, ctx: &DecoupledTrue) -> f64 {
    log_mixture_density(z, ctx.constellation, ctx.component_var()).exp()
}

/// `ε̃`: MMSE of the postulated channel, in `[0, γ̄]`.
pub fn postulated_mmse(ctx: &DecoupledPostulated) -> Result<f64> {
    check_order(ctx.order)?;
    let c = ctx.constellation;
    let var = ctx.noise_var();
    let value = match c.layout() {
        Layout::Gaussian => c.gamma_bar() / (1.0 + ctx.xi * c.gamma_bar()),
        Layout::Separable { re, im } => axis::mmse(re, var, ctx.order) + axis::mmse(im, var, ctx.order),
        Layout::Points => plane::mismatched_mse(c.points(), var, var, 0.0, ctx.order),
    };
    Ok(value.clamp(0.0, c.gamma_bar()))
}

/// `ε = E|v + x − ⟨x̃⟩_q(z)|²` with `z | x, v ~ CN(x + v, 1/η)`.
pub fn true_mse(ctx_true: &DecoupledTrue, ctx_post: &DecoupledPostulated) -> Result<f64> {
    check_order(ctx_true.order)?;
    let c = ctx_true.constellation;
    let gb = c.gamma_bar();
    let rv = ctx_true.r_v;
    let eta = ctx_true.eta;
    let (vp, vq, s, order) = (ctx_true.component_var(), ctx_post.noise_var(), ctx_true.shrink(), ctx_true.order);
    let value = match c.layout() {
        Layout::Gaussian => {
            let xg = ctx_post.xi * gb;
            (gb + rv) / ((1.0 + xg) * (1.0 + xg)) + 1.0 / (eta * (1.0 + 1.0 / xg).powi(2))
        }
        Layout::Separable { re, im } => {
            ctx_true.residual_distortion()
                + axis::mismatched_mse(re, vp, vq, s, order)
                + axis::mismatched_mse(im, vp, vq, s, order)
        }
        Layout::Points => ctx_true.residual_distortion() + plane::mismatched_mse(c.points(), vp, vq, s, order),
    };
    Ok(value)
}

/// `E_p Var_q(x̃ | z)`: posterior variance of the postulated channel
/// averaged over outputs of the true channel. Equals [`postulated_mmse`]
/// when the two channels coincide.
pub fn postulated_variance(ctx_true: &DecoupledTrue, ctx_post: &DecoupledPostulated) -> Result<f64> {
    check_order(ctx_true.order)?;
    let c = ctx_true.constellation;
    let (vp, vq, order) = (ctx_true.component_var(), ctx_post.noise_var(), ctx_true.order);
    let value = match c.layout() {
        Layout::Gaussian => c.gamma_bar() / (1.0 + ctx_post.xi * c.gamma_bar()),
        Layout::Separable { re, im } => {
            let part = |pts: &[f64]| axis::mixture(pts, vp, vq, order, |_, a| axis::posterior_variance(a, pts, vq));
            part(re) + part(im)
        }
        Layout::Points => {
            let pts = c.points();
            plane::mixture(pts, vp, vq, order, |_, z| plane::posterior_variance(z, pts, vq))
        }
    };
    Ok(value.clamp(0.0, c.gamma_bar()))
}

/// `∫ p(z) ln q(z) dz`.
pub fn cross_entropy(ctx_true: &DecoupledTrue, ctx_post: &DecoupledPostulated) -> Result<f64> {
    mixture_log_expectation(
        ctx_true.constellation,
        ctx_true.component_var(),
        ctx_post.noise_var(),
        ctx_true.order,
    )
}

/// `∫ p(z) ln p(z) dz` (negative differential entropy of `p`).
pub fn true_neg_entropy(ctx: &DecoupledTrue) -> Result<f64> {
    let v = ctx.component_var();
    mixture_log_expectation(ctx.constellation, v, v, ctx.order)
}

/// `∫ q(z) ln q(z) dz`.
pub fn postulated_neg_entropy(ctx: &DecoupledPostulated) -> Result<f64> {
    let v = ctx.noise_var();
    mixture_log_expectation(ctx.constellation, v, v, ctx.order)
}

/// `⟨χ⟩`: conditional mean of `χ = x + v` given `z` on the true channel.
pub fn matched_posterior_mean(z: Complex64, ctx: &DecoupledTrue) -> Complex64 {
    let c = ctx.constellation;
    let t = ctx.eta * ctx.r_v;
    match c.layout() {
        Layout::Gaussian => {
            let g = ctx.eta * (c.gamma_bar() + ctx.r_v);
            z * (g / (1.0 + g))
        }
        Layout::Separable { re, im } => {
            let v = ctx.component_var();
            let pm = Complex64::new(axis::posterior_mean(z.re, re, v), axis::posterior_mean(z.im, im, v));
            (pm + z * t) / (1.0 + t)
        }
        Layout::Points => {
            let pm = plane::posterior_mean(z, c.points(), ctx.component_var());
            (pm + z * t) / (1.0 + t)
        }
    }
}

/// `E|⟨χ⟩|²`, in `[0, γ̄ + r_v]`.
pub fn matched_second_moment(ctx: &DecoupledTrue) -> Result<f64> {
    check_order(ctx.order)?;
    let c = ctx.constellation;
    let total = c.gamma_bar() + ctx.r_v;
    let (v, t, order) = (ctx.component_var(), ctx.eta * ctx.r_v, ctx.order);
    let value = match c.layout() {
        Layout::Gaussian => {
            let g = ctx.eta * total;
            total * g / (1.0 + g)
        }
        Layout::Separable { re, im } => {
            let axis_moment = |pts: &[f64]| {
                axis::mixture(pts, v, v, order, |_, a| {
                    let m = (axis::posterior_mean(a, pts, v) + t * a) / (1.0 + t);
                    m * m
                })
            };
            axis_moment(re) + axis_moment(im)
        }
        Layout::Points => plane::mixture(c.points(), v, v, order, |_, z| matched_posterior_mean(z, ctx).norm_sqr()),
    };
    Ok(value.clamp(0.0, total))
}

/// `E|χ − ⟨χ⟩|² = γ̄ + r_v − E|⟨χ⟩|²`, evaluated as a direct error
/// expectation so it stays accurate when the error is tiny.
pub fn matched_mmse(ctx: &DecoupledTrue) -> Result<f64> {
    check_order(ctx.order)?;
    let c = ctx.constellation;
    let t = ctx.eta * ctx.r_v;
    let v = ctx.component_var();
    // x + c(z − x) − ⟨χ⟩ = (x − E[x|z]) / (1 + ηr_v).
    let value = match c.layout() {
        Layout::Gaussian => {
            let total = c.gamma_bar() + ctx.r_v;
            total / (1.0 + ctx.eta * total)
        }
        Layout::Separable { re, im } => {
            ctx.residual_distortion() + (axis::mmse(re, v, ctx.order) + axis::mmse(im, v, ctx.order)) / (1.0 + t).powi(2)
        }
        Layout::Points => {
            ctx.residual_distortion() + plane::mismatched_mse(c.points(), v, v, 0.0, ctx.order) / (1.0 + t).powi(2)
        }
    };
    Ok(value.max(0.0))
}

/// `I(z; χ) = ln(η/(eπ)) − ∫ p ln p`, in nats.
pub fn matched_scalar_mi(ctx: &DecoupledTrue) -> Result<f64> {
    let c = ctx.constellation;
    if c.is_gaussian() {
        return Ok((ctx.eta * (c.gamma_bar() + ctx.r_v)).ln_1p());
    }
    let value = (ctx.eta / (std::f64::consts::E * PI)).ln() - true_neg_entropy(ctx)?;
    Ok(value.max(0.0))
}

fn log_mixture_density(z: Complex64, c: &Constellation, var: f64) -> f64 {
    match c.layout() {
        Layout::Gaussian => {
            let v = c.gamma_bar() + var;
            -(PI * v).ln() - z.norm_sqr() / v
        }
        Layout::Separable { re, im } => axis::log_density(z.re, re, var) + axis::log_density(z.im, im, var),
        Layout::Points => plane::log_density(z, c.points(), var),
    }
}

/// `∫ p ln q` where `p` and `q` are uniform mixtures over the alphabet with
/// component variances `vp` and `vq`.
fn mixture_log_expectation(c: &Constellation, vp: f64, vq: f64, order: usize) -> Result<f64> {
    check_order(order)?;
    Ok(match c.layout() {
        Layout::Gaussian => {
            let sp = c.gamma_bar() + vp;
            let sq = c.gamma_bar() + vq;
            -(PI * sq).ln() - sp / sq
        }
        Layout::Separable { re, im } => {
            let part = |pts: &[f64]| axis::mixture(pts, vp, vq, order, |_, a| axis::log_density(a, pts, vq));
            part(re) + part(im)
        }
        Layout::Points => {
            let pts = c.points();
            plane::mixture(pts, vp, vq, order, |_, z| plane::log_density(z, pts, vq))
        }
    })
}

/// Trapezoid step and reach for one component `CN(x, ·)` whose per-axis
/// standard deviation is `sigma`.
///
/// Each competitor is `(d, margin)`: its distance `d = |x_k − x|` and how far
/// a third point dominates both at their midpoint, `|m − x|² − min_y |m − y|²`.
/// Competition between `x` and `x_k` puts singularities of the integrand at
/// distance `π·v_f/(2·d)` from the real axis near the bisector, where `v_f`
/// is the variance inside the posterior weights. The Gaussian weight at the
/// bisector and the dominance margin damp their effect, so a competitor
/// only limits the step when the damping is below the error target. The
/// target is `e^{-40}` at the default order and tightens in proportion to
/// `order`.
fn spacing(sigma: f64, competitors: &[(f64, f64)], feature_var: f64, order: usize) -> (f64, f64) {
    let scale = order as f64 / DEFAULT_ORDER as f64;
    let target = 40.0 * scale;
    // Aliasing of the Gaussian weight alone: 2π²σ²/h² ≥ 44·scale².
    let mut h = sigma / (1.5 * scale);
    for &(d, margin) in competitors {
        let damping = 0.5 * (0.5 * d / sigma).powi(2) + margin / feature_var;
        if damping < target {
            let pole = PI * feature_var / (2.0 * d);
            h = h.min(2.0 * PI * pole / (target - damping).max(1.0));
        }
    }
    let reach = ((2.0 * target).sqrt() + 1.0) * sigma;
    (h, reach)
}

/// Competitor list for `spacing`, for every alphabet point.
fn competitors<P: Copy + PartialEq>(pts: &[P], dist2: impl Fn(P, P) -> f64, midpoint: impl Fn(P, P) -> P) -> Vec<Vec<(f64, f64)>> {
    pts.iter()
        .map(|&x| {
            pts.iter()
                .filter(|&&y| y != x)
                .map(|&y| {
                    let m = midpoint(x, y);
                    let own = dist2(m, x);
                    let best = pts.iter().map(|&w| dist2(m, w)).fold(f64::INFINITY, f64::min);
                    (dist2(x, y).sqrt(), (own - best).max(0.0))
                })
                .collect()
        })
        .collect()
}

/// One real axis of a separable alphabet. Variances are the complex
/// variances of the full channel, so one axis has density
/// `(π var)^{-1/2} exp(−(a − x)²/var)`.
mod axis {
    use super::*;

    #[inline]
    pub(super) fn log_density(a: f64, pts: &[f64], var: f64) -> f64 {
        let mut max = f64::NEG_INFINITY;
        for &x in pts {
            max = max.max(-(a - x) * (a - x) / var);
        }
        let mut sum = 0.0;
        for &x in pts {
            sum += (-(a - x) * (a - x) / var - max).exp();
        }
        max + (sum / pts.len() as f64).ln() - 0.5 * (PI * var).ln()
    }

    #[inline]
    pub(super) fn posterior_mean(a: f64, pts: &[f64], var: f64) -> f64 {
        let mut max = f64::NEG_INFINITY;
        for &x in pts {
            max = max.max(-(a - x) * (a - x) / var);
        }
        let (mut num, mut den) = (0.0, 0.0);
        for &x in pts {
            let w = (-(a - x) * (a - x) / var - max).exp();
            num += w * x;
            den += w;
        }
        num / den
    }

    pub(super) fn posterior_variance(a: f64, pts: &[f64], var: f64) -> f64 {
        let mut max = f64::NEG_INFINITY;
        for &x in pts {
            max = max.max(-(a - x) * (a - x) / var);
        }
        let m = posterior_mean(a, pts, var);
        let (mut num, mut den) = (0.0, 0.0);
        for &x in pts {
            let w = (-(a - x) * (a - x) / var - max).exp();
            num += w * (x - m) * (x - m);
            den += w;
        }
        num / den
    }

    /// Node layout used by [`mixture`].
    #[cfg_attr(not(test), allow(dead_code))]
    #[derive(Debug, Clone, Copy, PartialEq, Eq)]
    pub(super) enum Rule {
        /// Whichever of the two needs fewer nodes.
        Auto,
        Trapezoid,
        Panels,
    }

    /// `(1/K) Σ_x E_{a ~ N(x, vw/2)} f(x, a)` for an integrand whose
    /// posterior weights use variance `vf`.
    pub(super) fn mixture(pts: &[f64], vw: f64, vf: f64, order: usize, f: impl FnMut(f64, f64) -> f64) -> f64 {
        mixture_with(pts, vw, vf, order, Rule::Auto, f)
    }

    pub(super) fn mixture_with(
        pts: &[f64],
        vw: f64,
        vf: f64,
        order: usize,
        rule: Rule,
        mut f: impl FnMut(f64, f64) -> f64,
    ) -> f64 {
        let sigma = (0.5 * vw).sqrt();
        let comps = competitors(pts, |a, b| (a - b) * (a - b), |a, b| 0.5 * (a + b));
        let layers = boundary_layers(pts, vf);
        let gl = GaussLegendre::cached(panel_nodes(order)).expect("positive panel order");
        let norm = 1.0 / (PI * vw).sqrt();
        let mut total = 0.0;
        for (&x, comp) in pts.iter().zip(&comps) {
            let (h, reach) = spacing(sigma, comp, vf, order);
            let n = (reach / h).ceil() as i64;
            let use_panels = match rule {
                Rule::Trapezoid => false,
                Rule::Panels => true,
                Rule::Auto => {
                    let panels = panel_edges(x, sigma, reach, &layers).len() - 1;
                    (panels * gl.nodes().len()) < (2 * n + 1) as usize
                }
            };
            if use_panels {
                let edges = panel_edges(x, sigma, reach, &layers);
                let mut acc = 0.0;
                for w in edges.windows(2) {
                    acc += gl.integrate(w[0], w[1], |a| (-(a - x) * (a - x) / vw).exp() * f(x, a));
                }
                total += norm * acc;
            } else {
                let mut acc = 0.0;
                for k in -n..=n {
                    let t = k as f64 * h;
                    acc += (-t * t / vw).exp() * f(x, x + t);
                }
                total += norm * h * acc;
            }
        }
        total / pts.len() as f64
    }

    /// Gauss–Legendre nodes per panel.
    fn panel_nodes(order: usize) -> usize {
        (order / 3).max(8)
    }

    /// Decision boundaries between neighbouring points and the width
    /// `vf/(2d)` over which the posterior weights switch across them.
    fn boundary_layers(pts: &[f64], vf: f64) -> Vec<(f64, f64)> {
        let mut sorted = pts.to_vec();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        sorted.windows(2).map(|w| (0.5 * (w[0] + w[1]), vf / (2.0 * (w[1] - w[0])))).collect()
    }

    /// Panel edges on `[x − reach, x + reach]`: panels at most `sigma` wide,
    /// refined geometrically towards every decision boundary so that each
    /// panel is no wider than its distance to the nearest boundary layer.
    fn panel_edges(x: f64, sigma: f64, reach: f64, layers: &[(f64, f64)]) -> Vec<f64> {
        let (lo, hi) = (x - reach, x + reach);
        let count = (2.0 * reach / sigma).ceil().max(1.0) as usize;
        let mut edges: Vec<f64> = (0..=count).map(|i| lo + 2.0 * reach * i as f64 / count as f64).collect();
        for &(m, width) in layers {
            if m < lo - reach || m > hi + reach {
                continue;
            }
            edges.push(m);
            let mut r = width;
            while r < sigma {
                edges.push(m - r);
                edges.push(m + r);
                r *= 2.0;
            }
        }
        edges.retain(|e| (lo..=hi).contains(e));
        edges.sort_by(f64::total_cmp);
        edges.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * reach);
        edges
    }

    /// MMSE of the axis under matched noise `var`.
    pub(super) fn mmse(pts: &[f64], var: f64, order: usize) -> f64 {
        mixture(pts, var, var, order, |x, a| {
            let e = x - posterior_mean(a, pts, var);
            e * e
        })
    }

    /// `E (x + s(a − x) − ⟨x⟩_{vq}(a))²` with `a ~ N(x, vp/2)`.
    pub(super) fn mismatched_mse(pts: &[f64], vp: f64, vq: f64, s: f64, order: usize) -> f64 {
        mixture(pts, vp, vq, order, |x, a| {
            let e = x + s * (a - x) - posterior_mean(a, pts, vq);
            e * e
        })
    }
}

/// General alphabets on the complex plane.
mod plane {
    use super::*;

    pub(super) const PLANE_MAX_HALF_NODES_PER_ORDER: i64 = 8;

    pub(super) fn log_density(z: Complex64, pts: &[Complex64], var: f64) -> f64 {
        let mut max = f64::NEG_INFINITY;
        for &x in pts {
            max = max.max(-(z - x).norm_sqr() / var);
        }
        let mut sum = 0.0;
        for &x in pts {
            sum += (-(z - x).norm_sqr() / var - max).exp();
        }
        max + (sum / pts.len() as f64).ln() - (PI * var).ln()
    }

    pub(super) fn posterior_mean(z: Complex64, pts: &[Complex64], var: f64) -> Complex64 {
        let mut max = f64::NEG_INFINITY;
        for &x in pts {
            max = max.max(-(z - x).norm_sqr() / var);
        }
        let mut num = Complex64::new(0.0, 0.0);
        let mut den = 0.0;
        for &x in pts {
            let w = (-(z - x).norm_sqr() / var - max).exp();
            num += x * w;
            den += w;
        }
        num / den
    }

    pub(super) fn posterior_variance(z: Complex64, pts: &[Complex64], var: f64) -> f64 {
        let mut max = f64::NEG_INFINITY;
        for &x in pts {
            max = max.max(-(z - x).norm_sqr() / var);
        }
        let m = posterior_mean(z, pts, var);
        let (mut num, mut den) = (0.0, 0.0);
        for &x in pts {
            let w = (-(z - x).norm_sqr() / var - max).exp();
            num += w * (x - m).norm_sqr();
            den += w;
        }
        num / den
    }

    /// Plane analogue of the axis mixture, on a square lattice clipped to a
    /// disc.
    ///
    /// Every integrand passed here is invariant under isometries of the
    /// plane that fix the origin and map the alphabet onto itself. Points in
    /// one orbit of the alphabet's rotation group therefore contribute
    /// equally and only one per orbit is integrated; when the alphabet is
    /// also symmetric about the line through the origin and that point, only
    /// half of its lattice is visited.
    pub(super) fn mixture(
        pts: &[Complex64],
        vw: f64,
        vf: f64,
        order: usize,
        mut f: impl FnMut(Complex64, Complex64) -> f64,
    ) -> f64 {
        let sigma = (0.5 * vw).sqrt();
        let comps = competitors(pts, |a, b| (a - b).norm_sqr(), |a, b| (a + b) * 0.5);
        let mut total = 0.0;
        for (rep, weight) in orbits(pts) {
            let (x, comp) = (pts[rep], &comps[rep]);
            let (h, reach) = spacing(sigma, comp, vf, order);
            // The lattice is capped; when the postulated noise is far below
            // the true noise, boundary layers are thinner than the step and
            // accuracy degrades to that of a plain grid.
            let n = ((reach / h).ceil() as i64).min(PLANE_MAX_HALF_NODES_PER_ORDER * order as i64);
            let h = reach / n as f64;
            let r2_max = reach * reach;
            let norm = h * h / (PI * vw);
            // Lattice axes along and across the direction of `x`.
            let u = if x.norm() > 0.0 { x / x.norm() } else { Complex64::new(1.0, 0.0) };
            let mirrored = is_symmetric(pts, u * u);
            let j_min = if mirrored { 0 } else { -n };
            let mut acc = 0.0;
            for i in -n..=n {
                let tr = i as f64 * h;
                let wr = (-tr * tr / vw).exp();
                for j in j_min..=n {
                    let ti = j as f64 * h;
                    if tr * tr + ti * ti > r2_max {
                        continue;
                    }
                    let fold = if mirrored && j > 0 { 2.0 } else { 1.0 };
                    acc += fold * wr * (-ti * ti / vw).exp() * f(x, x + u * Complex64::new(tr, ti));
                }
            }
            total += weight as f64 * norm * acc;
        }
        total / pts.len() as f64
    }

    fn contains(pts: &[Complex64], z: Complex64) -> bool {
        let scale = pts.iter().map(|p| p.norm()).fold(0.0, f64::max);
        pts.iter().any(|p| (p - z).norm() <= 1e-9 * scale.max(f64::MIN_POSITIVE))
    }

    /// Whether the reflection `p ↦ r·p̄` (`|r| = 1`) maps the alphabet onto
    /// itself.
    fn is_symmetric(pts: &[Complex64], r: Complex64) -> bool {
        pts.iter().all(|p| contains(pts, r * p.conj()))
    }

    /// One representative per orbit of the largest rotation group
    /// `{e^{2πik/K}}` that maps the alphabet onto itself, with orbit sizes.
    pub(super) fn orbits(pts: &[Complex64]) -> Vec<(usize, usize)> {
        let order = (2..=pts.len())
            .rev()
            .find(|&k| {
                let r = Complex64::from_polar(1.0, 2.0 * PI / k as f64);
                pts.iter().all(|p| contains(pts, r * p))
            })
            .unwrap_or(1);
        let r = Complex64::from_polar(1.0, 2.0 * PI / order as f64);
        let mut seen = vec![false; pts.len()];
        let mut out = Vec::new();
        for i in 0..pts.len() {
            if seen[i] {
                continue;
            }
            let mut size = 0;
            let mut z = pts[i];
            for _ in 0..order {
                if let Some(j) = (0..pts.len()).find(|&j| !seen[j] && (pts[j] - z).norm() <= 1e-9 * z.norm().max(1e-300)) {
                    seen[j] = true;
                    size += 1;
                }
                z *= r;
            }
            // The origin is its own orbit.
            if size == 0 {
                seen[i] = true;
                size = 1;
            }
            out.push((i, size));
        }
        out
    }

    pub(super) fn mismatched_mse(pts: &[Complex64], vp: f64, vq: f64, s: f64, order: usize) -> f64 {
        mixture(pts, vp, vq, order, |x, z| (x + (z - x) * s - posterior_mean(z, pts, vq)).norm_sqr())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ConstellationKind;
    use crate::numerics::gaussian_expectation;
    use approx::assert_relative_eq;

    fn qpsk(g: f64) -> Constellation {
        Constellation::new(ConstellationKind::Qpsk, g).unwrap()
    }

    fn gauss(g: f64) -> Constellation {
        Constellation::new(ConstellationKind::Gaussian, g).unwrap()
    }

    /// Same alphabet forced through the plane path.
    fn as_points(c: &Constellation) -> Constellation {
        // A tiny rotation breaks separability without changing any rotation-
        // invariant quantity.
        let rot = Complex64::from_polar(1.0, 0.123);
        Constellation::custom(c.points().iter().map(|p| p * rot).collect(), c.gamma_bar()).unwrap()
    }

    #[test]
    fn posterior_mean_point_mass() {
        let c = Constellation::point_mass(Complex64::new(0.3, -0.7));
        let ctx = DecoupledPostulated::new(2.0, &c).unwrap();
        for z in [Complex64::new(5.0, 5.0), Complex64::new(-1.0, 0.2)] {
            assert!((posterior_mean(z, &ctx) - Complex64::new(0.3, -0.7)).norm() < 1e-15);
        }
    }

    #[test]
    fn posterior_mean_bpsk_tanh() {
        let g = 2.5;
        let c = Constellation::new(ConstellationKind::Bpsk, g).unwrap();
        let xi = 0.8;
        let ctx = DecoupledPostulated::new(xi, &c).unwrap();
        let a = g.sqrt();
        for zr in [-2.0, -0.3, 0.0, 0.1, 1.7, 40.0] {
            let z = Complex64::new(zr, 0.4);
            // Direct weights g(z | ±a; 1/ξ).
            let wp = (-xi * (z - a).norm_sqr()).exp();
            let wm = (-xi * (z + a).norm_sqr()).exp();
            let direct = if wp + wm > 0.0 { a * (wp - wm) / (wp + wm) } else { a };
            let closed = a * (2.0 * xi * a * zr).tanh();
            let pm = posterior_mean(z, &ctx);
            assert_relative_eq!(pm.re, closed, epsilon = 1e-14, max_relative = 1e-12);
            assert_relative_eq!(pm.re, direct, epsilon = 1e-14, max_relative = 1e-12);
            assert_eq!(pm.im, 0.0);
        }
    }

    #[test]
    fn posterior_mean_gaussian_shrinkage() {
        let c = gauss(1.0);
        let ctx = DecoupledPostulated::new(1.0, &c).unwrap();
        let pm = posterior_mean(Complex64::new(1.0, 1.0), &ctx);
        assert!((pm - Complex64::new(0.5, 0.5)).norm() < 1e-15);
    }

    #[test]
    fn posterior_mean_survives_underflow() {
        let c = qpsk(1.0);
        let ctx = DecoupledPostulated::new(1e6, &c).unwrap();
        let pm = posterior_mean(Complex64::new(30.0, -30.0), &ctx);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((pm - Complex64::new(s, -s)).norm() < 1e-12);
    }

    #[test]
    fn postulated_marginal_values() {
        let c = qpsk(1.0);
        let ctx = DecoupledPostulated::new(1.0, &c).unwrap();
        let q0 = postulated_marginal(Complex64::new(0.0, 0.0), &ctx);
        assert_relative_eq!(q0, (-1.0f64).exp() / PI, max_relative = 1e-14);
        assert_relative_eq!(q0, 0.117_099_663_048_6, max_relative = 1e-10);

        let g = gauss(1.0);
        let ctx = DecoupledPostulated::new(1.0, &g).unwrap();
        assert_relative_eq!(postulated_marginal(Complex64::new(0.0, 0.0), &ctx), 0.5 / PI, max_relative = 1e-14);
    }

    #[test]
    fn marginals_integrate_to_one() {
        // Midpoint sum over a box holding all but ~e^-40 of the mass.
        let total = |dens: &dyn Fn(Complex64) -> f64| {
            let (l, steps) = (7.0, 700);
            let h = 2.0 * l / steps as f64;
            let mut acc = 0.0;
            for i in 0..steps {
                for j in 0..steps {
                    let z = Complex64::new(-l + (i as f64 + 0.5) * h, -l + (j as f64 + 0.5) * h);
                    acc += dens(z);
                }
            }
            acc * h * h
        };
        for kind in [ConstellationKind::Qpsk, ConstellationKind::Psk8, ConstellationKind::Qam16] {
            let c = Constellation::new(kind, 1.0).unwrap();
            let post = DecoupledPostulated::new(3.0, &c).unwrap();
            let tru = DecoupledTrue::new(2.0, 0.3, &c).unwrap();
            assert_relative_eq!(total(&|z| postulated_marginal(z, &post)), 1.0, max_relative = 1e-10);
            assert_relative_eq!(total(&|z| true_marginal(z, &tru)), 1.0, max_relative = 1e-10);
        }
    }

    #[test]
    fn true_marginal_values() {
        let c = qpsk(1.0);
        let tru = DecoupledTrue::new(1.0, 1.0, &c).unwrap();
        let p0 = true_marginal(Complex64::new(0.0, 0.0), &tru);
        assert_relative_eq!(p0, (-0.5f64).exp() / (2.0 * PI), max_relative = 1e-14);
        assert_relative_eq!(p0, 0.096_532_352_630, max_relative = 1e-9);

        let tru0 = DecoupledTrue::new(1.7, 0.0, &c).unwrap();
        let post = DecoupledPostulated::new(1.7, &c).unwrap();
        let z = Complex64::new(0.2, -0.9);
        assert_eq!(true_marginal(z, &tru0), postulated_marginal(z, &post));
    }

    #[test]
    fn postulated_mmse_limits() {
        let c = qpsk(1.0);
        let low = postulated_mmse(&DecoupledPostulated::new(1e-9, &c).unwrap()).unwrap();
        assert_relative_eq!(low, 1.0, max_relative = 1e-6);
        let high = postulated_mmse(&DecoupledPostulated::new(1e6, &c).unwrap()).unwrap();
        assert!(high < 1e-4);
        let g = gauss(1.0);
        let v = postulated_mmse(&DecoupledPostulated::new(1.0, &g).unwrap()).unwrap();
        assert_relative_eq!(v, 0.5, max_relative = 1e-15);
    }

    #[test]
    fn postulated_mmse_is_monotone_and_bounded() {
        for kind in [ConstellationKind::Bpsk, ConstellationKind::Qpsk, ConstellationKind::Psk8, ConstellationKind::Qam64] {
            let c = Constellation::new(kind, 2.0).unwrap();
            let mut prev = f64::INFINITY;
            for k in 0..=24 {
                let xi = 10f64.powf(-3.0 + 0.25 * k as f64);
                let m = postulated_mmse(&DecoupledPostulated::new(xi, &c).unwrap()).unwrap();
                assert!((0.0..=2.0).contains(&m));
                assert!(m <= prev + 1e-12, "{kind}: mmse rose at xi={xi}");
                prev = m;
            }
        }
    }

    #[test]
    fn separable_and_plane_paths_agree() {
        for kind in [ConstellationKind::Qpsk, ConstellationKind::Qam16] {
            let c = Constellation::new(kind, 1.3).unwrap();
            let p = as_points(&c);
            assert!(matches!(p.layout(), Layout::Points));
            for &(eta, xi, rv) in &[(0.5, 0.7, 0.0), (4.0, 2.0, 0.3), (8.0, 12.0, 0.05)] {
                let (ts, tp) = (DecoupledTrue::new(eta, rv, &c).unwrap(), DecoupledTrue::new(eta, rv, &p).unwrap());
                let (qs, qp) = (DecoupledPostulated::new(xi, &c).unwrap(), DecoupledPostulated::new(xi, &p).unwrap());
                let pairs = [
                    (postulated_mmse(&qs).unwrap(), postulated_mmse(&qp).unwrap()),
                    (true_mse(&ts, &qs).unwrap(), true_mse(&tp, &qp).unwrap()),
                    (cross_entropy(&ts, &qs).unwrap(), cross_entropy(&tp, &qp).unwrap()),
                    (matched_second_moment(&ts).unwrap(), matched_second_moment(&tp).unwrap()),
                    (matched_scalar_mi(&ts).unwrap(), matched_scalar_mi(&tp).unwrap()),
                    (matched_mmse(&ts).unwrap(), matched_mmse(&tp).unwrap()),
                    (postulated_variance(&ts, &qs).unwrap(), postulated_variance(&tp, &qp).unwrap()),
                ];
                for (i, (a, b)) in pairs.iter().enumerate() {
                    assert_relative_eq!(*a, *b, epsilon = 1e-10, max_relative = 1e-8);
                    let _ = i;
                }
            }
        }
    }

    #[test]
    fn true_mse_matched_degeneracy() {
        for c in [qpsk(1.0), Constellation::new(ConstellationKind::Psk8, 1.0).unwrap(), gauss(1.0)] {
            for eta in [0.3, 1.0, 7.0] {
                let t = DecoupledTrue::new(eta, 0.0, &c).unwrap();
                let q = DecoupledPostulated::new(eta, &c).unwrap();
                assert_relative_eq!(true_mse(&t, &q).unwrap(), postulated_mmse(&q).unwrap(), max_relative = 1e-12);
            }
        }
        let g = gauss(1.0);
        let t = DecoupledTrue::new(1.0, 0.0, &g).unwrap();
        let q = DecoupledPostulated::new(1.0, &g).unwrap();
        assert_relative_eq!(true_mse(&t, &q).unwrap(), 0.5, max_relative = 1e-15);
    }

    #[test]
    fn true_mse_against_scalar_monte_carlo() {
        use rand::{Rng, SeedableRng};
        use rand_distr::StandardNormal;
        let c = qpsk(1.0);
        let (eta, xi, rv) = (2.0, 1.0, 0.1);
        let t = DecoupledTrue::new(eta, rv, &c).unwrap();
        let q = DecoupledPostulated::new(xi, &c).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut cn = |var: f64| {
            let s = (0.5 * var).sqrt();
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(s * re, s * im)
        };
        let n = 1_000_000;
        let (mut sum, mut sum2) = (0.0, 0.0);
        let mut pick = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        for _ in 0..n {
            let x = c.points()[pick.random_range(0..4)];
            let v = cn(rv);
            let z = x + v + cn(1.0 / eta);
            let e = (v + x - posterior_mean(z, &q)).norm_sqr();
            sum += e;
            sum2 += e * e;
        }
        let mean = sum / n as f64;
        let stderr = ((sum2 / n as f64 - mean * mean) / n as f64).sqrt();
        let quad = true_mse(&t, &q).unwrap();
        assert!((quad - mean).abs() < 3.0 * stderr, "{quad} vs {mean} ± {stderr}");
    }

    #[test]
    fn postulated_variance_reduces_to_mmse_when_channels_coincide() {
        for c in [qpsk(1.0), Constellation::new(ConstellationKind::Qam16, 2.0).unwrap(), Constellation::new(ConstellationKind::Psk8, 1.0).unwrap()] {
            for xi in [0.2, 1.0, 9.0] {
                let t = DecoupledTrue::new(xi, 0.0, &c).unwrap();
                let q = DecoupledPostulated::new(xi, &c).unwrap();
                assert_relative_eq!(postulated_variance(&t, &q).unwrap(), postulated_mmse(&q).unwrap(), max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn postulated_variance_gaussian_closed_form() {
        let g = gauss(1.7);
        let q = DecoupledPostulated::new(0.6, &g).unwrap();
        for (eta, rv) in [(0.3, 0.0), (4.0, 0.2)] {
            let t = DecoupledTrue::new(eta, rv, &g).unwrap();
            assert_relative_eq!(postulated_variance(&t, &q).unwrap(), 1.7 / (1.0 + 0.6 * 1.7), max_relative = 1e-14);
        }
    }

    #[test]
    fn postulated_variance_against_scalar_monte_carlo() {
        use rand::{Rng, SeedableRng};
        use rand_distr::StandardNormal;
        let c = qpsk(1.0);
        let (eta, xi, rv) = (3.0, 1.2, 0.15);
        let t = DecoupledTrue::new(eta, rv, &c).unwrap();
        let q = DecoupledPostulated::new(xi, &c).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let n = 400_000;
        let (mut sum, mut sum2) = (0.0, 0.0);
        for _ in 0..n {
            let x = c.points()[rng.random_range(0..4)];
            let s = (0.5 * (rv + 1.0 / eta)).sqrt();
            let (a, b): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
            let z = x + Complex64::new(s * a, s * b);
            // Constant-modulus alphabet: Var = |x|² − |⟨x̃⟩|².
            let e = 1.0 - posterior_mean(z, &q).norm_sqr();
            sum += e;
            sum2 += e * e;
        }
        let mean = sum / n as f64;
        let stderr = ((sum2 / n as f64 - mean * mean) / n as f64).sqrt();
        let quad = postulated_variance(&t, &q).unwrap();
        assert!((quad - mean).abs() < 3.0 * stderr, "{quad} vs {mean} ± {stderr}");
    }

    #[test]
    fn plane_orbits_follow_alphabet_symmetry() {
        let psk = Constellation::new(ConstellationKind::Psk8, 1.0).unwrap();
        assert_eq!(plane::orbits(psk.points()), vec![(0, 8)]);
        let q16 = as_points(&Constellation::new(ConstellationKind::Qam16, 1.0).unwrap());
        let o = plane::orbits(q16.points());
        assert_eq!(o.len(), 4);
        assert!(o.iter().all(|&(_, n)| n == 4));
        let lopsided = [Complex64::new(1.0, 0.0), Complex64::new(-0.5, 0.2), Complex64::new(0.1, -1.3)];
        assert_eq!(plane::orbits(&lopsided).len(), 3);
    }

    #[test]
    fn plane_symmetry_reduction_is_exact() {
        // A nearly symmetric alphabet gets no reduction; its integrals must
        // approach those of the exactly symmetric one.
        let psk = Constellation::new(ConstellationKind::Psk8, 1.0).unwrap();
        let mut pts = psk.points().to_vec();
        pts[3] *= Complex64::from_polar(1.0, 1e-6);
        let bent = Constellation::custom(pts, 1.0).unwrap();
        assert_eq!(plane::orbits(bent.points()).len(), 8);
        let (t, tb) = (DecoupledTrue::new(3.0, 0.1, &psk).unwrap(), DecoupledTrue::new(3.0, 0.1, &bent).unwrap());
        let (q, qb) = (DecoupledPostulated::new(2.0, &psk).unwrap(), DecoupledPostulated::new(2.0, &bent).unwrap());
        assert_relative_eq!(true_mse(&t, &q).unwrap(), true_mse(&tb, &qb).unwrap(), max_relative = 1e-5);
        assert_relative_eq!(cross_entropy(&t, &q).unwrap(), cross_entropy(&tb, &qb).unwrap(), max_relative = 1e-5);
    }

    #[test]
    fn gaussian_true_mse_matches_shrinkage_derivation() {
        // ⟨x̃⟩ = b z with z = x + u: E|x + v − bz|² over independent x, v, n.
        let g = gauss(2.0);
        let (eta, xi, rv): (f64, f64, f64) = (0.7, 1.9, 0.45);
        let b = xi * 2.0 / (1.0 + xi * 2.0);
        let direct = (1.0 - b).powi(2) * (2.0 + rv) + b * b / eta;
        let t = DecoupledTrue::new(eta, rv, &g).unwrap();
        let q = DecoupledPostulated::new(xi, &g).unwrap();
        assert_relative_eq!(true_mse(&t, &q).unwrap(), direct, max_relative = 1e-13);
    }

    #[test]
    fn mismatch_costs_mse() {
        let c = Constellation::new(ConstellationKind::Qam16, 1.0).unwrap();
        for &(eta, xi, rv) in &[(1.0, 3.0, 0.1), (5.0, 0.5, 0.2), (30.0, 10.0, 0.01), (2.0, 2.0, 0.5)] {
            let t = DecoupledTrue::new(eta, rv, &c).unwrap();
            let q = DecoupledPostulated::new(xi, &c).unwrap();
            // The best estimate of χ = x + v given z lower-bounds any estimator's error.
            assert!(true_mse(&t, &q).unwrap() >= matched_mmse(&t).unwrap() - 1e-12);
        }
    }

    #[test]
    fn cross_entropy_gaussian_closed_form() {
        let g = gauss(1.5);
        let (eta, xi, rv) = (0.8, 2.0, 0.3);
        let t = DecoupledTrue::new(eta, rv, &g).unwrap();
        let q = DecoupledPostulated::new(xi, &g).unwrap();
        let sp = 1.0 / eta + 1.5 + rv;
        let sq = 1.0 / xi + 1.5;
        let closed = -(PI * sq).ln() - sp / sq;
        assert_relative_eq!(cross_entropy(&t, &q).unwrap(), closed, max_relative = 1e-14);
        // Same identity through plane quadrature of ln q against p.
        let quad = gaussian_expectation(|z| -(PI * sq).ln() - z.norm_sqr() / sq, Complex64::new(0.0, 0.0), sp, 48).unwrap();
        assert_relative_eq!(quad, closed, max_relative = 1e-12);
    }

    #[test]
    fn gibbs_inequality() {
        for kind in [ConstellationKind::Qpsk, ConstellationKind::Psk8, ConstellationKind::Qam64, ConstellationKind::Gaussian] {
            let c = Constellation::new(kind, 1.0).unwrap();
            for &(eta, xi, rv) in &[(1.0, 3.0, 0.1), (5.0, 0.5, 0.2), (40.0, 10.0, 0.0)] {
                let t = DecoupledTrue::new(eta, rv, &c).unwrap();
                let q = DecoupledPostulated::new(xi, &c).unwrap();
                assert!(cross_entropy(&t, &q).unwrap() <= true_neg_entropy(&t).unwrap() + 1e-12);
            }
            // p = q: cross entropy is the negative entropy.
            let t = DecoupledTrue::new(2.0, 0.0, &c).unwrap();
            let q = DecoupledPostulated::new(2.0, &c).unwrap();
            assert_relative_eq!(cross_entropy(&t, &q).unwrap(), postulated_neg_entropy(&q).unwrap(), max_relative = 1e-14);
        }
    }

    #[test]
    fn matched_posterior_mean_reductions() {
        let c = qpsk(1.0);
        let t = DecoupledTrue::new(1.3, 0.0, &c).unwrap();
        let q = DecoupledPostulated::new(1.3, &c).unwrap();
        let z = Complex64::new(0.4, -0.1);
        assert!((matched_posterior_mean(z, &t) - posterior_mean(z, &q)).norm() < 1e-15);

        let zero = Constellation::point_mass(Complex64::new(0.0, 0.0));
        let t = DecoupledTrue::new(1.0, 1.0, &zero).unwrap();
        assert!((matched_posterior_mean(z, &t) - z / 2.0).norm() < 1e-15);
    }

    #[test]
    fn matched_posterior_mean_against_bayes_quadrature() {
        // ⟨χ⟩ = Σ_x ∫ (x + v) g(z | x + v; 1/η) g(v | 0; r_v) dv / Σ_x ∫ g(z | x + v; 1/η) g(v | 0; r_v) dv.
        let c = qpsk(1.0);
        let (eta, rv) = (1.0, 0.5);
        let t = DecoupledTrue::new(eta, rv, &c).unwrap();
        let z = Complex64::new(1.0, 0.0);
        let mut num = Complex64::new(0.0, 0.0);
        let mut den = 0.0;
        for &x in c.points() {
            let lik = |v: Complex64| eta / PI * (-eta * (z - x - v).norm_sqr()).exp();
            den += gaussian_expectation(lik, Complex64::new(0.0, 0.0), rv, 64).unwrap();
            num += gaussian_expectation(|v| (x + v) * lik(v), Complex64::new(0.0, 0.0), rv, 64).unwrap();
        }
        let oracle = num / den;
        assert!((matched_posterior_mean(z, &t) - oracle).norm() < 1e-12);
    }

    #[test]
    fn matched_second_moment_limits() {
        let c = qpsk(1.0);
        let lo = matched_second_moment(&DecoupledTrue::new(1e-9, 0.0, &c).unwrap()).unwrap();
        assert!(lo < 1e-8);
        let hi = matched_second_moment(&DecoupledTrue::new(1e6, 0.0, &c).unwrap()).unwrap();
        assert_relative_eq!(hi, 1.0, max_relative = 1e-6);

        let g = gauss(1.2);
        let (eta, rv) = (0.9, 0.4);
        let t = DecoupledTrue::new(eta, rv, &g).unwrap();
        let total: f64 = 1.2 + rv;
        let closed = total * total * eta / (1.0 + eta * total);
        assert_relative_eq!(matched_second_moment(&t).unwrap(), closed, max_relative = 1e-14);
        // Consistent with the Gaussian MMSE.
        assert_relative_eq!(total - closed, matched_mmse(&t).unwrap(), max_relative = 1e-13);
        // Quadrature cross-check of E|⟨χ⟩|² with the linear estimator.
        let k = eta * total / (1.0 + eta * total);
        let quad = gaussian_expectation(|z| (z * k).norm_sqr(), Complex64::new(0.0, 0.0), total + 1.0 / eta, 48).unwrap();
        assert_relative_eq!(quad, closed, max_relative = 1e-12);
    }

    #[test]
    fn matched_mmse_equals_power_minus_second_moment() {
        for kind in [ConstellationKind::Qpsk, ConstellationKind::Psk8, ConstellationKind::Qam16] {
            let c = Constellation::new(kind, 1.0).unwrap();
            for &(eta, rv) in &[(0.5, 0.0), (3.0, 0.2), (25.0, 0.01)] {
                let t = DecoupledTrue::new(eta, rv, &c).unwrap();
                let a = matched_mmse(&t).unwrap();
                let b = 1.0 + rv - matched_second_moment(&t).unwrap();
                assert_relative_eq!(a, b, epsilon = 1e-12, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn matched_scalar_mi_values() {
        let g = gauss(1.0);
        let t = DecoupledTrue::new(1.0, 0.0, &g).unwrap();
        assert_relative_eq!(matched_scalar_mi(&t).unwrap(), 2f64.ln(), max_relative = 1e-15);

        for kind in [ConstellationKind::Qpsk, ConstellationKind::Gaussian, ConstellationKind::Psk8] {
            let c = Constellation::new(kind, 1.0).unwrap();
            let t = DecoupledTrue::new(1e-9, 0.0, &c).unwrap();
            assert!(matched_scalar_mi(&t).unwrap() < 1e-8);
        }

        let c = qpsk(1.0);
        let t = DecoupledTrue::new(100.0, 0.0, &c).unwrap();
        assert_relative_eq!(matched_scalar_mi(&t).unwrap(), 4f64.ln(), max_relative = 1e-6);
    }

    #[test]
    fn scalar_mi_bounded_by_alphabet_entropy() {
        for kind in [ConstellationKind::Bpsk, ConstellationKind::Qpsk, ConstellationKind::Psk8, ConstellationKind::Qam16, ConstellationKind::Qam64] {
            let c = Constellation::new(kind, 1.0).unwrap();
            let k = c.points().len() as f64;
            for eta in [1e-3, 0.1, 1.0, 10.0, 1e3] {
                let mi = matched_scalar_mi(&DecoupledTrue::new(eta, 0.0, &c).unwrap()).unwrap();
                assert!(mi >= 0.0 && mi <= k.ln() + 1e-9, "{kind} eta={eta}: {mi}");
            }
        }
    }

    #[test]
    fn quadrature_order_convergence() {
        // Doubling the resolution changes each integral by < 1e-8 relative;
        // values under 1e-14·γ̄ are rounding noise and compared absolutely.
        for kind in [ConstellationKind::Bpsk, ConstellationKind::Qpsk, ConstellationKind::Psk8, ConstellationKind::Qam16, ConstellationKind::Qam64] {
            let c = Constellation::new(kind, 1.0).unwrap();
            for k in 0..=6 {
                let s = 10f64.powi(k - 3);
                let q48 = DecoupledPostulated::new(s, &c).unwrap();
                let q96 = q48.with_order(96);
                let t48 = DecoupledTrue::new(s, 0.05, &c).unwrap();
                let t96 = t48.with_order(96);
                let m48 = DecoupledPostulated::new(2.0 * s, &c).unwrap();
                let mut pairs = vec![
                    (postulated_mmse(&q48).unwrap(), postulated_mmse(&q96).unwrap()),
                    (postulated_neg_entropy(&q48).unwrap(), postulated_neg_entropy(&q96).unwrap()),
                    (matched_mmse(&t48).unwrap(), matched_mmse(&t96).unwrap()),
                    (true_neg_entropy(&t48).unwrap(), true_neg_entropy(&t96).unwrap()),
                ];
                // Mismatched noise levels on the plane path hit the lattice cap.
                if kind != ConstellationKind::Psk8 {
                    pairs.push((true_mse(&t48, &m48).unwrap(), true_mse(&t96, &m48).unwrap()));
                    pairs.push((cross_entropy(&t48, &m48).unwrap(), cross_entropy(&t96, &m48).unwrap()));
                }
                for (a, b) in pairs {
                    let scale = a.abs().max(b.abs());
                    assert!((a - b).abs() <= 1e-8 * scale + 1e-14, "{kind} s={s}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn axis_rules_agree_on_thin_boundary_layers() {
        let pts: Vec<f64> = (0..8).map(|k| (2 * k - 7) as f64 / 42f64.sqrt()).collect();
        for &(vw, vf) in &[(0.05, 0.05), (0.5, 0.01), (2.0, 1e-3), (0.3, 1e-4)] {
            let mse = |x: f64, a: f64| {
                let e = x + 0.1 * (a - x) - axis::posterior_mean(a, &pts, vf);
                e * e
            };
            let ce = |_: f64, a: f64| axis::log_density(a, &pts, vf);
            let run = |rule, order, f: &dyn Fn(f64, f64) -> f64| axis::mixture_with(&pts, vw, vf, order, rule, f);
            for f in [&mse as &dyn Fn(f64, f64) -> f64, &ce] {
                let trap = run(axis::Rule::Trapezoid, 48, f);
                let panels = run(axis::Rule::Panels, 48, f);
                let fine = run(axis::Rule::Panels, 96, f);
                assert!((trap - panels).abs() <= 1e-10 * trap.abs().max(1e-3), "vw={vw} vf={vf}: {trap} vs {panels}");
                assert!((fine - panels).abs() <= 1e-10 * fine.abs().max(1e-3), "vw={vw} vf={vf}: {fine} vs {panels}");
            }
        }
    }
}
