//! Damped fixed-point iteration for the self-consistent replica equations.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointOptions {
    /// Weight `β` of the new iterate in `x ← (1−β)x + βF(x)`.
    pub damping: f64,
    /// Stop when `max|F(x) − x| ≤ tol`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self {
            damping: 0.5,
            tol: 1e-10,
            max_iter: 500,
        }
    }
}

impl FixedPointOptions {
    fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "damping must lie in (0, 1], got {}",
                self.damping
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointResult {
    pub solution: Vec<f64>,
    /// Number of map evaluations.
    pub iterations: usize,
    /// `max|F(x) − x|` at `solution`.
    pub residual: f64,
    pub converged: bool,
    /// Set by callers that rank competing solutions.
    pub free_energy: Option<f64>,
}

/// Iterates `x ← max(0, (1−β)x + βF(x))` from `x0`.
///
/// All components are variances or inverse variances and are kept
/// nonnegative. Returns `converged = false` when `max_iter` is exhausted;
/// a non-finite map output is an error.
pub fn damped_fixed_point<F>(mut map: F, x0: &[f64], opts: &FixedPointOptions) -> Result<FixedPointResult>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    opts.validate()?;
    let beta = opts.damping;
    let mut x = x0.to_vec();
    let mut residual = f64::INFINITY;
    for it in 1..=opts.max_iter {
        let fx = map(&x)?;
        debug_assert_eq!(fx.len(), x.len());
        if let Some(&bad) = fx.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "damped fixed-point map",
                iteration: it,
                value: bad,
            });
        }
        residual = x
            .iter()
            .zip(&fx)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if residual <= opts.tol {
            return Ok(FixedPointResult {
                solution: x,
                iterations: it,
                residual,
                converged: true,
                free_energy: None,
            });
        }
        for (xi, fi) in x.iter_mut().zip(&fx) {
            *xi = ((1.0 - beta) * *xi + beta * fi).max(0.0);
        }
    }
    Ok(FixedPointResult {
        solution: x,
        iterations: opts.max_iter,
        residual,
        converged: false,
        free_energy: None,
    })
}

/// Scalar fixed point of a nonnegative map, seeded at `x0`.
///
/// Takes damped steps `x ← x + β(F(x) − x)` and after each one tries a
/// secant extrapolation of `F(x) − x` in the direction of motion (at most
/// eight steps ahead). A sign change of `F(x) − x` between consecutive
/// points is refined with Brent's method, so the result is the first root
/// met from `x0` unless the extrapolation skips an odd number of roots.
/// If `max_iter` steps do not converge, the root is bracketed in the
/// direction of motion and refined.
pub fn scalar_fixed_point<F>(mut map: F, x0: f64, opts: &FixedPointOptions) -> Result<FixedPointResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    opts.validate()?;
    let mut evals = 0usize;
    let mut g = |x: f64, evals: &mut usize| -> Result<f64> {
        *evals += 1;
        let fx = map(x)?;
        if !fx.is_finite() {
            return Err(Error::NonFinite {
                context: "scalar fixed-point map",
                iteration: *evals,
                value: fx,
            });
        }
        Ok(fx - x)
    };
    let done = |x: f64, gx: f64, evals: usize, tol: f64| FixedPointResult {
        solution: vec![x],
        iterations: evals,
        residual: gx.abs(),
        converged: gx.abs() <= tol,
        free_energy: None,
    };

    let mut x = x0.max(0.0);
    let mut gx = g(x, &mut evals)?;
    for _ in 0..opts.max_iter {
        if gx.abs() <= opts.tol {
            return Ok(done(x, gx, evals, opts.tol));
        }
        let x1 = (x + opts.damping * gx).max(0.0);
        if x1 == x {
            break;
        }
        let g1 = g(x1, &mut evals)?;
        if g1.abs() <= opts.tol {
            return Ok(done(x1, g1, evals, opts.tol));
        }
        if (g1 > 0.0) != (gx > 0.0) {
            let (root, g_root) = brent(&mut |t| g(t, &mut evals), x, x1, gx, g1, opts.tol, 400)?;
            return Ok(done(root, g_root, evals, opts.tol));
        }
        let step = x1 - x;
        if g1 != gx {
            let ahead = -g1 * step / (g1 - gx);
            if ahead.is_finite() && ahead * step > 0.0 {
                let xs = (x1 + ahead.clamp(-8.0 * step.abs(), 8.0 * step.abs())).max(0.0);
                if xs != x1 {
                    let gs = g(xs, &mut evals)?;
                    if gs.abs() <= opts.tol {
                        return Ok(done(xs, gs, evals, opts.tol));
                    }
                    if (gs > 0.0) != (g1 > 0.0) {
                        let (root, g_root) = brent(&mut |t| g(t, &mut evals), x1, xs, g1, gs, opts.tol, 400)?;
                        return Ok(done(root, g_root, evals, opts.tol));
                    }
                    if gs.abs() < g1.abs() {
                        x = xs;
                        gx = gs;
                        continue;
                    }
                }
            }
        }
        x = x1;
        gx = g1;
    }

    let start = x;
    let g_start = gx;
    if g_start.abs() <= opts.tol {
        return Ok(done(start, g_start, evals, opts.tol));
    }

    // F ≥ 0 gives g(0) ≥ 0, so a downward search always brackets.
    let (mut lo, mut hi, mut g_lo, mut g_hi);
    if g_start > 0.0 {
        lo = start;
        g_lo = g_start;
        let mut step = start.abs().max(1e-12);
        loop {
            hi = lo + step;
            g_hi = g(hi, &mut evals)?;
            if g_hi <= 0.0 {
                break;
            }
            lo = hi;
            g_lo = g_hi;
            step *= 2.0;
            if !hi.is_finite() || step > 1e300 {
                return Err(Error::NotConverged {
                    context: "scalar fixed-point bracketing",
                    iterations: evals,
                    residual: g_hi.abs(),
                });
            }
        }
    } else {
        hi = start;
        g_hi = g_start;
        loop {
            lo = 0.5 * hi;
            if lo < 1e-300 {
                lo = 0.0;
            }
            g_lo = g(lo, &mut evals)?;
            if g_lo >= 0.0 {
                break;
            }
            hi = lo;
            g_hi = g_lo;
        }
    }

    let (root, g_root) = brent(&mut |x| g(x, &mut evals), lo, hi, g_lo, g_hi, opts.tol, 400)?;
    Ok(FixedPointResult {
        solution: vec![root],
        iterations: evals,
        residual: g_root.abs(),
        converged: g_root.abs() <= opts.tol,
        free_energy: None,
    })
}

/// Brent's method on a sign-changing bracket. Stops when `|g| ≤ ftol` or the
/// bracket collapses to floating-point resolution; returns the best point.
fn brent<G>(g: &mut G, a0: f64, b0: f64, ga0: f64, gb0: f64, ftol: f64, max_iter: usize) -> Result<(f64, f64)>
where
    G: FnMut(f64) -> Result<f64>,
{
    let (mut a, mut b, mut fa, mut fb) = (a0, b0, ga0, gb0);
    if fa == 0.0 {
        return Ok((a, fa));
    }
    if fb == 0.0 {
        return Ok((b, fb));
    }
    let (mut c, mut fc) = (b, fb);
    let (mut d, mut e) = (b - a, b - a);
    for _ in 0..max_iter {
        if (fb > 0.0) == (fc > 0.0) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 1e-300;
        let xm = 0.5 * (c - b);
        if fb.abs() <= ftol || xm.abs() <= tol1 {
            return Ok((b, fb));
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = g(b)?;
    }
    Ok((b, fb))
}
