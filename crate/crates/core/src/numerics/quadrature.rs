//! Gauss–Hermite quadrature over the real line and the complex plane, and
//! Gauss–Legendre panels for finite intervals.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Default number of nodes per axis.
pub const DEFAULT_ORDER: usize = 48;

const SQRT_PI: f64 = 1.772_453_850_905_516;

/// Nodes and weights for `∫ e^{-t²} f(t) dt ≈ Σ w_i f(t_i)`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    /// Computes an `order`-point rule by Newton iteration on the
    /// orthonormal Hermite recurrence.
    pub fn new(order: usize) -> Result<Self> {
        if order < 2 {
            return Err(Error::InvalidArgument(format!(
                "quadrature order must be at least 2, got {order}"
            )));
        }
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let pim4 = 1.0 / SQRT_PI.sqrt();
        let half = n.div_ceil(2);
        let mut z = 0.0f64;
        for i in 0..half {
            z = match i {
                0 => {
                    let nn = (2 * n + 1) as f64;
                    nn.sqrt() - 1.85575 * nn.powf(-0.16667)
                }
                1 => z - 1.14 * (n as f64).powf(0.426) / z,
                2 => 1.86 * z - 0.86 * nodes[0],
                3 => 1.91 * z - 0.91 * nodes[1],
                _ => 2.0 * z - nodes[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..100 {
                let mut p1 = pim4;
                let mut p2 = 0.0;
                for j in 1..=n {
                    let p3 = p2;
                    p2 = p1;
                    p1 = z * (2.0 / j as f64).sqrt() * p2 - ((j - 1) as f64 / j as f64).sqrt() * p3;
                }
                pp = (2.0 * n as f64).sqrt() * p2;
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            nodes[i] = z;
            nodes[n - 1 - i] = -z;
            weights[i] = 2.0 / (pp * pp);
            weights[n - 1 - i] = weights[i];
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Ok(Self { nodes, weights })
    }

    /// Shared rule for `order`, computed once per process.
    pub fn cached(order: usize) -> Result<Arc<Self>> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussHermite>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(rule) = guard.get(&order) {
            return Ok(Arc::clone(rule));
        }
        let rule = Arc::new(Self::new(order)?);
        guard.insert(order, Arc::clone(&rule));
        Ok(rule)
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `E f(a)` for real `a ~ N(mean, variance/2)`.
    ///
    /// The variance is the *complex* variance of the CSCG variable whose real
    /// part `a` is, so that one axis of a tensor rule uses the same parameter
    /// as the plane rule.
    #[inline]
    pub fn expect_axis(&self, mean: f64, variance: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let sigma = variance.sqrt();
        let mut acc = 0.0;
        for (&t, &w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mean + sigma * t);
        }
        acc / SQRT_PI
    }

    /// `E f(z)` for `z ~ CN(mean, variance)` with a tensor rule.
    pub fn expect_plane<T>(&self, mean: Complex64, variance: f64, mut f: impl FnMut(Complex64) -> T) -> T
    where
        T: Default + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
    {
        let sigma = variance.sqrt();
        let mut acc = T::default();
        for (&tr, &wr) in self.nodes.iter().zip(&self.weights) {
            for (&ti, &wi) in self.nodes.iter().zip(&self.weights) {
                let z = mean + Complex64::new(sigma * tr, sigma * ti);
                acc = acc + f(z) * (wr * wi);
            }
        }
        acc * (1.0 / std::f64::consts::PI)
    }
}

/// Nodes and weights for `∫_{-1}^{1} f(t) dt ≈ Σ w_i f(t_i)`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Computes an `order`-point rule by Newton iteration on the Legendre
    /// recurrence.
    pub fn new(order: usize) -> Result<Self> {
        if order < 1 {
            return Err(Error::InvalidArgument("Gauss–Legendre order must be positive".into()));
        }
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut pp = 1.0;
            for _ in 0..100 {
                let (mut p1, mut p2) = (1.0, 0.0);
                for j in 1..=n {
                    let p3 = p2;
                    p2 = p1;
                    p1 = ((2 * j - 1) as f64 * z * p2 - (j - 1) as f64 * p3) / j as f64;
                }
                pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-16 {
                    break;
                }
            }
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            weights[i] = 2.0 / ((1.0 - z * z) * pp * pp);
            weights[n - 1 - i] = weights[i];
        }
        Ok(Self { nodes, weights })
    }

    /// Shared rule for `order`, computed once per process.
    pub fn cached(order: usize) -> Result<Arc<Self>> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussLegendre>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(rule) = guard.get(&order) {
            return Ok(Arc::clone(rule));
        }
        let rule = Arc::new(Self::new(order)?);
        guard.insert(order, Arc::clone(&rule));
        Ok(rule)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `∫_a^b f(t) dt`.
    #[inline]
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        let mut acc = 0.0;
        for (&t, &w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * t);
        }
        acc * half
    }
}

/// `E f(z)` for `z ~ CN(mean, variance)` using an `order`-point rule per axis.
///
/// Exact for polynomials in `(Re z, Im z)` of per-axis degree up to
/// `2·order − 1`.
pub fn gaussian_expectation<T>(
    f: impl FnMut(Complex64) -> T,
    mean: Complex64,
    variance: f64,
    order: usize,
) -> Result<T>
where
    T: Default + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
{
    check_variance(variance)?;
    let rule = GaussHermite::cached(order)?;
    Ok(rule.expect_plane(mean, variance, f))
}

/// Uniform mixture of CSCG components: `(1/K) Σ_k E_{CN(μ_k, σ_k²)} f`.
pub fn mixture_expectation<T>(
    components: &[(Complex64, f64)],
    mut f: impl FnMut(Complex64) -> T,
    order: usize,
) -> Result<T>
where
    T: Default + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
{
    if components.is_empty() {
        return Err(Error::InvalidArgument("mixture has no components".into()));
    }
    let rule = GaussHermite::cached(order)?;
    let mut acc = T::default();
    for &(mean, variance) in components {
        check_variance(variance)?;
        acc = acc + rule.expect_plane(mean, variance, &mut f);
    }
    Ok(acc * (1.0 / components.len() as f64))
}

fn check_variance(variance: f64) -> Result<()> {
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "variance must be positive and finite, got {variance}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;


    #[test]
    fn legendre_exact_for_polynomials() {
        let gl = GaussLegendre::new(10).unwrap();
        for k in 0..20 {
            let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
            let got = gl.integrate(-1.0, 1.0, |t| t.powi(k));
            assert!((got - exact).abs() < 1e-14, "t^{k}: {got} vs {exact}");
        }
        let w: f64 = gl.weights().iter().sum();
        assert!((w - 2.0).abs() < 1e-14);
        let odd = GaussLegendre::new(7).unwrap();
        assert!((odd.integrate(0.0, 2.0, |t| t.exp()) - (2f64.exp() - 1.0)).abs() < 1e-12);
    }
    #[test]
    fn weights_sum_to_sqrt_pi() {
        for order in [2, 3, 10, 24, 48, 96, 150] {
            let rule = GaussHermite::new(order).unwrap();
            let s: f64 = rule.weights().iter().sum();
            assert_relative_eq!(s, SQRT_PI, max_relative = 1e-13);
            // Nodes strictly decreasing and symmetric.
            assert!(rule.nodes().windows(2).all(|w| w[0] > w[1]));
        }
    }

    #[test]
    fn low_order_rule_matches_closed_form() {
        let rule = GaussHermite::new(2).unwrap();
        assert_relative_eq!(rule.nodes()[0], std::f64::consts::FRAC_1_SQRT_2, max_relative = 1e-14);
        assert_relative_eq!(rule.weights()[0], SQRT_PI / 2.0, max_relative = 1e-14);
    }

    #[test]
    fn even_moments_are_exact() {
        // ∫ e^{-t²} t^{2k} dt = Γ(k + 1/2).
        let rule = GaussHermite::new(20).unwrap();
        let mut gamma_half = SQRT_PI;
        for k in 0..20 {
            let m: f64 = rule
                .nodes()
                .iter()
                .zip(rule.weights())
                .map(|(t, w)| w * t.powi(2 * k))
                .sum();
            assert_relative_eq!(m, gamma_half, max_relative = 1e-12);
            gamma_half *= k as f64 + 0.5;
        }
    }

    #[test]
    fn normalization() {
        let v = gaussian_expectation(|_| 1.0, Complex64::new(3.0, -2.0), 0.7, 48).unwrap();
        assert_relative_eq!(v, 1.0, max_relative = 1e-13);
    }

    #[test]
    fn second_moment() {
        let v = gaussian_expectation(|z| z.norm_sqr(), Complex64::new(0.0, 0.0), 2.0, 48).unwrap();
        assert_relative_eq!(v, 2.0, max_relative = 1e-13);
    }

    #[test]
    fn fourth_moment_against_riemann_sum() {
        // Dense midpoint grid on [-L, L]^2 as the independent oracle.
        let l = 9.0;
        let steps = 900;
        let h = 2.0 * l / steps as f64;
        let mut oracle = 0.0;
        for i in 0..steps {
            for j in 0..steps {
                let x = -l + (i as f64 + 0.5) * h;
                let y = -l + (j as f64 + 0.5) * h;
                let r2 = x * x + y * y;
                oracle += r2 * r2 * (-r2).exp() / std::f64::consts::PI * h * h;
            }
        }
        assert_relative_eq!(oracle, 2.0, max_relative = 1e-9);
        let v = gaussian_expectation(|z| z.norm_sqr().powi(2), Complex64::new(0.0, 0.0), 1.0, 48).unwrap();
        assert_relative_eq!(v, oracle, max_relative = 1e-9);
    }

    #[test]
    fn complex_valued_integrand() {
        let mu = Complex64::new(0.4, -1.2);
        let v = gaussian_expectation(|z| z, mu, 3.0, 16).unwrap();
        assert!((v - mu).norm() < 1e-13);
    }

    #[test]
    fn rejects_bad_variance_and_order() {
        assert!(gaussian_expectation(|_| 1.0, Complex64::new(0.0, 0.0), 0.0, 48).is_err());
        assert!(gaussian_expectation(|_| 1.0, Complex64::new(0.0, 0.0), -1.0, 48).is_err());
        assert!(gaussian_expectation(|_| 1.0, Complex64::new(0.0, 0.0), 1.0, 1).is_err());
        assert!(mixture_expectation::<f64>(&[], |_| 1.0, 48).is_err());
    }

    #[test]
    fn mixture_single_component() {
        let mu = Complex64::new(1.0, 1.0);
        let f = |z: Complex64| (z.re * 0.3).cos() + z.im * z.im;
        let a = mixture_expectation(&[(mu, 0.8)], f, 48).unwrap();
        let b = gaussian_expectation(f, mu, 0.8, 48).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mixture_symmetric_qpsk() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let comps: Vec<(Complex64, f64)> = [(s, s), (s, -s), (-s, s), (-s, -s)]
            .iter()
            .map(|&(a, b)| (Complex64::new(a, b), 0.5))
            .collect();
        let mean = mixture_expectation(&comps, |z| z, 48).unwrap();
        assert!(mean.norm() < 1e-14);
        let power = mixture_expectation(&comps, |z| z.norm_sqr(), 48).unwrap();
        // Σ (|x|² + σ²) / 4 with |x|² = 1, σ² = 0.5.
        assert_relative_eq!(power, 1.5, max_relative = 1e-13);
    }
}
