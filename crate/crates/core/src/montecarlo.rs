//! Finite-size Monte Carlo estimates used to validate the large-system
//! predictions.
//!
//! Every channel draw `i` uses its own ChaCha8 stream (`seed`, stream `i`),
//! and per-draw values are reduced in draw order with compensated
//! summation, so estimates do not depend on the number of worker threads.

use nalgebra::{Cholesky, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mismatched::Postulate;
use crate::model::{CMatrix, Constellation, SystemConfig};
use crate::numerics::{compensated_sum, log_sum_exp, maximize_around, LogGridSearch};

/// Largest `|A|^M` accepted by [`mc_mi_matched_discrete`].
pub const MAX_JOINT_ALPHABET: usize = 4096;

/// Sample sizes and seed of a Monte Carlo run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McSettings {
    /// Channel matrices drawn.
    pub n_channels: usize,
    /// Distortion and noise draws per channel and input vector (discrete
    /// inputs only).
    pub n_noise: usize,
    pub seed: u64,
}

impl McSettings {
    /// Defaults for Gaussian inputs: 10⁴ channels.
    pub fn gaussian(seed: u64) -> Self {
        Self {
            n_channels: 10_000,
            n_noise: 1,
            seed,
        }
    }

    /// Defaults for discrete inputs: 10³ channels with 10² noise draws.
    pub fn discrete(seed: u64) -> Self {
        Self {
            n_channels: 1_000,
            n_noise: 100,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_channels < 2 || self.n_noise == 0 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 channel draws and 1 noise draw, got {} and {}",
                self.n_channels, self.n_noise
            )));
        }
        Ok(())
    }
}

/// Sample mean and its standard error, in nats per stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub rate_nats: f64,
    pub stderr_nats: f64,
    /// Maximizing decoder scale (GMI estimates only).
    pub s: Option<f64>,
}

impl McEstimate {
    fn from_samples(samples: &[f64], s: Option<f64>) -> Self {
        let n = samples.len() as f64;
        let mean = compensated_sum(samples.iter().copied()) / n;
        let var = compensated_sum(samples.iter().map(|v| (v - mean).powi(2))) / (n - 1.0);
        Self {
            rate_nats: mean,
            stderr_nats: (var / n).sqrt(),
            s,
        }
    }

    pub fn rate_bits(&self) -> f64 {
        crate::nats_to_bits(self.rate_nats)
    }

    pub fn stderr_bits(&self) -> f64 {
        crate::nats_to_bits(self.stderr_nats)
    }
}

/// Generator for channel draw `index` of a run seeded with `seed`.
pub fn draw_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// `CN(0, var)` sample.
fn cscg<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let sd = (0.5 * var).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(sd * re, sd * im)
}

/// `N×M` channel with IID `CN(0, 1/M)` entries.
pub fn sample_channel<R: Rng + ?Sized>(m: usize, n: usize, rng: &mut R) -> CMatrix {
    let var = 1.0 / m as f64;
    CMatrix::from_fn(n, m, |_, _| cscg(rng, var))
}

fn hermitian_log_det(a: &CMatrix) -> Result<f64> {
    let chol = Cholesky::new(a.clone()).ok_or(Error::Singular("covariance in log-determinant"))?;
    Ok(2.0 * chol.l_dirty().diagonal().iter().map(|d| d.re.ln()).sum::<f64>())
}

fn per_draw<T: Send>(settings: &McSettings, f: impl Fn(&mut ChaCha8Rng) -> Result<T> + Sync) -> Result<Vec<T>> {
    (0..settings.n_channels as u64)
        .into_par_iter()
        .map(|i| f(&mut draw_rng(settings.seed, i)))
        .collect()
}

/// Matched-decoding MI for Gaussian inputs:
/// `(1/M) E_H [ln det(R_w + (γ̄+r_v)HHᴴ) − ln det(R_w + r_v HHᴴ)]`.
pub fn mc_mi_matched_gaussian(cfg: &SystemConfig, settings: &McSettings) -> Result<McEstimate> {
    settings.validate()?;
    let (m, n) = (cfg.m(), cfg.n());
    let (gb, rv) = (cfg.gamma_bar(), cfg.r_v());
    let samples = per_draw(settings, |rng| {
        let h = sample_channel(m, n, rng);
        let hh = &h * h.adjoint();
        let signal = hermitian_log_det(&(cfg.r_w() + hh.scale(gb + rv)))?;
        let interference = if rv == 0.0 {
            hermitian_log_det(cfg.r_w())?
        } else {
            hermitian_log_det(&(cfg.r_w() + hh.scale(rv)))?
        };
        Ok((signal - interference) / m as f64)
    })?;
    Ok(McEstimate::from_samples(&samples, None))
}

/// Per-draw spectral data for the GMI objective: eigenvalues `λ` of
/// `R̃^{-1/2} H Γ Hᴴ R̃^{-1/2}` and the diagonal `c` of
/// `Vᴴ R̃^{-1/2} C R̃^{-1/2} V` with `C = R_w + H(R_v+Γ)Hᴴ`.
struct GmiDraw {
    lambda: Vec<f64>,
    c: Vec<f64>,
}

/// Gaussian-input GMI of the decoder postulating `R̃ = R_w`, maximized
/// over the decoder scale after averaging over channel draws.
pub fn mc_gmi_gaussian(cfg: &SystemConfig, settings: &McSettings) -> Result<McEstimate> {
    mc_gmi_gaussian_with(cfg, &Postulate::receiver_noise(cfg), settings)
}

/// [`mc_gmi_gaussian`] for an arbitrary postulate. For white postulates
/// the reported scale is `s/r̃`.
pub fn mc_gmi_gaussian_with(cfg: &SystemConfig, postulate: &Postulate, settings: &McSettings) -> Result<McEstimate> {
    settings.validate()?;
    let (m, n) = (cfg.m(), cfg.n());
    let r_tilde = match postulate {
        Postulate::White(r) => {
            if !(*r > 0.0 && r.is_finite()) {
                return Err(Error::InvalidArgument(format!("postulated noise level must be positive, got {r}")));
            }
            CMatrix::identity(n, n).scale(*r)
        }
        Postulate::Matrix(mat) => {
            if mat.nrows() != n || mat.ncols() != n {
                return Err(Error::InvalidArgument(format!("postulated covariance must be {n}x{n}")));
            }
            mat.clone()
        }
    };
    // R̃^{-1/2} from the eigendecomposition of the Hermitian part.
    let eig = ((&r_tilde + r_tilde.adjoint()).scale(0.5)).symmetric_eigen();
    if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::InvalidArgument("postulated covariance must be positive definite".into()));
    }
    let u = &eig.eigenvectors;
    let inv_sqrt = u * CMatrix::from_diagonal(&eig.eigenvalues.map(|l| Complex64::new(1.0 / l.sqrt(), 0.0))) * u.adjoint();
    let inv = &inv_sqrt * &inv_sqrt;
    let (gb, rv) = (cfg.gamma_bar(), cfg.r_v());
    // s tr(R̃⁻¹R_w) + (s/M) tr(R̃⁻¹) tr(R_v), per unit s.
    let linear = (&inv * cfg.r_w()).trace().re + inv.trace().re * rv;

    let draws = per_draw(settings, |rng| {
        let h = sample_channel(m, n, rng);
        let hh = &h * h.adjoint();
        let b = &inv_sqrt * hh.scale(gb) * &inv_sqrt;
        let e = ((&b + b.adjoint()).scale(0.5)).symmetric_eigen();
        let cov = cfg.r_w() + hh.scale(gb + rv);
        let rotated = e.eigenvectors.adjoint() * (&inv_sqrt * cov * &inv_sqrt) * &e.eigenvectors;
        Ok(GmiDraw {
            lambda: e.eigenvalues.iter().map(|&l| l.max(0.0)).collect(),
            c: (0..n).map(|i| rotated[(i, i)].re).collect(),
        })
    })?;

    let per_draw_value = |d: &GmiDraw, s: f64| -> f64 {
        let mut acc = -s * linear;
        for (&l, &c) in d.lambda.iter().zip(&d.c) {
            acc += (s * l).ln_1p() + s * c / (1.0 + s * l);
        }
        acc / m as f64
    };
    let objective = |s: f64| Ok(compensated_sum(draws.iter().map(|d| per_draw_value(d, s))) / draws.len() as f64);
    let center = match postulate {
        Postulate::White(r) => *r,
        Postulate::Matrix(_) => 1.0,
    };
    let best = maximize_around(objective, center, &LogGridSearch::default())?;
    let samples: Vec<f64> = draws.iter().map(|d| per_draw_value(d, best.argmax)).collect();
    let scale = match postulate {
        Postulate::White(r) => best.argmax / r,
        Postulate::Matrix(_) => best.argmax,
    };
    Ok(McEstimate::from_samples(&samples, Some(scale)))
}

/// Matched-decoding MI for a discrete alphabet by exhaustive enumeration of
/// the transmitted vector and sampling of channel, distortion and noise:
/// `ln|A| − N/M − (1/M) E ln Σ_x̃ exp(−‖Σ^{-1/2}[H(x − x̃ + v) + w]‖²)` with
/// `Σ = R_w + r_v HHᴴ`.
pub fn mc_mi_matched_discrete(cfg: &SystemConfig, constellation: &Constellation, settings: &McSettings) -> Result<McEstimate> {
    settings.validate()?;
    let size = constellation
        .cardinality()
        .ok_or_else(|| Error::InvalidArgument("discrete Monte Carlo needs a finite alphabet".into()))?;
    let (m, n) = (cfg.m(), cfg.n());
    let joint = (size as u128).checked_pow(m as u32).unwrap_or(u128::MAX);
    if joint > MAX_JOINT_ALPHABET as u128 {
        return Err(Error::AlphabetTooLarge {
            size: joint,
            limit: MAX_JOINT_ALPHABET as u128,
        });
    }
    let joint = joint as usize;
    let pts = constellation.points();
    let vectors: Vec<DVector<Complex64>> = (0..joint)
        .map(|mut idx| {
            DVector::from_fn(m, |_, _| {
                let p = pts[idx % size];
                idx /= size;
                p
            })
        })
        .collect();
    let rv = cfg.r_v();
    let w_chol = Cholesky::new(cfg.r_w().clone()).ok_or(Error::Singular("receive noise covariance"))?;
    let w_factor = w_chol.l();

    let samples = per_draw(settings, |rng| {
        let h = sample_channel(m, n, rng);
        let sigma = cfg.r_w() + (&h * h.adjoint()).scale(rv);
        let chol = Cholesky::new(sigma).ok_or(Error::Singular("noise-plus-distortion covariance"))?;
        // Whitened channel G = L⁻¹H and whitened codewords G x̃, stored as
        // interleaved (re, im) rows for the inner loop.
        let l = chol.l();
        let g = l.solve_lower_triangular(&h).ok_or(Error::Singular("whitening factor"))?;
        let codewords: Vec<Complex64> = vectors.iter().flat_map(|x| (&g * x).iter().copied().collect::<Vec<_>>()).collect();
        let mut acc = Vec::with_capacity(joint * settings.n_noise);
        let mut logs = vec![0.0; joint];
        for x in 0..joint {
            let gx = &codewords[x * n..(x + 1) * n];
            for _ in 0..settings.n_noise {
                let v = DVector::from_fn(m, |_, _| cscg(rng, rv));
                let w0 = DVector::from_fn(n, |_, _| cscg(rng, 1.0));
                let e = &h * v + &w_factor * w0;
                let e = l.solve_lower_triangular(&e).ok_or(Error::Singular("whitening factor"))?;
                for (xt, out) in logs.iter_mut().enumerate() {
                    let gxt = &codewords[xt * n..(xt + 1) * n];
                    let mut d = 0.0;
                    for k in 0..n {
                        d += (gx[k] - gxt[k] + e[k]).norm_sqr();
                    }
                    *out = -d;
                }
                acc.push(log_sum_exp(logs.iter().copied()));
            }
        }
        let mean_log = compensated_sum(acc) / (joint * settings.n_noise) as f64;
        Ok(((size as f64).ln() * m as f64 - n as f64 - mean_log) / m as f64)
    })?;
    Ok(McEstimate::from_samples(&samples, None))
}
