//! System configuration and signaling constellations.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Complex Hermitian matrix type used for covariances.
pub type CMatrix = DMatrix<Complex64>;

/// Physical configuration of a binoisy MIMO link.
///
/// The channel has `m` transmit and `n` receive antennas, every transmit
/// antenna emits power `gamma_bar`, the transmit-side distortion is white
/// with per-antenna variance `r_v = kappa^2 * gamma_bar`, and the receive
/// side sees noise plus distortion with covariance `r_w`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    m: usize,
    n: usize,
    alpha: f64,
    snr_db: f64,
    evm_db: f64,
    gamma_bar: f64,
    kappa: f64,
    r_v: f64,
    r_w: CMatrix,
    r_w_eigenvalues: Vec<f64>,
}

impl SystemConfig {
    /// Builds a configuration with white receive noise `R_w = I`.
    ///
    /// `gamma_bar = 10^(snr_db/10)` and `r_v = 10^(evm_db/10) * gamma_bar`;
    /// pass `f64::NEG_INFINITY` as `evm_db` for ideal hardware.
    pub fn new(m: usize, n: usize, snr_db: f64, evm_db: f64) -> Result<Self> {
        Self::with_noise_covariance(m, n, snr_db, evm_db, CMatrix::identity(n, n))
    }

    /// Builds a configuration with a general receive covariance.
    ///
    /// The per-antenna power is chosen so that `gamma_bar / (tr(R_w)/N)`
    /// equals the linear SNR, which reduces to `gamma_bar = snr` for
    /// `R_w = I`.
    pub fn with_noise_covariance(
        m: usize,
        n: usize,
        snr_db: f64,
        evm_db: f64,
        r_w: CMatrix,
    ) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::InvalidConfig(format!(
                "antenna counts must be positive (M={m}, N={n})"
            )));
        }
        if !snr_db.is_finite() {
            return Err(Error::InvalidConfig(format!("SNR must be finite, got {snr_db}")));
        }
        if evm_db.is_nan() || evm_db == f64::INFINITY {
            return Err(Error::InvalidConfig(format!(
                "EVM must be finite or -inf, got {evm_db}"
            )));
        }
        if r_w.nrows() != n || r_w.ncols() != n {
            return Err(Error::InvalidConfig(format!(
                "R_w must be {n}x{n}, got {}x{}",
                r_w.nrows(),
                r_w.ncols()
            )));
        }
        let r_w_eigenvalues = hermitian_pd_eigenvalues(&r_w, "R_w")?;
        let mean_noise = r_w_eigenvalues.iter().sum::<f64>() / n as f64;
        let gamma_bar = db_to_linear(snr_db) * mean_noise;
        let kappa = 10f64.powf(evm_db / 20.0);
        Ok(Self {
            m,
            n,
            alpha: m as f64 / n as f64,
            snr_db,
            evm_db,
            gamma_bar,
            kappa,
            r_v: kappa * kappa * gamma_bar,
            r_w,
            r_w_eigenvalues,
        })
    }

    /// Same antennas, noise covariance and SNR with a different EVM.
    pub fn with_evm(&self, evm_db: f64) -> Result<Self> {
        Self::with_noise_covariance(self.m, self.n, self.snr_db, evm_db, self.r_w.clone())
    }

    /// Same configuration with ideal transmitter hardware.
    pub fn ideal(&self) -> Self {
        let mut out = self.clone();
        out.evm_db = f64::NEG_INFINITY;
        out.kappa = 0.0;
        out.r_v = 0.0;
        out
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Antenna ratio `M/N`.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn snr_db(&self) -> f64 {
        self.snr_db
    }

    pub fn evm_db(&self) -> f64 {
        self.evm_db
    }

    /// Per-antenna transmit power (linear).
    pub fn gamma_bar(&self) -> f64 {
        self.gamma_bar
    }

    /// `10^(evm_db/20)`.
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Per-antenna transmit distortion variance.
    pub fn r_v(&self) -> f64 {
        self.r_v
    }

    /// Receive noise-plus-distortion covariance.
    pub fn r_w(&self) -> &CMatrix {
        &self.r_w
    }

    /// Eigenvalues of `R_w`, ascending.
    pub fn r_w_eigenvalues(&self) -> &[f64] {
        &self.r_w_eigenvalues
    }

    /// `tr(R_w)/N`.
    pub fn mean_noise(&self) -> f64 {
        self.r_w_eigenvalues.iter().sum::<f64>() / self.n as f64
    }

    /// `tr(Gamma)/tr(R_w)` with `Gamma = gamma_bar I_M`.
    pub fn trace_snr(&self) -> f64 {
        self.m as f64 * self.gamma_bar / self.r_w_eigenvalues.iter().sum::<f64>()
    }

    pub fn is_white_noise(&self) -> bool {
        let n = self.n;
        let scale = self.r_w[(0, 0)];
        (0..n).all(|i| (0..n).all(|j| {
            let expected = if i == j { scale } else { Complex64::new(0.0, 0.0) };
            (self.r_w[(i, j)] - expected).norm() <= 1e-14 * scale.norm()
        }))
    }
}

/// `10^(db/10)`.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Validates a Hermitian positive-definite matrix and returns its
/// eigenvalues in ascending order.
pub fn hermitian_pd_eigenvalues(mat: &CMatrix, name: &str) -> Result<Vec<f64>> {
    if mat.nrows() != mat.ncols() || mat.nrows() == 0 {
        return Err(Error::InvalidConfig(format!("{name} must be square and nonempty")));
    }
    if mat.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidConfig(format!("{name} has non-finite entries")));
    }
    let scale = mat.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let asym = (mat - mat.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if asym > 1e-12 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::InvalidConfig(format!("{name} is not Hermitian")));
    }
    let herm = (mat + mat.adjoint()).scale(0.5);
    let mut eig: Vec<f64> = herm.symmetric_eigenvalues().iter().copied().collect();
    eig.sort_by(f64::total_cmp);
    if eig[0] <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "{name} is not positive definite (smallest eigenvalue {:e})",
            eig[0]
        )));
    }
    Ok(eig)
}

/// Signaling law per antenna.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConstellationKind {
    Gaussian,
    Bpsk,
    Qpsk,
    Psk8,
    Qam16,
    Qam64,
    Custom,
}

impl ConstellationKind {
    pub const ALL: [ConstellationKind; 7] = [
        ConstellationKind::Gaussian,
        ConstellationKind::Bpsk,
        ConstellationKind::Qpsk,
        ConstellationKind::Psk8,
        ConstellationKind::Qam16,
        ConstellationKind::Qam64,
        ConstellationKind::Custom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ConstellationKind::Gaussian => "gaussian",
            ConstellationKind::Bpsk => "bpsk",
            ConstellationKind::Qpsk => "qpsk",
            ConstellationKind::Psk8 => "psk8",
            ConstellationKind::Qam16 => "qam16",
            ConstellationKind::Qam64 => "qam64",
            ConstellationKind::Custom => "custom",
        }
    }

    pub fn is_discrete(self) -> bool {
        self != ConstellationKind::Gaussian
    }

    /// Unit-power reference points, or `None` for Gaussian and Custom.
    fn unit_points(self) -> Option<Vec<Complex64>> {
        use std::f64::consts::PI;
        let pts = match self {
            ConstellationKind::Gaussian | ConstellationKind::Custom => return None,
            ConstellationKind::Bpsk => vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)],
            ConstellationKind::Qpsk => square_qam(2),
            ConstellationKind::Psk8 => (0..8)
                .map(|k| Complex64::from_polar(1.0, 2.0 * PI * k as f64 / 8.0))
                .collect(),
            ConstellationKind::Qam16 => square_qam(4),
            ConstellationKind::Qam64 => square_qam(8),
        };
        Some(pts)
    }
}

impl fmt::Display for ConstellationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ConstellationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .trim()
            .chars()
            .filter(|c| !matches!(c, '-' | '_' | ' '))
            .collect::<String>()
            .to_ascii_lowercase();
        let kind = match key.as_str() {
            "gaussian" | "gauss" => ConstellationKind::Gaussian,
            "bpsk" => ConstellationKind::Bpsk,
            "qpsk" | "4qam" | "qam4" => ConstellationKind::Qpsk,
            "psk8" | "8psk" => ConstellationKind::Psk8,
            "qam16" | "16qam" => ConstellationKind::Qam16,
            "qam64" | "64qam" => ConstellationKind::Qam64,
            "custom" => ConstellationKind::Custom,
            _ => return Err(Error::UnknownConstellation(s.to_string())),
        };
        Ok(kind)
    }
}

/// `side x side` square QAM grid with odd-integer coordinates, not normalized.
fn square_qam(side: usize) -> Vec<Complex64> {
    let level = |k: usize| 2.0 * k as f64 - (side as f64 - 1.0);
    let mut pts = Vec::with_capacity(side * side);
    for i in 0..side {
        for q in 0..side {
            pts.push(Complex64::new(level(i), level(q)));
        }
    }
    pts
}

/// Internal representation used by the scalar-channel integrals.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Layout {
    Gaussian,
    /// Alphabet is the Cartesian product `re x im` of two real sets, so every
    /// decoupled quantity splits into two one-dimensional integrals.
    Separable { re: Vec<f64>, im: Vec<f64> },
    Points,
}

/// Per-antenna input law: a uniform discrete alphabet or a CSCG marker.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    kind: ConstellationKind,
    gamma_bar: f64,
    points: Vec<Complex64>,
    layout: Layout,
}

impl Constellation {
    /// Builds one of the built-in alphabets scaled to mean power `gamma_bar`.
    pub fn new(kind: ConstellationKind, gamma_bar: f64) -> Result<Self> {
        check_power(gamma_bar)?;
        match kind {
            ConstellationKind::Gaussian => Ok(Self {
                kind,
                gamma_bar,
                points: Vec::new(),
                layout: Layout::Gaussian,
            }),
            ConstellationKind::Custom => Err(Error::InvalidConstellation(
                "custom constellations need explicit points".into(),
            )),
            _ => {
                let unit = kind.unit_points().expect("built-in discrete alphabet");
                Self::from_points(kind, unit, gamma_bar)
            }
        }
    }

    /// Builds a custom alphabet; the points are centered and rescaled so the
    /// uniform prior has zero mean and power `gamma_bar`.
    pub fn custom(points: Vec<Complex64>, gamma_bar: f64) -> Result<Self> {
        check_power(gamma_bar)?;
        if points.is_empty() {
            return Err(Error::InvalidConstellation("custom alphabet is empty".into()));
        }
        if points.iter().any(|p| !p.re.is_finite() || !p.im.is_finite()) {
            return Err(Error::InvalidConstellation("non-finite constellation point".into()));
        }
        Self::from_points(ConstellationKind::Custom, points, gamma_bar)
    }

    fn from_points(kind: ConstellationKind, raw: Vec<Complex64>, gamma_bar: f64) -> Result<Self> {
        let k = raw.len() as f64;
        let mean = raw.iter().sum::<Complex64>() / k;
        let centered: Vec<Complex64> = raw.iter().map(|&p| p - mean).collect();
        let power = centered.iter().map(|p| p.norm_sqr()).sum::<f64>() / k;
        let points: Vec<Complex64> = if power > 0.0 {
            let scale = (gamma_bar / power).sqrt();
            centered.iter().map(|&p| p * scale).collect()
        } else if raw.len() == 1 || gamma_bar == 0.0 {
            centered
        } else {
            return Err(Error::InvalidConstellation(
                "alphabet has zero spread but nonzero power was requested".into(),
            ));
        };
        let layout = detect_layout(&points);
        Ok(Self {
            kind,
            gamma_bar,
            points,
            layout,
        })
    }

    /// Single-point alphabet at `point`, not recentered.
    ///
    /// Degenerate priors appear as limits of the decoupled estimators
    /// (posterior of a point mass is the point itself); they are not valid
    /// zero-mean signaling laws unless `point == 0`.
    pub fn point_mass(point: Complex64) -> Self {
        Self {
            kind: ConstellationKind::Custom,
            gamma_bar: point.norm_sqr(),
            points: vec![point],
            layout: Layout::Points,
        }
    }

    pub fn kind(&self) -> ConstellationKind {
        self.kind
    }

    /// Mean symbol power.
    pub fn gamma_bar(&self) -> f64 {
        self.gamma_bar
    }

    /// Alphabet points (empty for Gaussian).
    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn is_gaussian(&self) -> bool {
        self.kind == ConstellationKind::Gaussian
    }

    /// `|A|`, or `None` for Gaussian signaling.
    pub fn cardinality(&self) -> Option<usize> {
        (!self.is_gaussian()).then_some(self.points.len())
    }

    pub(crate) fn layout(&self) -> &Layout {
        &self.layout
    }

    /// Same alphabet rescaled to a new mean power.
    pub fn with_power(&self, gamma_bar: f64) -> Result<Self> {
        match self.kind {
            ConstellationKind::Custom => Self::custom(self.points.clone(), gamma_bar),
            kind => Self::new(kind, gamma_bar),
        }
    }
}

fn check_power(gamma_bar: f64) -> Result<()> {
    if !(gamma_bar >= 0.0 && gamma_bar.is_finite()) {
        return Err(Error::InvalidConstellation(format!(
            "power must be finite and nonnegative, got {gamma_bar}"
        )));
    }
    Ok(())
}

fn detect_layout(points: &[Complex64]) -> Layout {
    let scale = points.iter().map(|p| p.norm()).fold(0.0, f64::max).max(1e-300);
    let tol = 1e-12 * scale;
    let same = |a: f64, b: f64| (a - b).abs() <= tol;
    for (i, p) in points.iter().enumerate() {
        if points[..i].iter().any(|q| same(p.re, q.re) && same(p.im, q.im)) {
            // Repeated points weight the prior non-uniformly over distinct values.
            return Layout::Points;
        }
    }
    let distinct = |vals: Vec<f64>| {
        let mut out: Vec<f64> = Vec::new();
        for v in vals {
            if !out.iter().any(|&u| same(u, v)) {
                out.push(v);
            }
        }
        out
    };
    let re = distinct(points.iter().map(|p| p.re).collect());
    let im = distinct(points.iter().map(|p| p.im).collect());
    if re.len() * im.len() != points.len() {
        return Layout::Points;
    }
    let all_present = re.iter().all(|&a| {
        im.iter()
            .all(|&b| points.iter().any(|p| same(p.re, a) && same(p.im, b)))
    });
    if all_present {
        Layout::Separable { re, im }
    } else {
        Layout::Points
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn config_ideal_hardware() {
        let cfg = SystemConfig::new(4, 4, 0.0, f64::NEG_INFINITY).unwrap();
        assert_eq!(cfg.gamma_bar(), 1.0);
        assert_eq!(cfg.r_v(), 0.0);
        assert_eq!(cfg.alpha(), 1.0);
    }

    #[test]
    fn config_evm_convention() {
        let cfg = SystemConfig::new(4, 4, 20.0, -20.0).unwrap();
        assert_relative_eq!(cfg.gamma_bar(), 100.0, max_relative = 1e-14);
        assert_relative_eq!(cfg.kappa(), 0.1, max_relative = 1e-14);
        assert_relative_eq!(cfg.r_v(), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn config_rectangular() {
        let cfg = SystemConfig::new(2, 4, 10.0, -10.0).unwrap();
        assert_eq!(cfg.alpha(), 0.5);
        assert_relative_eq!(cfg.gamma_bar(), 10.0, max_relative = 1e-14);
        assert_relative_eq!(cfg.r_v(), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn config_rejects_bad_input() {
        assert!(SystemConfig::new(0, 4, 0.0, -10.0).is_err());
        assert!(SystemConfig::new(4, 0, 0.0, -10.0).is_err());
        assert!(SystemConfig::new(4, 4, f64::NAN, -10.0).is_err());
        assert!(SystemConfig::new(4, 4, f64::INFINITY, -10.0).is_err());
        let not_pd = CMatrix::from_diagonal_element(2, 2, Complex64::new(-1.0, 0.0));
        assert!(SystemConfig::with_noise_covariance(2, 2, 0.0, -10.0, not_pd).is_err());
        let mut not_herm = CMatrix::identity(2, 2);
        not_herm[(0, 1)] = Complex64::new(0.3, 0.0);
        assert!(SystemConfig::with_noise_covariance(2, 2, 0.0, -10.0, not_herm).is_err());
    }

    #[test]
    fn config_general_noise_honors_snr_definition() {
        let mut r_w = CMatrix::identity(3, 3);
        r_w[(0, 0)] = Complex64::new(0.5, 0.0);
        r_w[(2, 2)] = Complex64::new(2.0, 0.0);
        r_w[(0, 1)] = Complex64::new(0.1, 0.2);
        r_w[(1, 0)] = Complex64::new(0.1, -0.2);
        let cfg = SystemConfig::with_noise_covariance(3, 3, 7.0, -15.0, r_w).unwrap();
        assert_relative_eq!(cfg.trace_snr(), db_to_linear(7.0), max_relative = 1e-13);
        assert!(!cfg.is_white_noise());
    }

    #[test]
    fn qpsk_unit_power() {
        let c = Constellation::new(ConstellationKind::Qpsk, 1.0).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for p in c.points() {
            assert_relative_eq!(p.re.abs(), s, max_relative = 1e-15);
            assert_relative_eq!(p.im.abs(), s, max_relative = 1e-15);
        }
    }

    #[test]
    fn bpsk_scaling() {
        let c = Constellation::new(ConstellationKind::Bpsk, 4.0).unwrap();
        let mut re: Vec<f64> = c.points().iter().map(|p| p.re).collect();
        re.sort_by(f64::total_cmp);
        assert_relative_eq!(re[0], -2.0, max_relative = 1e-15);
        assert_relative_eq!(re[1], 2.0, max_relative = 1e-15);
        assert!(c.points().iter().all(|p| p.im == 0.0));
    }

    #[test]
    fn qam16_grid_scaling() {
        let c = Constellation::new(ConstellationKind::Qam16, 1.0).unwrap();
        // (1/16) sum |x|^2 over the odd-integer grid equals 10.
        let unit = 1.0 / 10f64.sqrt();
        for p in c.points() {
            for v in [p.re, p.im] {
                let level = v / unit;
                assert!([1.0, 3.0].iter().any(|l| (level.abs() - l).abs() < 1e-12));
            }
        }
    }

    #[test]
    fn layouts() {
        for (kind, separable) in [
            (ConstellationKind::Bpsk, true),
            (ConstellationKind::Qpsk, true),
            (ConstellationKind::Qam16, true),
            (ConstellationKind::Qam64, true),
            (ConstellationKind::Psk8, false),
        ] {
            let c = Constellation::new(kind, 2.0).unwrap();
            assert_eq!(matches!(c.layout(), Layout::Separable { .. }), separable, "{kind}");
        }
    }

    #[test]
    fn custom_is_normalized() {
        let pts = vec![
            Complex64::new(3.0, 1.0),
            Complex64::new(5.0, 1.0),
            Complex64::new(4.0, 3.0),
        ];
        let c = Constellation::custom(pts, 2.5).unwrap();
        let mean = c.points().iter().sum::<Complex64>() / 3.0;
        let power = c.points().iter().map(|p| p.norm_sqr()).sum::<f64>() / 3.0;
        assert!(mean.norm() < 1e-14);
        assert_relative_eq!(power, 2.5, max_relative = 1e-14);
        assert!(Constellation::custom(Vec::new(), 1.0).is_err());
        assert!(Constellation::new(ConstellationKind::Custom, 1.0).is_err());
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("QAM-16".parse::<ConstellationKind>().unwrap(), ConstellationKind::Qam16);
        assert_eq!("gaussian".parse::<ConstellationKind>().unwrap(), ConstellationKind::Gaussian);
        assert!("qam256".parse::<ConstellationKind>().is_err());
        for k in ConstellationKind::ALL {
            assert_eq!(k.name().parse::<ConstellationKind>().unwrap(), k);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn discrete_alphabets_are_zero_mean_and_normalized(
                kind_idx in 1usize..6,
                gamma_bar in 1e-3f64..1e6,
            ) {
                let kind = ConstellationKind::ALL[kind_idx];
                let c = Constellation::new(kind, gamma_bar).unwrap();
                let k = c.points().len() as f64;
                let mean = c.points().iter().sum::<Complex64>() / k;
                let power = c.points().iter().map(|p| p.norm_sqr()).sum::<f64>() / k;
                prop_assert!(mean.norm() < 1e-12 * gamma_bar.sqrt().max(1.0));
                prop_assert!((power - gamma_bar).abs() < 1e-12 * gamma_bar);
            }

            #[test]
            fn distortion_tracks_kappa(snr_db in -20f64..60.0, evm_db in -60f64..0.0) {
                let cfg = SystemConfig::new(4, 4, snr_db, evm_db).unwrap();
                let ratio = cfg.r_v() / cfg.gamma_bar();
                let kappa2 = cfg.kappa() * cfg.kappa();
                prop_assert!((ratio - kappa2).abs() <= 4.0 * f64::EPSILON * kappa2);
            }
        }
    }
}
