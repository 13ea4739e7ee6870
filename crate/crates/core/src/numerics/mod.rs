//! Shared numerical kernels: Gauss–Hermite quadrature, damped fixed-point
//! iteration and scalar maximization.

pub mod fixed_point;
pub mod maximize;
pub mod quadrature;

pub use fixed_point::{damped_fixed_point, scalar_fixed_point, FixedPointOptions, FixedPointResult};
pub use maximize::{log_grid, maximize_around, maximize_scalar, LogGridSearch, Maximum};
pub use quadrature::{gaussian_expectation, mixture_expectation, GaussHermite, GaussLegendre, DEFAULT_ORDER};

/// `ln Σ exp(v_i)` without overflow.
pub fn log_sum_exp(values: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.into_iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Neumaier-compensated sum.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}
