//! One-dimensional maximization over a positive scalar.

use crate::error::{Error, Result};

const INV_PHI: f64 = 0.618_033_988_749_894_8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Maximum {
    pub argmax: f64,
    pub max: f64,
    pub evaluations: usize,
}

/// `n` points log-spaced on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Evaluates `f` on an ascending positive `grid`, then refines around the
/// best seed by golden-section search in `ln s` on the interval spanned by
/// its neighbors, to relative width `refine_tol`.
///
/// The returned value is never below any grid value.
pub fn maximize_scalar<F>(mut f: F, grid: &[f64], refine_tol: f64) -> Result<Maximum>
where
    F: FnMut(f64) -> Result<f64>,
{
    if grid.len() < 2 {
        return Err(Error::InvalidArgument("seed grid needs at least two points".into()));
    }
    if grid.iter().any(|&s| !(s > 0.0 && s.is_finite())) || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("seed grid must be positive and ascending".into()));
    }
    let values = grid
        .iter()
        .map(|&s| checked(&mut f, s))
        .collect::<Result<Vec<f64>>>()?;
    let evaluations = grid.len();
    refine(&mut f, grid, &values, refine_tol, evaluations)
}

fn checked<F: FnMut(f64) -> Result<f64>>(f: &mut F, s: f64) -> Result<f64> {
    let v = f(s)?;
    if v.is_nan() {
        return Err(Error::Optimization(format!("objective is NaN at {s:e}")));
    }
    Ok(v)
}

fn best_index(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if v == f64::NEG_INFINITY {
            continue;
        }
        if best.is_none_or(|b| v > values[b]) {
            best = Some(i);
        }
    }
    best
}

fn refine<F>(f: &mut F, grid: &[f64], values: &[f64], refine_tol: f64, mut evaluations: usize) -> Result<Maximum>
where
    F: FnMut(f64) -> Result<f64>,
{
    let k = best_index(values)
        .ok_or_else(|| Error::Optimization("objective is -inf on the entire seed grid".into()))?;
    let lo = grid[k.saturating_sub(1)].ln();
    let hi = grid[(k + 1).min(grid.len() - 1)].ln();
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = checked(f, x1.exp())?;
    let mut f2 = checked(f, x2.exp())?;
    evaluations += 2;
    let mut best = (grid[k], values[k]);
    for &(x, v) in &[(x1, f1), (x2, f2)] {
        if v > best.1 {
            best = (x.exp(), v);
        }
    }
    while b - a > refine_tol {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = checked(f, x1.exp())?;
            if f1 > best.1 {
                best = (x1.exp(), f1);
            }
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = checked(f, x2.exp())?;
            if f2 > best.1 {
                best = (x2.exp(), f2);
            }
        }
        evaluations += 1;
    }
    Ok(Maximum {
        argmax: best.0,
        max: best.1,
        evaluations,
    })
}

/// Seed grid that is re-centered on a natural scale of the problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogGridSearch {
    /// Grid spans `center · 10^[−half_width, +half_width]`.
    pub half_width_decades: f64,
    pub points: usize,
    pub refine_tol: f64,
    /// Times the grid may be shifted when the best seed lies on an edge.
    pub max_shifts: usize,
    /// The grid is walked outwards from its center; a direction is
    /// abandoned after three consecutive decreases once the value is this
    /// far below the best so far. `f64::INFINITY` evaluates every point.
    pub prune_drop: f64,
}

impl Default for LogGridSearch {
    fn default() -> Self {
        Self {
            half_width_decades: 3.0,
            points: 31,
            refine_tol: 1e-6,
            max_shifts: 4,
            prune_drop: 2.0,
        }
    }
}

/// [`maximize_scalar`] on a log grid around `center`, shifting the grid by a
/// full width whenever the best seed sits on its boundary.
pub fn maximize_around<F>(mut f: F, center: f64, search: &LogGridSearch) -> Result<Maximum>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(center > 0.0 && center.is_finite()) {
        return Err(Error::InvalidArgument(format!("grid center must be positive, got {center}")));
    }
    let span = 10f64.powf(search.half_width_decades);
    let mut grid = log_grid(center / span, center * span, search.points);
    let mut values = vec![f64::NEG_INFINITY; grid.len()];
    let mid = grid.len() / 2;
    values[mid] = checked(&mut f, grid[mid])?;
    let mut evaluations = 1;
    let mut best = values[mid];
    for dir in [1isize, -1] {
        let (mut i, mut falls) = (mid as isize, 0);
        loop {
            let prev = values[i as usize];
            i += dir;
            if i < 0 || i as usize >= grid.len() {
                break;
            }
            let v = checked(&mut f, grid[i as usize])?;
            evaluations += 1;
            values[i as usize] = v;
            best = best.max(v);
            falls = if v < prev { falls + 1 } else { 0 };
            if falls >= 3 && v < best - search.prune_drop {
                break;
            }
        }
    }
    let step = (grid[1] / grid[0]).ln();
    for _ in 0..search.max_shifts {
        let Some(k) = best_index(&values) else { break };
        // A plateau reaching the edge is not a reason to move: rounding
        // noise on a flat objective would otherwise drag the grid away.
        let interior = values[1..values.len() - 1].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if values[k] - interior <= 1e-12 * (1.0 + values[k].abs()) {
            break;
        }
        let extend = |from: f64, dir: f64| -> Vec<f64> {
            (1..search.points).map(|i| (from.ln() + dir * step * i as f64).exp()).collect()
        };
        if k == 0 {
            let new: Vec<f64> = extend(grid[0], -1.0).into_iter().rev().collect();
            let new_vals = new.iter().map(|&s| checked(&mut f, s)).collect::<Result<Vec<f64>>>()?;
            evaluations += new.len();
            grid.splice(0..0, new);
            values.splice(0..0, new_vals);
        } else if k == grid.len() - 1 {
            let new = extend(grid[k], 1.0);
            let new_vals = new.iter().map(|&s| checked(&mut f, s)).collect::<Result<Vec<f64>>>()?;
            evaluations += new.len();
            grid.extend(new);
            values.extend(new_vals);
        } else {
            break;
        }
    }
    refine(&mut f, &grid, &values, search.refine_tol, evaluations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid() -> Vec<f64> {
        log_grid(1e-3, 1e3, 31)
    }

    #[test]
    fn log_grid_endpoints() {
        let g = grid();
        assert_eq!(g.len(), 31);
        assert_relative_eq!(g[0], 1e-3, max_relative = 1e-14);
        assert_relative_eq!(g[30], 1e3, max_relative = 1e-12);
        assert_relative_eq!(g[15], 1.0, max_relative = 1e-14);
    }

    #[test]
    fn negative_log_squared() {
        let m = maximize_scalar(|s| Ok(-(s.ln()).powi(2)), &grid(), 1e-6).unwrap();
        assert_relative_eq!(m.argmax, 1.0, max_relative = 1e-6);
    }

    #[test]
    fn log_minus_linear() {
        let m = maximize_scalar(|s| Ok(s.ln() - s), &grid(), 1e-6).unwrap();
        assert_relative_eq!(m.argmax, 1.0, max_relative = 1e-3);
        assert_relative_eq!(m.max, -1.0, max_relative = 1e-10);
    }

    #[test]
    fn off_grid_optimum() {
        let target = 0.037_f64;
        let f = |s: f64| Ok(-(s.ln() - target.ln()).powi(2));
        let m = maximize_scalar(f, &grid(), 1e-8).unwrap();
        assert_relative_eq!(m.argmax, target, max_relative = 1e-6);
    }

    #[test]
    fn never_below_seed_values() {
        // Bimodal objective whose second mode is narrower than a grid step.
        let f = |s: f64| {
            let x = s.ln();
            Ok((-(x + 3.0).powi(2)).exp() + 1.2 * (-(x - 2.0).powi(2) * 40.0).exp())
        };
        let g = grid();
        let m = maximize_scalar(f, &g, 1e-6).unwrap();
        for &s in &g {
            assert!(m.max >= f(s).unwrap());
        }
    }

    #[test]
    fn all_minus_infinity_is_an_error() {
        let err = maximize_scalar(|_| Ok(f64::NEG_INFINITY), &grid(), 1e-6);
        assert!(matches!(err, Err(Error::Optimization(_))));
    }

    #[test]
    fn shifted_grid_finds_far_optimum() {
        let target = 3e-7_f64;
        let f = |s: f64| Ok(-(s.ln() - target.ln()).powi(2));
        let m = maximize_around(f, 1.0, &LogGridSearch::default()).unwrap();
        assert_relative_eq!(m.argmax, target, max_relative = 1e-5);
    }

    #[test]
    fn flat_objective_does_not_drift() {
        // Rounding-level wiggle on a plateau must not shift the grid.
        let f = |s: f64| Ok(1.0 - (-s).exp() + 1e-17 * s.ln().sin());
        let m = maximize_around(f, 1.0, &LogGridSearch::default()).unwrap();
        assert!(m.argmax < 1e6, "walked to {}", m.argmax);
    }

    #[test]
    fn pruning_skips_far_tails() {
        let count = std::cell::Cell::new(0);
        let f = |s: f64| {
            count.set(count.get() + 1);
            Ok(-(s.ln()).powi(2))
        };
        let m = maximize_around(f, 1.0, &LogGridSearch::default()).unwrap();
        assert_relative_eq!(m.argmax, 1.0, max_relative = 1e-6);
        let search = LogGridSearch { prune_drop: f64::INFINITY, ..LogGridSearch::default() };
        let full = std::cell::Cell::new(0);
        maximize_around(
            |s: f64| {
                full.set(full.get() + 1);
                Ok(-(s.ln()).powi(2))
            },
            1.0,
            &search,
        )
        .unwrap();
        assert!(count.get() < full.get(), "{} vs {}", count.get(), full.get());
    }
}
