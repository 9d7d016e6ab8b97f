//! RMSE metrics for the two evaluation scenarios: steady-state over the
//! final two-thirds of the horizon, and endpoint-only for the online case.

use crate::error::{Error, Result};
use crate::grid::TimeGrid;

/// Time after which knots count toward the steady-state metrics: t ≥ T/3,
/// i.e. the final two-thirds of [t_1, t_K].
pub fn transient_cutoff(grid: &TimeGrid) -> f64 {
    grid.start() + (grid.end() - grid.start()) / 3.0
}

/// RMSE over the knots with t_k ≥ T/3 (steady-state, full-interval scenario).
pub fn rmse_full(estimates: &[f64], truth: &[f64], grid: &TimeGrid) -> Result<f64> {
    if estimates.len() != grid.len() || truth.len() != grid.len() {
        return Err(Error::LengthMismatch {
            expected: grid.len(),
            got: estimates.len().min(truth.len()),
        });
    }
    let cutoff = transient_cutoff(grid);
    rmse_where(estimates, truth, |k| grid.knots()[k] >= cutoff)
}

/// RMSE over a caller-selected subset of aligned entries.
pub fn rmse_where<F: Fn(usize) -> bool>(estimates: &[f64], truth: &[f64], keep: F) -> Result<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for (k, (e, t)) in estimates.iter().zip(truth).enumerate() {
        if keep(k) {
            sum += (e - t) * (e - t);
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::EmptyWindow);
    }
    Ok((sum / n as f64).sqrt())
}

/// Median of a non-empty slice (midpoint average for even lengths).
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty slice");
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("no NaN in median input"));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
