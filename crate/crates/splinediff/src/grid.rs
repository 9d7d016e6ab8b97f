//! Sample-time grids and measured series.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Strictly increasing sample instants t_1 < ... < t_K.
///
/// Intervals h_k = t_{k+1} - t_k are recomputed from the knots on demand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    knots: Vec<f64>,
}

impl TimeGrid {
    pub fn new(knots: Vec<f64>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::TooFewKnots {
                needed: 2,
                got: knots.len(),
            });
        }
        for (i, w) in knots.windows(2).enumerate() {
            if !w[0].is_finite() || !w[1].is_finite() {
                return Err(Error::InvalidGrid(format!("non-finite knot near index {i}")));
            }
            if w[1] <= w[0] {
                return Err(Error::InvalidGrid(format!(
                    "knots not strictly increasing at index {}: {} then {}",
                    i + 1,
                    w[0],
                    w[1]
                )));
            }
        }
        Ok(TimeGrid { knots })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Number of knots K.
    pub fn len(&self) -> usize {
        self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn start(&self) -> f64 {
        self.knots[0]
    }

    pub fn end(&self) -> f64 {
        *self.knots.last().unwrap()
    }

    /// h_k = t_{k+1} - t_k for k = 0..K-2 (zero-based).
    pub fn interval(&self, k: usize) -> f64 {
        self.knots[k + 1] - self.knots[k]
    }

    pub fn intervals(&self) -> Vec<f64> {
        self.knots.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Index i of the piece [t_i, t_{i+1}) containing t, right-open with the
    /// single closure at t_K (which maps to the last piece).
    pub fn locate(&self, t: f64) -> Result<usize> {
        if t < self.start() || t > self.end() {
            return Err(Error::OutOfDomain {
                t,
                start: self.start(),
                end: self.end(),
            });
        }
        if t == self.end() {
            return Ok(self.knots.len() - 2);
        }
        let i = self.knots.partition_point(|&k| k <= t);
        Ok(i - 1)
    }

    /// Appends a knot; used by the recursive solvers as samples arrive.
    pub fn push(&mut self, t: f64) -> Result<f64> {
        let last = self.end();
        if t <= last {
            return Err(Error::NonIncreasingTime { t_new: t, t_last: last });
        }
        self.knots.push(t);
        Ok(t - last)
    }

    /// Grid restricted to the first k knots.
    pub fn prefix(&self, k: usize) -> TimeGrid {
        TimeGrid {
            knots: self.knots[..k].to_vec(),
        }
    }
}

/// Paired (t_k, y_k) noisy measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSeries {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl SampleSeries {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(SampleSeries { grid, values })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn prefix(&self, k: usize) -> SampleSeries {
        SampleSeries {
            grid: self.grid.prefix(k),
            values: self.values[..k].to_vec(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.grid
            .knots()
            .iter()
            .copied()
            .zip(self.values.iter().copied())
    }
}
