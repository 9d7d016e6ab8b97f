//! Test-signal generation: non-uniform grids and Gaussian measurement noise.

use crate::error::{Error, Result};
use crate::grid::{SampleSeries, TimeGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Named test signals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SignalId {
    /// x(t) = t - 1 + (sin(2πt)/(2π) + sin(3.1πt)/(3.1π))/2
    #[default]
    TwoTone,
}

/// Sampling scenario: nominal step, noise level, horizon, and seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub h: f64,
    pub sigma: f64,
    pub horizon: f64,
    pub seed: u64,
    #[serde(default)]
    pub signal: SignalId,
}

impl ScenarioSpec {
    pub fn new(h: f64, sigma: f64, horizon: f64, seed: u64) -> Result<Self> {
        let spec = ScenarioSpec {
            h,
            sigma,
            horizon,
            seed,
            signal: SignalId::TwoTone,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0) {
            return Err(Error::InvalidScenario(format!("h must be > 0, got {}", self.h)));
        }
        if !(self.sigma >= 0.0) {
            return Err(Error::InvalidScenario(format!(
                "sigma must be >= 0, got {}",
                self.sigma
            )));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::InvalidScenario(format!(
                "horizon must be > 0, got {}",
                self.horizon
            )));
        }
        Ok(())
    }
}

/// Test signal and its analytic derivative, returned as (x, z).
pub fn test_signal(t: f64) -> (f64, f64) {
    let x = t - 1.0 + 0.5 * ((2.0 * PI * t).sin() / (2.0 * PI) + (3.1 * PI * t).sin() / (3.1 * PI));
    let z = 1.0 + 0.5 * ((2.0 * PI * t).cos() + (3.1 * PI * t).cos());
    (x, z)
}

/// Draws intervals h_k ~ Uniform([0.5h, 1.5h]) until the horizon is reached;
/// the last knot is clamped to exactly T, so the final interval may be
/// shorter than 0.5h.
pub fn generate_grid(spec: &ScenarioSpec) -> Result<TimeGrid> {
    spec.validate()?;
    if spec.h >= spec.horizon {
        return Err(Error::InvalidScenario(format!(
            "nominal step h = {} must be smaller than horizon T = {}",
            spec.h, spec.horizon
        )));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    let mut knots = vec![0.0];
    let mut t = 0.0;
    loop {
        let hk: f64 = rng.gen_range(0.5 * spec.h..1.5 * spec.h);
        if t + hk >= spec.horizon {
            break;
        }
        t += hk;
        knots.push(t);
    }
    knots.push(spec.horizon);
    TimeGrid::new(knots)
}

/// y_k = x(t_k) + n_k with n_k i.i.d. N(0, σ²); σ = 0 yields exact samples.
pub fn sample_signal(grid: &TimeGrid, spec: &ScenarioSpec) -> SampleSeries {
    // Noise stream is seeded independently of the grid stream.
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed ^ 0x9e37_79b9_7f4a_7c15);
    let values: Vec<f64> = if spec.sigma == 0.0 {
        grid.knots().iter().map(|&t| test_signal(t).0).collect()
    } else {
        let noise = Normal::new(0.0, spec.sigma).expect("valid sigma");
        grid.knots()
            .iter()
            .map(|&t| test_signal(t).0 + noise.sample(&mut rng))
            .collect()
    };
    SampleSeries::new(grid.clone(), values).expect("lengths match by construction")
}
