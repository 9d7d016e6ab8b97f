//! Reference online differentiators: Euler-discretized Levant
//! (super-twisting) and a linear high-gain observer with output saturation.
//!
//! Both use explicit Euler with the actual non-uniform step h_k and
//! zero-initialized states.

use crate::error::{Error, Result};
use crate::grid::SampleSeries;
use crate::metrics::rmse_full;
use crate::signal::{generate_grid, sample_signal, test_signal, ScenarioSpec};

/// Default Lipschitz bound on |x''| for the test signal:
/// |x''| = |π sin(2πt) + 1.55π sin(3.1πt)| ≤ 2.55π ≈ 8.01. The gain λ₂ = 1.1L
/// must dominate sup|x''| or the sliding mode is lost, so the default is the
/// analytic bound itself.
pub const DEFAULT_LEVANT_L: f64 = 2.55 * std::f64::consts::PI;
pub const DEFAULT_HGO_SAT: f64 = 2.5;

/// sign(x) with sign(0) = 0 (f64::signum returns ±1 at zero).
fn sign(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.signum()
    }
}

/// Super-twisting differentiator state with gains λ₁ = 1.5√L, λ₂ = 1.1L.
#[derive(Debug, Clone, Copy)]
pub struct LevantState {
    pub x0: f64,
    pub x1: f64,
    lipschitz: f64,
    lambda1: f64,
    lambda2: f64,
}

impl LevantState {
    pub fn new(lipschitz: f64) -> Result<Self> {
        if !(lipschitz > 0.0) {
            return Err(Error::Config(format!(
                "Levant Lipschitz bound must be > 0, got {lipschitz}"
            )));
        }
        Ok(LevantState {
            x0: 0.0,
            x1: 0.0,
            lipschitz,
            lambda1: 1.5 * lipschitz.sqrt(),
            lambda2: 1.1 * lipschitz,
        })
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// One explicit-Euler step; returns the updated derivative estimate.
    pub fn step(&mut self, h: f64, y: f64) -> f64 {
        let e = self.x0 - y;
        self.x0 += h * (self.x1 - self.lambda1 * e.abs().sqrt() * sign(e));
        self.x1 -= h * self.lambda2 * sign(e);
        self.x1
    }
}

/// Linear high-gain observer with gains (2/ε, 1/ε²) and saturated output.
#[derive(Debug, Clone, Copy)]
pub struct HgoState {
    pub x0: f64,
    pub x1: f64,
    epsilon: f64,
    sat_level: f64,
}

impl HgoState {
    pub fn new(epsilon: f64, sat_level: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::Config(format!("HGO epsilon must be > 0, got {epsilon}")));
        }
        if !(sat_level > 0.0) {
            return Err(Error::Config(format!(
                "HGO saturation level must be > 0, got {sat_level}"
            )));
        }
        Ok(HgoState {
            x0: 0.0,
            x1: 0.0,
            epsilon,
            sat_level,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// One explicit-Euler step; returns the saturated derivative estimate.
    pub fn step(&mut self, h: f64, y: f64) -> f64 {
        let e = y - self.x0;
        self.x0 += h * (self.x1 + 2.0 / self.epsilon * e);
        self.x1 += h * e / (self.epsilon * self.epsilon);
        self.x1.clamp(-self.sat_level, self.sat_level)
    }
}

/// Streams a series through an observer; output k uses samples 1..k.
/// The first output (no preceding interval) reuses the first interval width.
pub fn stream_levant(series: &SampleSeries, lipschitz: f64) -> Result<Vec<f64>> {
    let mut st = LevantState::new(lipschitz)?;
    Ok(stream(series, |h, y| st.step(h, y)))
}

pub fn stream_hgo(series: &SampleSeries, epsilon: f64, sat_level: f64) -> Result<Vec<f64>> {
    let mut st = HgoState::new(epsilon, sat_level)?;
    Ok(stream(series, |h, y| st.step(h, y)))
}

fn stream<F: FnMut(f64, f64) -> f64>(series: &SampleSeries, mut step: F) -> Vec<f64> {
    let knots = series.grid().knots();
    let h0 = knots[1] - knots[0];
    series
        .iter()
        .enumerate()
        .map(|(k, (_, y))| {
            let h = if k == 0 { h0 } else { knots[k] - knots[k - 1] };
            step(h, y)
        })
        .collect()
}

/// Grid search over ε ∈ logspace(1e-3, 1), 25 points, minimizing steady-state
/// RMSE against the analytic derivative on a tuning seed.
pub fn tune_hgo(scenario: &ScenarioSpec) -> Result<f64> {
    let grid = generate_grid(scenario)?;
    if grid.len() < 4 {
        return Err(Error::InvalidScenario(format!(
            "tuning scenario too coarse: only {} knots",
            grid.len()
        )));
    }
    let series = sample_signal(&grid, scenario);
    let truth: Vec<f64> = grid.knots().iter().map(|&t| test_signal(t).1).collect();
    let mut best = (f64::INFINITY, 1e-3);
    for i in 0..25 {
        let eps = 10f64.powf(-3.0 + 3.0 * i as f64 / 24.0);
        let est = stream_hgo(&series, eps, DEFAULT_HGO_SAT)?;
        let rmse = rmse_full(&est, &truth, &grid)?;
        if rmse < best.0 {
            best = (rmse, eps);
        }
    }
    Ok(best.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TimeGrid;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn levant_integrates_on_sliding_surface() {
        // e = 0: pure integration x0' = x0 + h c, x1 unchanged
        let mut st = LevantState::new(1.0).unwrap();
        st.x0 = 3.0;
        st.x1 = 2.0;
        let z = st.step(0.1, 3.0);
        assert_abs_diff_eq!(st.x0, 3.2, epsilon = 1e-15);
        assert_abs_diff_eq!(z, 2.0, epsilon = 1e-15);
    }

    #[test]
    fn levant_error_envelope_decreases_on_constant_input() {
        let mut st = LevantState::new(1.0).unwrap();
        let mut errs = Vec::new();
        for _ in 0..100 {
            st.step(0.001, 1.0);
            errs.push((st.x0 - 1.0).abs());
        }
        assert!(errs[99] < errs[0]);
        // monotone over the first steps (before any sliding chatter)
        for w in errs[..20].windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn levant_translation_equivariance() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let ys: Vec<f64> = (0..50).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let shift = 7.25;
        let mut a = LevantState::new(2.0).unwrap();
        let mut b = LevantState::new(2.0).unwrap();
        b.x0 = shift;
        for &y in &ys {
            let za = a.step(0.01, y);
            let zb = b.step(0.01, y + shift);
            assert_abs_diff_eq!(za, zb, epsilon = 1e-12);
            assert_abs_diff_eq!(a.x0 + shift, b.x0, epsilon = 1e-12);
        }
    }

    #[test]
    fn hgo_fixed_point() {
        let mut st = HgoState::new(0.1, 2.5).unwrap();
        st.x0 = 4.0;
        st.x1 = 0.0;
        st.step(0.01, 4.0);
        assert_eq!(st.x0, 4.0);
        assert_eq!(st.x1, 0.0);
    }

    #[test]
    fn hgo_tracks_ramp_slope() {
        // linear-observer settling: within 5% of slope 1 after 20ε of time
        let mut st = HgoState::new(0.05, 2.5).unwrap();
        let h = 0.001;
        let mut z = 0.0;
        let mut t = 0.0;
        while t < 2.0 {
            t += h;
            z = st.step(h, t);
        }
        assert!((z - 1.0).abs() < 0.05, "z = {z}");
    }

    #[test]
    fn hgo_saturates_output() {
        let mut st = HgoState::new(0.001, 2.5).unwrap();
        for k in 0..200 {
            let z = st.step(0.01, (k as f64) * 10.0);
            assert!(z.abs() <= 2.5);
        }
    }

    #[test]
    fn hgo_linear_in_y_before_saturation() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let ys: Vec<f64> = (0..80).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut a = HgoState::new(0.05, 1e12).unwrap();
        let mut b = HgoState::new(0.05, 1e12).unwrap();
        for &y in &ys {
            let za = a.step(0.01, y);
            let zb = b.step(0.01, 2.0 * y);
            assert_abs_diff_eq!(zb, 2.0 * za, epsilon = 1e-12 * za.abs().max(1.0));
        }
    }

    #[test]
    fn streams_are_causal() {
        // prefix equality: outputs over a prefix match outputs over the full stream
        let spec = ScenarioSpec::new(0.01, 1e-3, 1.0, 5).unwrap();
        let grid = generate_grid(&spec).unwrap();
        let series = sample_signal(&grid, &spec);
        let half = series.len() / 2;
        let prefix = series.prefix(half);
        let runs: [(Vec<f64>, Vec<f64>); 2] = [
            (
                stream_levant(&series, 2.5).unwrap(),
                stream_levant(&prefix, 2.5).unwrap(),
            ),
            (
                stream_hgo(&series, 0.05, 2.5).unwrap(),
                stream_hgo(&prefix, 0.05, 2.5).unwrap(),
            ),
        ];
        for (full, pre) in &runs {
            assert_eq!(&full[..half], &pre[..]);
        }
    }

    #[test]
    fn levant_steady_state_rmse_near_table_value() {
        // fine sampling, low noise: steady-state RMSE within a factor 2 of
        // 0.0260 across 10 seeds (median)
        let mut rmses = Vec::new();
        for seed in 0..10 {
            let spec = ScenarioSpec::new(0.001, 1e-4, 1.95, 100 + seed).unwrap();
            let grid = generate_grid(&spec).unwrap();
            let series = sample_signal(&grid, &spec);
            let est = stream_levant(&series, DEFAULT_LEVANT_L).unwrap();
            let truth: Vec<f64> = grid.knots().iter().map(|&t| test_signal(t).1).collect();
            rmses.push(rmse_full(&est, &truth, &grid).unwrap());
        }
        rmses.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = rmses[5];
        assert!(
            median > 0.0260 / 2.0 && median < 0.0260 * 2.0,
            "median RMSE {median}"
        );
    }

    #[test]
    fn tune_hgo_grid_membership_and_monotonicity() {
        let quiet = ScenarioSpec::new(0.001, 0.0, 1.95, 7).unwrap();
        let noisy = ScenarioSpec::new(0.001, 0.01, 1.95, 7).unwrap();
        let e_quiet = tune_hgo(&quiet).unwrap();
        let e_noisy = tune_hgo(&noisy).unwrap();
        assert!(e_quiet <= 0.02, "noise-free eps {e_quiet}");
        assert!(e_noisy > e_quiet, "noisy {e_noisy} vs quiet {e_quiet}");
        // returned value lies on the 25-point log grid
        let on_grid = (0..25).any(|i| {
            let g = 10f64.powf(-3.0 + 3.0 * i as f64 / 24.0);
            (g - e_quiet).abs() < 1e-12 * g
        });
        assert!(on_grid);
    }

    #[test]
    fn tune_hgo_rejects_degenerate_scenario() {
        let spec = ScenarioSpec::new(0.9, 0.0, 1.95, 0).unwrap();
        assert!(tune_hgo(&spec).is_err());
    }

    #[test]
    fn stream_uses_actual_intervals() {
        // irregular grid: first step uses h_1, later steps the preceding gap
        let grid = TimeGrid::new(vec![0.0, 0.5, 2.0]).unwrap();
        let series = SampleSeries::new(grid, vec![0.0, 0.5, 2.0]).unwrap();
        let out = stream_hgo(&series, 0.05, 1e9).unwrap();
        let mut st = HgoState::new(0.05, 1e9).unwrap();
        let manual = vec![st.step(0.5, 0.0), st.step(0.5, 0.5), st.step(1.5, 2.0)];
        assert_eq!(out, manual);
    }
}
