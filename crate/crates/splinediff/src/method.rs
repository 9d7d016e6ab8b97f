//! Strategy registry: the four differentiators behind one trait, selected
//! by name (`spline2`, `spline0`, `levant`, `hgo`).

use crate::baseline::{stream_hgo, stream_levant};
use crate::batch::{solve_batch, SplineOrder};
use crate::error::{Error, Result};
use crate::grid::SampleSeries;
use crate::recursive;

pub const METHOD_NAMES: [&str; 4] = ["spline2", "spline0", "levant", "hgo"];

/// Shared tuning knobs; each method reads only the fields it uses.
#[derive(Debug, Clone, Copy)]
pub struct MethodParams {
    pub lambda: f64,
    pub levant_l: f64,
    pub hgo_eps: f64,
    pub hgo_sat: f64,
    /// Recursive-solver refactorization period (0 = disabled).
    pub refactor_every: usize,
}

impl Default for MethodParams {
    fn default() -> Self {
        MethodParams {
            lambda: 1e-4,
            levant_l: crate::baseline::DEFAULT_LEVANT_L,
            hgo_eps: 0.05,
            hgo_sat: crate::baseline::DEFAULT_HGO_SAT,
            refactor_every: 0,
        }
    }
}

/// Endpoint estimates from the online scenario: `values[i]` estimates
/// z(t_{start+i}) using only samples 1..=start+i.
#[derive(Debug, Clone)]
pub struct OnlineEstimates {
    pub start: usize,
    pub values: Vec<f64>,
}

/// A derivative estimator usable in both evaluation scenarios.
pub trait Differentiator {
    fn name(&self) -> &'static str;

    /// Smallest series length the method accepts.
    fn min_knots(&self) -> usize;

    /// Full-interval scenario: derivative estimates at every knot, given the
    /// complete series.
    fn estimate_full(&self, series: &SampleSeries, params: &MethodParams) -> Result<Vec<f64>>;

    /// Online scenario: endpoint estimate per growing prefix.
    fn estimate_online(&self, series: &SampleSeries, params: &MethodParams)
        -> Result<OnlineEstimates>;
}

struct SplineMethod {
    order: SplineOrder,
}

impl SplineMethod {
    fn recursive_min(&self) -> usize {
        match self.order {
            SplineOrder::Zero => 2,
            SplineOrder::Quadratic => 5,
        }
    }
}

impl Differentiator for SplineMethod {
    fn name(&self) -> &'static str {
        match self.order {
            SplineOrder::Zero => "spline0",
            SplineOrder::Quadratic => "spline2",
        }
    }

    fn min_knots(&self) -> usize {
        self.order.min_knots()
    }

    fn estimate_full(&self, series: &SampleSeries, params: &MethodParams) -> Result<Vec<f64>> {
        let sol = solve_batch(series, self.order, params.lambda)?;
        Ok(sol.model.knot_derivatives())
    }

    fn estimate_online(
        &self,
        series: &SampleSeries,
        params: &MethodParams,
    ) -> Result<OnlineEstimates> {
        let k0 = self.recursive_min();
        if series.len() < k0 {
            return Err(Error::TooFewKnots {
                needed: k0,
                got: series.len(),
            });
        }
        let mut state = recursive::init(&series.prefix(k0), self.order, params.lambda)?;
        state.set_refactor_every(params.refactor_every);
        let mut values = vec![state.endpoint_estimate()];
        for k in k0..series.len() {
            state.update(series.grid().knots()[k], series.values()[k])?;
            values.push(state.endpoint_estimate());
        }
        Ok(OnlineEstimates {
            start: k0 - 1,
            values,
        })
    }
}

struct LevantMethod;

impl Differentiator for LevantMethod {
    fn name(&self) -> &'static str {
        "levant"
    }

    fn min_knots(&self) -> usize {
        2
    }

    fn estimate_full(&self, series: &SampleSeries, params: &MethodParams) -> Result<Vec<f64>> {
        stream_levant(series, params.levant_l)
    }

    fn estimate_online(
        &self,
        series: &SampleSeries,
        params: &MethodParams,
    ) -> Result<OnlineEstimates> {
        Ok(OnlineEstimates {
            start: 0,
            values: stream_levant(series, params.levant_l)?,
        })
    }
}

struct HgoMethod;

impl Differentiator for HgoMethod {
    fn name(&self) -> &'static str {
        "hgo"
    }

    fn min_knots(&self) -> usize {
        2
    }

    fn estimate_full(&self, series: &SampleSeries, params: &MethodParams) -> Result<Vec<f64>> {
        stream_hgo(series, params.hgo_eps, params.hgo_sat)
    }

    fn estimate_online(
        &self,
        series: &SampleSeries,
        params: &MethodParams,
    ) -> Result<OnlineEstimates> {
        Ok(OnlineEstimates {
            start: 0,
            values: stream_hgo(series, params.hgo_eps, params.hgo_sat)?,
        })
    }
}

/// Resolves a method by name.
pub fn lookup(name: &str) -> Result<Box<dyn Differentiator>> {
    match name {
        "spline2" => Ok(Box::new(SplineMethod {
            order: SplineOrder::Quadratic,
        })),
        "spline0" => Ok(Box::new(SplineMethod {
            order: SplineOrder::Zero,
        })),
        "levant" => Ok(Box::new(LevantMethod)),
        "hgo" => Ok(Box::new(HgoMethod)),
        other => Err(Error::UnknownMethod(other.to_string())),
    }
}

/// All registered methods, in the canonical table order.
pub fn all_methods() -> Vec<Box<dyn Differentiator>> {
    METHOD_NAMES
        .iter()
        .map(|n| lookup(n).expect("registry names resolve"))
        .collect()
}
