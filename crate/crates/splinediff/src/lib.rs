//! Maximum-likelihood spline differentiation of coarsely, non-uniformly,
//! noisily sampled signals.
//!
//! The estimator fits a spline to the *derivative* of the measured signal by
//! penalized least squares: the integrated spline must track the samples
//! while the L² norm of the spline's own derivative is penalized with weight
//! λ. Two spline orders are provided — piecewise-constant ([`zero`]) and
//! C¹ quadratic with natural boundary conditions ([`quad`]) — with both a
//! batch solver ([`batch`]) and an O(K²)-per-sample online solver
//! ([`recursive`]). Reference differentiators (super-twisting, high-gain
//! observer; [`baseline`]) and a benchmark harness ([`bench`]) support
//! comparison studies on the built-in test signal ([`signal`]).

pub mod baseline;
pub mod batch;
pub mod bench;
pub mod csvio;
pub mod error;
pub mod grid;
pub mod method;
pub mod metrics;
pub mod quad;
pub mod recursive;
pub mod signal;
pub mod zero;

pub use batch::{solve_batch, BatchSolution, SplineModel, SplineOrder};
pub use error::{Error, Result};
pub use grid::{SampleSeries, TimeGrid};
pub use method::{lookup, Differentiator, MethodParams};
pub use quad::QuadraticSplineModel;
pub use recursive::RecursiveState;
pub use signal::{generate_grid, sample_signal, test_signal, ScenarioSpec};
pub use zero::ZeroOrderSplineModel;
