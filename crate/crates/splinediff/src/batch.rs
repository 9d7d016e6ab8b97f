//! Batch solver for the penalized least-squares system A_K Z_K = C_K^T Y_K,
//! A_K = C_K^T C_K + λ Q_K, for either spline order.

use crate::error::{Error, Result};
use crate::grid::SampleSeries;
use crate::quad::{self, QuadraticSplineModel};
use crate::zero::{self, ZeroOrderSplineModel};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub const CONDITION_LIMIT: f64 = 1e14;
const RESIDUAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplineOrder {
    Zero,
    Quadratic,
}

impl SplineOrder {
    pub fn min_knots(self) -> usize {
        match self {
            SplineOrder::Zero => zero::MIN_KNOTS,
            SplineOrder::Quadratic => quad::MIN_KNOTS,
        }
    }

    pub fn from_index(i: u8) -> Result<Self> {
        match i {
            0 => Ok(SplineOrder::Zero),
            1 => Ok(SplineOrder::Quadratic),
            other => Err(Error::UnsupportedConfig(format!("spline order {other}; only 0 and 1 are implemented"))),
        }
    }

    pub fn index(self) -> u8 {
        match self {
            SplineOrder::Zero => 0,
            SplineOrder::Quadratic => 1,
        }
    }
}

/// Either spline estimate behind one interface.
#[derive(Debug, Clone, PartialEq)]
pub enum SplineModel {
    Zero(ZeroOrderSplineModel),
    Quadratic(QuadraticSplineModel),
}

impl SplineModel {
    pub fn order(&self) -> SplineOrder {
        match self {
            SplineModel::Zero(_) => SplineOrder::Zero,
            SplineModel::Quadratic(_) => SplineOrder::Quadratic,
        }
    }

    pub fn eval_derivative(&self, t: f64) -> Result<f64> {
        match self {
            SplineModel::Zero(m) => m.eval_derivative(t),
            SplineModel::Quadratic(m) => m.eval_derivative(t),
        }
    }

    /// Derivative estimates at the knots.
    pub fn knot_derivatives(&self) -> Vec<f64> {
        match self {
            SplineModel::Zero(m) => m.knot_derivatives(),
            SplineModel::Quadratic(m) => m.knot_derivatives().to_vec(),
        }
    }

    pub fn grid(&self) -> &crate::grid::TimeGrid {
        match self {
            SplineModel::Zero(m) => m.grid(),
            SplineModel::Quadratic(m) => m.grid(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BatchSolution {
    pub model: SplineModel,
    /// ‖C_K Z_K − Y_K‖
    pub residual_norm: f64,
    /// Z_K^T Q_K Z_K
    pub penalty_value: f64,
}

pub(crate) fn assemble(
    series: &SampleSeries,
    order: SplineOrder,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let grid = series.grid();
    match order {
        SplineOrder::Zero => Ok((zero::assemble_c(grid)?, zero::assemble_q(grid)?)),
        SplineOrder::Quadratic => Ok((quad::assemble_c(grid)?, quad::assemble_q(grid)?)),
    }
}

/// Solves A z = rhs by Cholesky with LU fallback, one round of iterative
/// refinement, a condition estimate from the factor diagonal, and a final
/// residual check.
pub(crate) fn solve_system(
    a: &DMatrix<f64>,
    rhs: &DVector<f64>,
    lambda: f64,
) -> Result<DVector<f64>> {
    let k = a.nrows();
    enum Fact {
        Chol(nalgebra::Cholesky<f64, nalgebra::Dyn>),
        Lu(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
    }
    let fact = match a.clone().cholesky() {
        Some(c) => {
            let diag = c.l_dirty().diagonal();
            let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
            for &d in diag.iter() {
                lo = lo.min(d.abs());
                hi = hi.max(d.abs());
            }
            let cond = (hi / lo).powi(2);
            if !cond.is_finite() || cond > CONDITION_LIMIT {
                return Err(Error::SingularSystem { lambda, k, cond });
            }
            Fact::Chol(c)
        }
        None => {
            let lu = a.clone().lu();
            let diag = lu.u().diagonal();
            let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
            for &d in diag.iter() {
                lo = lo.min(d.abs());
                hi = hi.max(d.abs());
            }
            let cond = hi / lo;
            if lo == 0.0 || !cond.is_finite() || cond > CONDITION_LIMIT {
                return Err(Error::SingularSystem { lambda, k, cond });
            }
            Fact::Lu(lu)
        }
    };
    let solve = |b: &DVector<f64>| -> Option<DVector<f64>> {
        match &fact {
            Fact::Chol(c) => Some(c.solve(b)),
            Fact::Lu(lu) => lu.solve(b),
        }
    };
    let mut z = solve(rhs).ok_or(Error::SingularSystem {
        lambda,
        k,
        cond: f64::INFINITY,
    })?;
    let rhs_norm = rhs.norm().max(f64::MIN_POSITIVE);
    for _ in 0..3 {
        let r = rhs - a * &z;
        if r.norm() <= RESIDUAL_TOL * rhs_norm {
            break;
        }
        if let Some(dz) = solve(&r) {
            z += dz;
        } else {
            break;
        }
    }
    let r = (rhs - a * &z).norm();
    if r > RESIDUAL_TOL * rhs_norm {
        return Err(Error::SingularSystem {
            lambda,
            k,
            cond: r / rhs_norm / f64::EPSILON,
        });
    }
    Ok(z)
}

/// Explicit inverse, used to seed the recursive solver.
pub(crate) fn invert(a: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
    let k = a.nrows();
    if let Some(c) = a.clone().cholesky() {
        return Ok(c.inverse());
    }
    a.clone().try_inverse().ok_or(Error::SingularSystem {
        lambda,
        k,
        cond: f64::INFINITY,
    })
}

/// Forms G = CᵀC and r = CᵀY in O(K²) by exploiting the cumulative row
/// structure of both design matrices: consecutive rows of C differ in at most
/// a handful of entries (the integral over one new interval). Writing
/// d_r = c_r − c_{r−1} (d_0 = c_0) gives c_k = Σ_{r≤k} d_r, hence
/// G = Σ_{r,s} (K − max(r,s)) d_r d_sᵀ, accumulated with a running suffix
/// vector u_r = Σ_{s>r} (K − s) d_s at O(nnz·K) per row.
pub(crate) fn normal_equations(c: &DMatrix<f64>, y: &DVector<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let n = c.nrows();
    let k = c.ncols();
    let mut g = DMatrix::zeros(k, k);
    let mut rhs = DVector::zeros(k);
    let mut u = DVector::<f64>::zeros(k);
    let mut y_suffix = 0.0;
    let mut nz: Vec<(usize, f64)> = Vec::new();
    for r in (0..n).rev() {
        nz.clear();
        for j in 0..k {
            let v = if r == 0 {
                c[(0, j)]
            } else {
                c[(r, j)] - c[(r - 1, j)]
            };
            if v != 0.0 {
                nz.push((j, v));
            }
        }
        let w = (n - r) as f64;
        y_suffix += y[r];
        for &(i, v) in &nz {
            rhs[i] += v * y_suffix;
            for j in 0..k {
                let t = v * u[j];
                g[(i, j)] += t;
                g[(j, i)] += t;
            }
            for &(j, v2) in &nz {
                g[(i, j)] += w * v * v2;
            }
        }
        for &(i, v) in &nz {
            u[i] += w * v;
        }
    }
    (g, rhs)
}

/// Minimizes ‖C_K Z − Y‖² + λ Z^T Q_K Z over the spline parameters.
pub fn solve_batch(series: &SampleSeries, order: SplineOrder, lambda: f64) -> Result<BatchSolution> {
    if lambda < 0.0 {
        return Err(Error::UnsupportedConfig(format!("lambda must be >= 0, got {lambda}")));
    }
    let (c, q) = assemble(series, order)?;
    let y = DVector::from_column_slice(series.values());
    let (g, rhs) = normal_equations(&c, &y);
    let a = g + lambda * &q;
    let z = solve_system(&a, &rhs, lambda)?;
    let residual_norm = (&c * &z - &y).norm();
    let penalty_value = (&q * &z).dot(&z);
    let grid = series.grid().clone();
    let x0 = z[0];
    let params: Vec<f64> = z.iter().skip(1).copied().collect();
    let model = match order {
        SplineOrder::Zero => SplineModel::Zero(ZeroOrderSplineModel::new(grid, x0, params, lambda)?),
        SplineOrder::Quadratic => {
            SplineModel::Quadratic(QuadraticSplineModel::new(grid, x0, params, lambda)?)
        }
    };
    Ok(BatchSolution {
        model,
        residual_norm,
        penalty_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{SampleSeries, TimeGrid};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn random_series(rng: &mut ChaCha12Rng, k: usize, scale: f64) -> SampleSeries {
        let mut knots = vec![0.0];
        for _ in 0..k - 1 {
            knots.push(knots.last().unwrap() + rng.gen_range(0.5..1.5) * scale);
        }
        let values = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
        SampleSeries::new(TimeGrid::new(knots).unwrap(), values).unwrap()
    }

    #[test]
    fn normal_equations_match_dense_products() {
        let mut rng = ChaCha12Rng::seed_from_u64(77);
        for _ in 0..30 {
            let k = rng.gen_range(5..40);
            let series = random_series(&mut rng, k, 0.2);
            for order in [SplineOrder::Zero, SplineOrder::Quadratic] {
                let (c, _) = assemble(&series, order).unwrap();
                let y = DVector::from_column_slice(series.values());
                let (g, rhs) = normal_equations(&c, &y);
                let g_ref = c.tr_mul(&c);
                let rhs_ref = c.tr_mul(&y);
                assert_abs_diff_eq!(g, g_ref, epsilon = 1e-11 * g_ref.norm());
                assert_abs_diff_eq!(rhs, rhs_ref, epsilon = 1e-12 * rhs_ref.norm().max(1.0));
            }
        }
    }

    #[test]
    fn zero_order_interpolates_linear_data() {
        let grid = TimeGrid::new(vec![0.0, 1.0, 2.0]).unwrap();
        let series = SampleSeries::new(grid, vec![1.0, 3.0, 5.0]).unwrap();
        let sol = solve_batch(&series, SplineOrder::Zero, 0.0).unwrap();
        let SplineModel::Zero(m) = &sol.model else { panic!() };
        assert_abs_diff_eq!(m.x0(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.interval_derivatives()[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.interval_derivatives()[1], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.residual_norm, 0.0, epsilon = 1e-10);
    }

    #[test]
    fn quadratic_recovers_polynomial_derivative() {
        // noise-free samples of x(t) = 3 + 2t - t^2; z(t) = 2 - 2t is linear,
        // exactly representable, and satisfies the natural boundary conditions.
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let mut knots = vec![0.0];
        for _ in 0..9 {
            knots.push(knots.last().unwrap() + rng.gen_range(0.05..0.3));
        }
        let grid = TimeGrid::new(knots).unwrap();
        let values: Vec<f64> = grid.knots().iter().map(|&t| 3.0 + 2.0 * t - t * t).collect();
        let series = SampleSeries::new(grid.clone(), values).unwrap();
        let sol = solve_batch(&series, SplineOrder::Quadratic, 1e-12).unwrap();
        for &t in grid.knots() {
            assert_abs_diff_eq!(sol.model.eval_derivative(t).unwrap(), 2.0 - 2.0 * t, epsilon = 1e-5);
        }
    }

    #[test]
    fn matches_conjugate_gradient_minimizer() {
        // independent oracle: generic CG minimization of the quadratic objective
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        let series = random_series(&mut rng, 20, 0.2);
        let lambda = 1e-4;
        let sol = solve_batch(&series, SplineOrder::Quadratic, lambda).unwrap();
        let (c, q) = assemble(&series, SplineOrder::Quadratic).unwrap();
        let y = DVector::from_column_slice(series.values());
        // CG on grad f = 2 (C^T C + λQ) Z - 2 C^T y, implemented from scratch
        let apply = |v: &DVector<f64>| c.tr_mul(&(&c * v)) + lambda * (&q * v);
        let b = c.tr_mul(&y);
        let n = 20;
        let mut z = DVector::zeros(n);
        let mut r = b.clone();
        let mut p = r.clone();
        let mut rs = r.dot(&r);
        for _ in 0..500 {
            let ap = apply(&p);
            let alpha = rs / p.dot(&ap);
            z += alpha * &p;
            r -= alpha * ap;
            let rs_new = r.dot(&r);
            if rs_new.sqrt() < 1e-14 * b.norm() {
                break;
            }
            p = &r + (rs_new / rs) * p;
            rs = rs_new;
        }
        let SplineModel::Quadratic(m) = &sol.model else { panic!() };
        let mut zk = DVector::from_column_slice(m.p());
        zk = zk.insert_row(0, m.x0());
        assert!((&zk - &z).norm() / z.norm() < 1e-8, "rel err {}", (&zk - &z).norm() / z.norm());
    }

    #[test]
    fn gradient_vanishes_at_solution() {
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        for &order in &[SplineOrder::Zero, SplineOrder::Quadratic] {
            let series = random_series(&mut rng, 30, 0.1);
            let lambda = 1e-3;
            let sol = solve_batch(&series, order, lambda).unwrap();
            let (c, q) = assemble(&series, order).unwrap();
            let y = DVector::from_column_slice(series.values());
            let z = match &sol.model {
                SplineModel::Zero(m) => {
                    let mut v = DVector::from_column_slice(m.interval_derivatives());
                    v = v.insert_row(0, m.x0());
                    v
                }
                SplineModel::Quadratic(m) => {
                    let mut v = DVector::from_column_slice(m.p());
                    v = v.insert_row(0, m.x0());
                    v
                }
            };
            let rhs = c.tr_mul(&y);
            let grad = 2.0 * ((c.tr_mul(&c) + lambda * &q) * &z - &rhs);
            assert!(grad.norm() <= 1e-8 * rhs.norm().max(1.0));
        }
    }

    #[test]
    fn penalty_is_non_increasing_in_lambda() {
        let mut rng = ChaCha12Rng::seed_from_u64(14);
        for &order in &[SplineOrder::Zero, SplineOrder::Quadratic] {
            let series = random_series(&mut rng, 25, 0.2);
            let mut last = f64::INFINITY;
            for &lambda in &[1e-6, 1e-4, 1e-2, 1.0] {
                let sol = solve_batch(&series, order, lambda).unwrap();
                assert!(sol.penalty_value <= last * (1.0 + 1e-9), "penalty increased");
                last = sol.penalty_value;
            }
        }
    }

    #[test]
    fn zero_order_lambda_zero_interpolates_exactly() {
        let mut rng = ChaCha12Rng::seed_from_u64(15);
        let series = random_series(&mut rng, 15, 1.0);
        let sol = solve_batch(&series, SplineOrder::Zero, 0.0).unwrap();
        assert!(sol.residual_norm <= 1e-9);
    }

    #[test]
    fn rejects_negative_lambda_and_short_series() {
        let grid = TimeGrid::new(vec![0.0, 1.0, 2.0]).unwrap();
        let series = SampleSeries::new(grid, vec![0.0, 1.0, 2.0]).unwrap();
        assert!(solve_batch(&series, SplineOrder::Zero, -1.0).is_err());
        assert!(solve_batch(&series, SplineOrder::Quadratic, 1e-4).is_err());
    }
}
