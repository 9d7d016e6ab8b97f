//! Zero-order (m = 0) piecewise-constant estimator.
//!
//! Pieces are right-open, with the single closure z_{K-1}(t_K) = z_{K-1};
//! no boundary conditions are needed.

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use nalgebra::DMatrix;

pub const MIN_KNOTS: usize = 2;

fn check_k(grid: &TimeGrid) -> Result<()> {
    if grid.len() < MIN_KNOTS {
        return Err(Error::TooFewKnots {
            needed: MIN_KNOTS,
            got: grid.len(),
        });
    }
    Ok(())
}

/// The m = 0 derivative estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroOrderSplineModel {
    grid: TimeGrid,
    x0: f64,
    z: Vec<f64>,
    lambda: f64,
}

impl ZeroOrderSplineModel {
    pub fn new(grid: TimeGrid, x0: f64, z: Vec<f64>, lambda: f64) -> Result<Self> {
        check_k(&grid)?;
        if z.len() != grid.len() - 1 {
            return Err(Error::LengthMismatch {
                expected: grid.len() - 1,
                got: z.len(),
            });
        }
        Ok(ZeroOrderSplineModel { grid, x0, z, lambda })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Per-interval derivative values z_1..z_{K-1}.
    pub fn interval_derivatives(&self) -> &[f64] {
        &self.z
    }

    /// Derivative values at the knots; the last knot takes z_{K-1}.
    pub fn knot_derivatives(&self) -> Vec<f64> {
        let mut out = self.z.clone();
        out.push(*self.z.last().unwrap());
        out
    }

    pub fn eval_derivative(&self, t: f64) -> Result<f64> {
        Ok(self.z[self.grid.locate(t)?])
    }
}

/// Lower-triangular design matrix with unit first column and cumulative
/// interval pattern.
pub fn assemble_c(grid: &TimeGrid) -> Result<DMatrix<f64>> {
    check_k(grid)?;
    let k = grid.len();
    let h = grid.intervals();
    let mut c = DMatrix::zeros(k, k);
    for row in 0..k {
        c[(row, 0)] = 1.0;
        for col in 1..=row {
            c[(row, col)] = h[col - 1];
        }
    }
    Ok(c)
}

/// Q_K = diag(0, h_1, ..., h_{K-1}).
pub fn assemble_q(grid: &TimeGrid) -> Result<DMatrix<f64>> {
    check_k(grid)?;
    let k = grid.len();
    let h = grid.intervals();
    let mut q = DMatrix::zeros(k, k);
    for i in 1..k {
        q[(i, i)] = h[i - 1];
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn matrices_direct_substitution() {
        let grid = TimeGrid::new(vec![0.0, 0.5, 1.5]).unwrap();
        let c = assemble_c(&grid).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 1.0, 0.5, 0.0, 1.0, 0.5, 1.0]);
        assert_eq!(c, expected);
        let q = assemble_q(&grid).unwrap();
        assert_eq!(q, DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&[0.0, 0.5, 1.0])));
    }

    #[test]
    fn determinant_is_product_of_intervals() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        for _ in 0..10 {
            let k = rng.gen_range(2..12);
            let mut knots = vec![0.0];
            for _ in 0..k - 1 {
                knots.push(knots.last().unwrap() + rng.gen_range(0.1..2.0));
            }
            let grid = TimeGrid::new(knots).unwrap();
            let det = assemble_c(&grid).unwrap().determinant();
            let prod: f64 = grid.intervals().iter().product();
            assert_abs_diff_eq!(det, prod, epsilon = 1e-10 * prod.abs());
        }
    }

    #[test]
    fn quadratic_form_equals_piecewise_integral() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let grid = TimeGrid::new(vec![0.0, 0.4, 1.0, 2.5, 3.0]).unwrap();
        let z: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let mut zk = nalgebra::DVector::from_column_slice(&z);
        zk = zk.insert_row(0, rng.gen_range(-1.0..1.0));
        let q = assemble_q(&grid).unwrap();
        let form = (q * zk.clone()).dot(&zk);
        let exact: f64 = grid
            .intervals()
            .iter()
            .zip(&z)
            .map(|(h, zi)| h * zi * zi)
            .sum();
        assert_abs_diff_eq!(form, exact, epsilon = 1e-14);
    }

    #[test]
    fn eval_is_right_open_with_closure_at_end() {
        let grid = TimeGrid::new(vec![0.0, 1.0, 2.0]).unwrap();
        let m = ZeroOrderSplineModel::new(grid, 0.0, vec![5.0, 7.0], 0.0).unwrap();
        assert_eq!(m.eval_derivative(0.999).unwrap(), 5.0);
        assert_eq!(m.eval_derivative(1.0).unwrap(), 7.0);
        assert_eq!(m.eval_derivative(2.0).unwrap(), 7.0);
        assert!(m.eval_derivative(2.1).is_err());
    }

    #[test]
    fn constant_model_everywhere() {
        let grid = TimeGrid::new(vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let m = ZeroOrderSplineModel::new(grid, 0.0, vec![3.0; 3], 0.0).unwrap();
        for t in [0.0, 0.5, 1.5, 2.999, 3.0] {
            assert_eq!(m.eval_derivative(t).unwrap(), 3.0);
        }
    }
}
