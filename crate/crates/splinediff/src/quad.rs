//! Quadratic (m = 1) spline parameterization.
//!
//! The derivative estimate on piece i is the quadratic
//!
//! ```text
//! z_i(t) = ((t-t_i)^2 z_{i+1} + (t-t_i)(t-t_{i+1}) p_i + (t-t_{i+1})^2 z_i) / h_i^2
//! ```
//!
//! parameterized by interval coefficients p_1..p_{K-1} plus the signal value
//! x(t_1). Knot values z_1..z_K are eliminated through first-derivative
//! continuity and natural (zero second derivative) boundary conditions, which
//! makes the p -> z map linear.

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use nalgebra::DMatrix;

pub const MIN_KNOTS: usize = 4;

fn check_k(grid: &TimeGrid) -> Result<()> {
    if grid.len() < MIN_KNOTS {
        return Err(Error::TooFewKnots {
            needed: MIN_KNOTS,
            got: grid.len(),
        });
    }
    Ok(())
}

/// Nonzero p-coefficients (column, value) of a row of the p -> z map.
///
/// Row r (zero-based) gives z_{r+1}; interior rows come from derivative
/// continuity, the first and last rows from the natural boundary conditions.
pub(crate) fn z_row(h: &[f64], r: usize) -> [(usize, f64); 2] {
    let km1 = h.len();
    if r == 0 {
        let (h1, h2) = (h[0], h[1]);
        let d = 2.0 * (h1 + h2);
        [(0, -(2.0 * h1 + h2) / d), (1, h1 / d)]
    } else if r == km1 {
        let (ha, hb) = (h[km1 - 2], h[km1 - 1]);
        let d = 2.0 * (ha + hb);
        [(km1 - 2, hb / d), (km1 - 1, -(2.0 * hb + ha) / d)]
    } else {
        let d = 2.0 * (h[r - 1] + h[r]);
        [(r - 1, -h[r] / d), (r, -h[r - 1] / d)]
    }
}

/// Knot derivative values z_1..z_K from the interval parameters p_1..p_{K-1}.
pub fn p_to_z(p: &[f64], grid: &TimeGrid) -> Result<Vec<f64>> {
    check_k(grid)?;
    let k = grid.len();
    if p.len() != k - 1 {
        return Err(Error::LengthMismatch {
            expected: k - 1,
            got: p.len(),
        });
    }
    let h = grid.intervals();
    let z = (0..k)
        .map(|r| z_row(&h, r).iter().map(|&(c, v)| v * p[c]).sum())
        .collect();
    Ok(z)
}

/// The m = 1 derivative estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticSplineModel {
    grid: TimeGrid,
    x0: f64,
    p: Vec<f64>,
    z: Vec<f64>,
    lambda: f64,
}

impl QuadraticSplineModel {
    pub fn new(grid: TimeGrid, x0: f64, p: Vec<f64>, lambda: f64) -> Result<Self> {
        let z = p_to_z(&p, &grid)?;
        Ok(QuadraticSplineModel {
            grid,
            x0,
            p,
            z,
            lambda,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// z at the knots (derived through the p -> z map).
    pub fn knot_derivatives(&self) -> &[f64] {
        &self.z
    }

    /// Evaluates the derivative estimate z(t); no extrapolation.
    pub fn eval_derivative(&self, t: f64) -> Result<f64> {
        let i = self.grid.locate(t)?;
        let (ti, tip) = (self.grid.knots()[i], self.grid.knots()[i + 1]);
        let hi = tip - ti;
        Ok(((t - ti).powi(2) * self.z[i + 1]
            + (t - ti) * (t - tip) * self.p[i]
            + (t - tip).powi(2) * self.z[i])
            / (hi * hi))
    }
}

/// Integral of the spline over interval i as p-coefficients: the three
/// nonzero contributions h_i/3 (z_{i+1} + z_i) - h_i/6 p_i.
pub(crate) fn interval_integral_terms(h: &[f64], i: usize) -> [(usize, f64); 5] {
    let hi = h[i];
    let a = z_row(h, i);
    let b = z_row(h, i + 1);
    [
        (a[0].0, hi / 3.0 * a[0].1),
        (a[1].0, hi / 3.0 * a[1].1),
        (b[0].0, hi / 3.0 * b[0].1),
        (b[1].0, hi / 3.0 * b[1].1),
        (i, -hi / 6.0),
    ]
}

/// Design matrix C_K mapping [x0, p] to predicted measurements at the knots.
pub fn assemble_c(grid: &TimeGrid) -> Result<DMatrix<f64>> {
    check_k(grid)?;
    let k = grid.len();
    let h = grid.intervals();
    let mut c = DMatrix::zeros(k, k);
    let mut acc = vec![0.0; k - 1];
    for row in 0..k {
        c[(row, 0)] = 1.0;
        if row > 0 {
            for &(col, v) in &interval_integral_terms(&h, row - 1) {
                acc[col] += v;
            }
            for (col, &v) in acc.iter().enumerate() {
                c[(row, col + 1)] = v;
            }
        }
    }
    Ok(c)
}

/// Endpoint slopes of the spline derivative on interval i, as sparse
/// Z-coefficient rows: z'(t_i) = -(p_i + 2 z_i)/h_i, z'(t_{i+1}) = (2 z_{i+1} + p_i)/h_i.
/// Z-indices are offset by one for the leading x0 entry.
fn slope_rows(h: &[f64], i: usize) -> ([(usize, f64); 3], [(usize, f64); 3]) {
    let hi = h[i];
    let a = z_row(h, i);
    let b = z_row(h, i + 1);
    let u = [
        (a[0].0 + 1, -2.0 * a[0].1 / hi),
        (a[1].0 + 1, -2.0 * a[1].1 / hi),
        (i + 1, -1.0 / hi),
    ];
    let v = [
        (b[0].0 + 1, 2.0 * b[0].1 / hi),
        (b[1].0 + 1, 2.0 * b[1].1 / hi),
        (i + 1, 1.0 / hi),
    ];
    (u, v)
}

fn accumulate_slope_form<F: FnMut(usize, usize, f64)>(add: &mut F, h: &[f64], i: usize, sign: f64) {
    // For linear z' with endpoint values a, b: ∫ (z')^2 = h/3 (a^2 + a b + b^2).
    let (u, v) = slope_rows(h, i);
    let w = sign * h[i] / 3.0;
    for &(r, ur) in &u {
        for &(c, uc) in &u {
            add(r, c, w * ur * uc);
        }
        for &(c, vc) in &v {
            add(r, c, w * 0.5 * ur * vc);
        }
    }
    for &(r, vr) in &v {
        for &(c, vc) in &v {
            add(r, c, w * vr * vc);
        }
        for &(c, uc) in &u {
            add(r, c, w * 0.5 * vr * uc);
        }
    }
}

/// Penalty matrix Q_K with Z^T Q_K Z = ∫ (z'(τ))² dτ; symmetric PSD, first
/// row and column zero.
pub fn assemble_q(grid: &TimeGrid) -> Result<DMatrix<f64>> {
    check_k(grid)?;
    let k = grid.len();
    let h = grid.intervals();
    let mut q = DMatrix::zeros(k, k);
    for i in 0..k - 1 {
        accumulate_slope_form(&mut |r, c, v| q[(r, c)] += v, &h, i, 1.0);
    }
    Ok(q)
}

/// Pieces of the K -> K+1 design-matrix correction, computed from the
/// construction rather than transcribed closed forms.
pub struct DeltaC {
    /// Change in the old last row of C, nonzero at Z-indices K-2, K-1, K.
    pub row1: [f64; 3],
    /// Full new last row of C_{K+1} (length K+1).
    pub row2: Vec<f64>,
}

/// `h_old`: intervals of the K-knot grid; `h_new_last`: the appended interval;
/// `c_last`: last row of C_K (length K).
pub fn delta_c(h_old: &[f64], h_new_last: f64, c_last: &[f64]) -> DeltaC {
    let k = h_old.len() + 1; // old knot count
    let hb = h_old[h_old.len() - 1];
    let mut h_new = h_old.to_vec();
    h_new.push(h_new_last);

    // row1[1..] = h_{K-1}/3 (new z_K row - old z_K row), supported on
    // p columns K-3 .. K-1 (Z indices K-2 .. K).
    let old_last = z_row(h_old, k - 1);
    let new_interior = z_row(&h_new, k - 1);
    let mut row1 = [0.0; 3];
    let base = k - 2; // Z index of the first nonzero
    for &(c, v) in &new_interior {
        row1[c + 1 - base] += hb / 3.0 * v;
    }
    for &(c, v) in &old_last {
        row1[c + 1 - base] -= hb / 3.0 * v;
    }

    // new last row = old last row + row1 + integral over the new interval
    let mut row2 = vec![0.0; k + 1];
    row2[..k].copy_from_slice(c_last);
    for (j, v) in row1.iter().enumerate() {
        row2[base + j] += v;
    }
    for &(c, v) in &interval_integral_terms(&h_new, k - 1) {
        row2[c + 1] += v;
    }
    DeltaC { row1, row2 }
}

/// The 3x3 lower-right correction of the penalty matrix for K -> K+1,
/// acting on Z-indices K-2, K-1, K.
pub fn delta_q(h_old: &[f64], h_new_last: f64) -> [[f64; 3]; 3] {
    let k = h_old.len() + 1;
    let mut h_new = h_old.to_vec();
    h_new.push(h_new_last);
    let base = k - 2;

    // Only the two last intervals of the new grid and the last interval of
    // the old grid change; their slope forms touch only Z-indices K-2..K.
    let mut out = [[0.0; 3]; 3];
    {
        let mut add = |r: usize, c: usize, v: f64| {
            debug_assert!(r >= base && c >= base);
            out[r - base][c - base] += v;
        };
        accumulate_slope_form(&mut add, &h_new, k - 2, 1.0);
        accumulate_slope_form(&mut add, &h_new, k - 1, 1.0);
        accumulate_slope_form(&mut add, h_old, k - 2, -1.0);
    }
    out
}
