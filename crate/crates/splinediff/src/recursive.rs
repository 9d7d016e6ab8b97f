//! Online estimation: maintains A_K^{-1} and the current solution and folds
//! each new sample in with O(K²) arithmetic — low-rank Sherman-Morrison-
//! Woodbury corrections plus one block-matrix inversion step — instead of
//! refactorizing the grown system.

use crate::batch::{self, solve_batch, SplineModel, SplineOrder};
use crate::error::{Error, Result};
use crate::grid::{SampleSeries, TimeGrid};
use crate::quad::{self, QuadraticSplineModel};
use crate::zero::ZeroOrderSplineModel;
use nalgebra::{DMatrix, DVector, Matrix4};
use serde::{Deserialize, Serialize};

const BREAKDOWN_COND: f64 = 1e12;

/// Symmetric K×K matrix, lower triangle only, in a capacity-managed
/// column-major buffer (column stride = capacity; column j holds entries
/// i = j..K at offset j·cap + j). The border row/column for K+1 is appended
/// and all entries corrected in place — no reallocation or zero-fill of a
/// fresh (K+1)² matrix on every update, and half the memory traffic of full
/// storage, which dominates at large K.
#[derive(Debug, Clone)]
struct GrowMatrix {
    data: Vec<f64>,
    k: usize,
    cap: usize,
}

impl GrowMatrix {
    fn from_dmatrix(m: &DMatrix<f64>) -> GrowMatrix {
        let k = m.nrows();
        let cap = (2 * k).max(32);
        let mut g = GrowMatrix {
            data: vec![0.0; cap * cap],
            k,
            cap,
        };
        for j in 0..k {
            for i in j..k {
                g.data[j * cap + i] = 0.5 * (m[(i, j)] + m[(j, i)]);
            }
        }
        g
    }

    fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.k, self.k, |i, j| self.get(i, j))
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        if i >= j {
            self.data[j * self.cap + i]
        } else {
            self.data[i * self.cap + j]
        }
    }

    #[cfg(test)]
    fn entry_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        let (lo, hi) = if i >= j { (j, i) } else { (i, j) };
        &mut self.data[lo * self.cap + hi]
    }

    /// Stored entries of column j: rows j..K.
    fn col_lower(&self, j: usize) -> &[f64] {
        &self.data[j * self.cap + j..j * self.cap + self.k]
    }

    fn col_lower_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.cap + j..j * self.cap + self.k]
    }

    /// Materializes full column j (= row j, by symmetry).
    fn full_col(&self, j: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.k];
        for i in 0..j {
            out[i] = self.data[i * self.cap + j];
        }
        out[j..].copy_from_slice(self.col_lower(j));
        out
    }

    /// out[..K] = M x over the active block, reading each stored entry once.
    fn matvec(&self, x: &[f64], out: &mut [f64]) {
        let k = self.k;
        out[..k].fill(0.0);
        for j in 0..k {
            let cj = self.col_lower(j);
            let xj = x[j];
            let mut acc = cj[0] * xj; // diagonal
            for (i, &v) in cj.iter().enumerate().skip(1) {
                out[j + i] += v * xj;
                acc += v * x[j + i];
            }
            out[j] += acc;
        }
    }

    /// Adds coef · u uᵀ to the stored triangle.
    fn rank1_update(&mut self, coef: f64, u: &[f64]) {
        let k = self.k;
        let cap = self.cap;
        for j in 0..k {
            let w = coef * u[j];
            let col = &mut self.data[j * cap + j..j * cap + k];
            for (c, &ui) in col.iter_mut().zip(&u[j..k]) {
                *c += w * ui;
            }
        }
    }

    /// Appends the symmetric border (row and column K) and corner entry,
    /// growing the buffer geometrically when needed.
    fn append_border(&mut self, border: &[f64], corner: f64) {
        let k = self.k;
        debug_assert_eq!(border.len(), k);
        if k + 1 > self.cap {
            let cap2 = (2 * self.cap).max(32);
            let mut data2 = vec![0.0; cap2 * cap2];
            for j in 0..k {
                data2[j * cap2 + j..j * cap2 + k].copy_from_slice(self.col_lower(j));
            }
            self.data = data2;
            self.cap = cap2;
        }
        let cap = self.cap;
        for (j, &v) in border.iter().enumerate() {
            self.data[j * cap + k] = v;
        }
        self.data[k * cap + k] = corner;
        self.k = k + 1;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone)]
pub struct RecursiveState {
    order: SplineOrder,
    lambda: f64,
    grid: TimeGrid,
    values: Vec<f64>,
    a_inv: GrowMatrix,
    z_hat: DVector<f64>,
    /// C_K^T Y_K, maintained for the zero-order recursion.
    b_vec: Option<DVector<f64>>,
    /// Last row of C_K, cached for the quadratic recursion.
    c_last: Option<DVector<f64>>,
    update_count: usize,
    /// Refactorize every N updates; 0 disables.
    refactor_every: usize,
}

/// JSON-serializable snapshot for suspend/resume.
#[derive(Debug, Serialize, Deserialize)]
pub struct Snapshot {
    pub order: u8,
    pub lambda: f64,
    pub knots: Vec<f64>,
    pub values: Vec<f64>,
    pub z_hat: Vec<f64>,
    /// Row-major K×K inverse system matrix.
    pub a_inv: Vec<Vec<f64>>,
    pub update_count: usize,
    pub refactor_every: usize,
}

fn min_prefix(order: SplineOrder) -> usize {
    match order {
        SplineOrder::Zero => 2,
        SplineOrder::Quadratic => 5,
    }
}

/// Last row of the quadratic design matrix, in O(K).
fn quad_c_last_row(grid: &TimeGrid) -> DVector<f64> {
    let k = grid.len();
    let h = grid.intervals();
    let mut row = DVector::zeros(k);
    row[0] = 1.0;
    for i in 0..k - 1 {
        for &(col, v) in &quad::interval_integral_terms(&h, i) {
            row[col + 1] += v;
        }
    }
    row
}

/// C_K^T Y_K for the zero-order design matrix, in O(K) via suffix sums.
fn zero_b_vec(grid: &TimeGrid, values: &[f64]) -> DVector<f64> {
    let k = grid.len();
    let h = grid.intervals();
    let mut b = DVector::zeros(k);
    b[0] = values.iter().sum();
    let mut suffix = 0.0;
    for j in (1..k).rev() {
        suffix += values[j];
        b[j] = h[j - 1] * suffix;
    }
    b
}

/// Seeds the state with one batch solve over the series prefix plus an
/// explicit inversion of A_K.
pub fn init(series: &SampleSeries, order: SplineOrder, lambda: f64) -> Result<RecursiveState> {
    let need = min_prefix(order);
    if series.len() < need {
        return Err(Error::TooFewKnots {
            needed: need,
            got: series.len(),
        });
    }
    let sol = solve_batch(series, order, lambda)?;
    let (c, q) = batch::assemble(series, order)?;
    let y = DVector::from_column_slice(series.values());
    let a = batch::normal_equations(&c, &y).0 + lambda * &q;
    let a_inv = GrowMatrix::from_dmatrix(&batch::invert(&a, lambda)?);
    let z_hat = match &sol.model {
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
    let grid = series.grid().clone();
    let values = series.values().to_vec();
    let (b_vec, c_last) = match order {
        SplineOrder::Zero => (Some(zero_b_vec(&grid, &values)), None),
        SplineOrder::Quadratic => (None, Some(quad_c_last_row(&grid))),
    };
    Ok(RecursiveState {
        order,
        lambda,
        grid,
        values,
        a_inv,
        z_hat,
        b_vec,
        c_last,
        update_count: 0,
        refactor_every: 0,
    })
}

impl RecursiveState {
    pub fn order(&self) -> SplineOrder {
        self.order
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn update_count(&self) -> usize {
        self.update_count
    }

    pub fn set_refactor_every(&mut self, every: usize) {
        self.refactor_every = every;
    }

    /// Current solution vector Ẑ_K.
    pub fn solution(&self) -> &DVector<f64> {
        &self.z_hat
    }

    pub fn a_inv(&self) -> DMatrix<f64> {
        self.a_inv.to_dmatrix()
    }

    /// The estimate as a spline model over the current grid.
    pub fn current_model(&self) -> Result<SplineModel> {
        let params: Vec<f64> = self.z_hat.iter().skip(1).copied().collect();
        match self.order {
            SplineOrder::Zero => Ok(SplineModel::Zero(ZeroOrderSplineModel::new(
                self.grid.clone(),
                self.z_hat[0],
                params,
                self.lambda,
            )?)),
            SplineOrder::Quadratic => Ok(SplineModel::Quadratic(QuadraticSplineModel::new(
                self.grid.clone(),
                self.z_hat[0],
                params,
                self.lambda,
            )?)),
        }
    }

    /// Derivative estimate at the newest knot.
    pub fn endpoint_estimate(&self) -> f64 {
        let k = self.grid.len();
        match self.order {
            SplineOrder::Zero => self.z_hat[k - 1],
            SplineOrder::Quadratic => {
                let h = self.grid.intervals();
                quad::z_row(&h, k - 1)
                    .iter()
                    .map(|&(c, v)| v * self.z_hat[c + 1])
                    .sum()
            }
        }
    }

    /// Incorporates a new sample without refactorizing.
    pub fn update(&mut self, t_new: f64, y_new: f64) -> Result<()> {
        match self.order {
            SplineOrder::Zero => self.update_zero(t_new, y_new)?,
            SplineOrder::Quadratic => self.update_quadratic(t_new, y_new)?,
        }
        self.update_count += 1;
        if self.refactor_every > 0 && self.update_count % self.refactor_every == 0 {
            self.refactorize()?;
        }
        Ok(())
    }

    fn update_zero(&mut self, t_new: f64, y_new: f64) -> Result<()> {
        if self.lambda <= 0.0 {
            return Err(Error::UnsupportedConfig(
                "zero-order recursive update requires lambda > 0".into(),
            ));
        }
        let k = self.grid.len();
        let last = self.grid.end();
        if t_new <= last {
            return Err(Error::NonIncreasingTime {
                t_new,
                t_last: last,
            });
        }
        let hk = t_new - last;

        // H_K = [1, h_1, ..., h_K]
        let mut hvec = vec![0.0; k + 1];
        hvec[0] = 1.0;
        for (i, h) in self.grid.intervals().into_iter().enumerate() {
            hvec[i + 1] = h;
        }
        hvec[k] = hk;

        // A_s^{-1} H with A_s^{-1} = blockdiag(A_K^{-1}, 1/(λ h_K))
        let mut ah = vec![0.0; k + 1];
        self.a_inv.matvec(&hvec[..k], &mut ah[..k]);
        ah[k] = hvec[k] / (self.lambda * hk);
        let denom = 1.0 + dot(&hvec, &ah);
        let scale = 1.0 / denom;

        // rank-one Sherman-Morrison update of the block-extended inverse,
        // applied in place
        self.a_inv.rank1_update(-scale, &ah[..k]);
        let wk = scale * ah[k];
        let border: Vec<f64> = ah[..k].iter().map(|&a| -wk * a).collect();
        self.a_inv
            .append_border(&border, 1.0 / (self.lambda * hk) - wk * ah[k]);

        let b_old = self.b_vec.as_ref().expect("zero-order state has b_vec");
        let mut b_new = DVector::zeros(k + 1);
        b_new.rows_mut(0, k).copy_from(b_old);
        for i in 0..=k {
            b_new[i] += hvec[i] * y_new;
        }

        // Ẑ_{K+1} = A_{K+1}^{-1} B_{K+1} expanded through the same rank-one
        // identity: blockdiag⁻¹ [B_K; 0] = [Ẑ_K; 0] and blockdiag⁻¹ H = ah,
        // so no K² matvec is needed.
        let corr = scale * dot(&ah, b_new.as_slice());
        let mut z = vec![0.0; k + 1];
        for i in 0..k {
            z[i] = self.z_hat[i] + (y_new - corr) * ah[i];
        }
        z[k] = (y_new - corr) * ah[k];
        self.z_hat = DVector::from_vec(z);
        self.b_vec = Some(b_new);
        self.grid.push(t_new)?;
        self.values.push(y_new);
        Ok(())
    }

    fn update_quadratic(&mut self, t_new: f64, y_new: f64) -> Result<()> {
        let k = self.grid.len();
        let last = self.grid.end();
        if t_new <= last {
            return Err(Error::NonIncreasingTime {
                t_new,
                t_last: last,
            });
        }
        let hk = t_new - last;
        let h_old = self.grid.intervals();
        let c_last = self.c_last.take().expect("quadratic state has c_last");
        let c_last_s = c_last.as_slice();
        let y_last = *self.values.last().unwrap();

        let dc = quad::delta_c(&h_old, hk, c_last_s);
        let dq = quad::delta_q(&h_old, hk);
        let base = k - 2; // Z-index of the first ΔC row-1 / ΔQ entry
        let (alpha, beta, gamma) = (dc.row1[0], dc.row1[1], dc.row1[2]);
        let w2 = &dc.row2[..k]; // truncated new last row of C_{K+1}
        let r2k = dc.row2[k];
        let lambda = self.lambda;

        // P = A_K^{-1} W for the rank-4 correction A_s = A_K + W S W^T, where
        // W = [old last row, truncated new last row, e_base, e_{base+1}].
        let mut p0 = vec![0.0; k];
        self.a_inv.matvec(c_last_s, &mut p0);
        let mut p1 = vec![0.0; k];
        self.a_inv.matvec(w2, &mut p1);
        let p2 = self.a_inv.full_col(base);
        let p3 = self.a_inv.full_col(base + 1);
        let pj: [&[f64]; 4] = [&p0, &p1, &p2, &p3];

        let mut s = Matrix4::zeros();
        s[(1, 1)] = 1.0;
        s[(0, 2)] = alpha;
        s[(2, 0)] = alpha;
        s[(0, 3)] = beta;
        s[(3, 0)] = beta;
        s[(2, 2)] = alpha * alpha + lambda * dq[0][0];
        s[(2, 3)] = alpha * beta + lambda * dq[0][1];
        s[(3, 2)] = s[(2, 3)];
        s[(3, 3)] = beta * beta + lambda * dq[1][1];

        // W^T P (4x4) via dot products; rows 2,3 of W are unit vectors.
        let mut wtp = Matrix4::zeros();
        for (j, col) in pj.iter().enumerate() {
            wtp[(0, j)] = dot(c_last_s, col);
            wtp[(1, j)] = dot(w2, col);
            wtp[(2, j)] = col[base];
            wtp[(3, j)] = col[base + 1];
        }
        let g = Matrix4::identity() + wtp * s;
        let Some(g_inv) = g.try_inverse() else {
            self.c_last = Some(c_last);
            return Err(Error::NumericalBreakdown {
                k,
                message: "singular inner system in rank-4 update".into(),
            });
        };
        let g_cond = g.norm() * g_inv.norm();
        if !g_cond.is_finite() || g_cond > BREAKDOWN_COND {
            self.c_last = Some(c_last);
            return Err(Error::NumericalBreakdown {
                k,
                message: format!("ill-conditioned inner system (condition ~{g_cond:.3e})"),
            });
        }
        let m4 = s * g_inv;
        // PM columns, each a 4-term combination of the P columns.
        let mut pm = [vec![0.0; k], vec![0.0; k], vec![0.0; k], vec![0.0; k]];
        for (c, pmc) in pm.iter_mut().enumerate() {
            for (r, src) in pj.iter().enumerate() {
                let coef = m4[(r, c)];
                if coef != 0.0 {
                    for (o, &v) in pmc.iter_mut().zip(*src) {
                        *o += coef * v;
                    }
                }
            }
        }

        // Both right-hand sides live in span{w2, old-last-row, e_base, e_{base+1}}:
        // the truncated border column U_s = ΔA e_{K+1} and the correction rhs
        // b = ΔC^T [y_K, y_{K+1}] − ΔA [Ẑ_K; 0]. Their A_K^{-1}-images are the
        // matching combinations of the P columns — no extra K² matvecs.
        let zb = self.z_hat[base];
        let zb1 = self.z_hat[base + 1];
        let r1z = alpha * zb + beta * zb1; // r1 · [Ẑ_K; 0]
        let cpz = dot(c_last_s, self.z_hat.as_slice());
        let r2z = dot(w2, self.z_hat.as_slice());
        let resid = y_last - r1z - cpz;
        let cw = y_new - r2z;
        let cb2 = alpha * resid - lambda * (dq[0][0] * zb + dq[0][1] * zb1);
        let cb3 = beta * resid - lambda * (dq[1][0] * zb + dq[1][1] * zb1);
        let b_k = cw * r2k + gamma * resid - lambda * (dq[2][0] * zb + dq[2][1] * zb1);
        let u2c = alpha * gamma + lambda * dq[0][2];
        let u3c = beta * gamma + lambda * dq[1][2];
        let a_s = r2k * r2k + gamma * gamma + lambda * dq[2][2];

        let mut u_s = vec![0.0; k];
        let mut b1 = vec![0.0; k];
        for i in 0..k {
            u_s[i] = r2k * w2[i] + gamma * c_last_s[i];
            b1[i] = cw * w2[i] - r1z * c_last_s[i];
        }
        u_s[base] += u2c;
        u_s[base + 1] += u3c;
        b1[base] += cb2;
        b1[base + 1] += cb3;

        // A_s^{-1} x = A_K^{-1} x − PM (P^T x)
        let combo = |cw2: f64, ccl: f64, ce2: f64, ce3: f64, x: &[f64]| -> Vec<f64> {
            let mut out = vec![0.0; k];
            for i in 0..k {
                out[i] = cw2 * p1[i] + ccl * p0[i] + ce2 * p2[i] + ce3 * p3[i];
            }
            let ptx = [dot(&p0, x), dot(&p1, x), dot(&p2, x), dot(&p3, x)];
            for (j, pt) in ptx.iter().enumerate() {
                for (o, &v) in out.iter_mut().zip(&pm[j]) {
                    *o -= pt * v;
                }
            }
            out
        };
        let q1 = combo(r2k, gamma, u2c, u3c, &u_s);
        let q2 = combo(cw, -r1z, cb2, cb3, &b1);

        let gap = a_s - dot(&u_s, &q1);
        if gap.abs() < 1e-14 * a_s.abs() {
            self.c_last = Some(c_last);
            return Err(Error::NumericalBreakdown {
                k,
                message: format!("block pivot a_s - U^T A_s^{{-1}} U ~ {gap:.3e} too small"),
            });
        }
        let d_s = 1.0 / gap;

        let shift = d_s * (dot(&q1, &b1) - b_k);
        let dz: Vec<f64> = q2.iter().zip(&q1).map(|(&a, &b)| a + shift * b).collect();
        let p_k = (b_k - dot(&u_s, &dz)) / a_s;

        // New inverse via the block formula, fused with the rank-4 correction,
        // in place: top-left = A_K^{-1} − PM P^T + d_s q1 q1^T. PM P^T is
        // symmetric (M = S (I + W^T A^{-1} W S)^{-1} is symmetric by the
        // push-through identity), so only the stored lower triangle is touched.
        for j in 0..k {
            let (w0, w1, w2j, w3) = (p0[j], p1[j], p2[j], p3[j]);
            let wq = d_s * q1[j];
            let col = self.a_inv.col_lower_mut(j);
            let (pm0, pm1, pm2, pm3) = (&pm[0][j..], &pm[1][j..], &pm[2][j..], &pm[3][j..]);
            let q1j = &q1[j..];
            for (i, c) in col.iter_mut().enumerate() {
                *c += wq * q1j[i] - (pm0[i] * w0 + pm1[i] * w1 + pm2[i] * w2j + pm3[i] * w3);
            }
        }
        let border: Vec<f64> = q1.iter().map(|&v| -d_s * v).collect();
        self.a_inv.append_border(&border, d_s);

        let mut z_new = DVector::zeros(k + 1);
        for i in 0..k {
            z_new[i] = self.z_hat[i] + dz[i];
        }
        z_new[k] = p_k;

        self.z_hat = z_new;
        self.c_last = Some(DVector::from_column_slice(&dc.row2));
        self.grid.push(t_new)?;
        self.values.push(y_new);
        Ok(())
    }

    /// Recomputes A_K^{-1} and Ẑ_K from scratch, bounding accumulated
    /// floating-point drift. Resets the update counter.
    pub fn refactorize(&mut self) -> Result<()> {
        let series = SampleSeries::new(self.grid.clone(), self.values.clone())?;
        let mut fresh = init(&series, self.order, self.lambda)?;
        fresh.refactor_every = self.refactor_every;
        fresh.update_count = 0;
        *self = fresh;
        Ok(())
    }

    pub fn snapshot(&self) -> Snapshot {
        let k = self.grid.len();
        let a_inv = (0..k)
            .map(|r| (0..k).map(|c| self.a_inv.get(r, c)).collect())
            .collect();
        Snapshot {
            order: self.order.index(),
            lambda: self.lambda,
            knots: self.grid.knots().to_vec(),
            values: self.values.clone(),
            z_hat: self.z_hat.iter().copied().collect(),
            a_inv,
            update_count: self.update_count,
            refactor_every: self.refactor_every,
        }
    }

    pub fn from_snapshot(snap: &Snapshot) -> Result<RecursiveState> {
        let order = SplineOrder::from_index(snap.order)?;
        let grid = TimeGrid::new(snap.knots.clone())?;
        let k = grid.len();
        if snap.values.len() != k || snap.z_hat.len() != k || snap.a_inv.len() != k {
            return Err(Error::Config("snapshot field lengths inconsistent".into()));
        }
        let mut a_inv = DMatrix::zeros(k, k);
        for (r, row) in snap.a_inv.iter().enumerate() {
            if row.len() != k {
                return Err(Error::Config("snapshot a_inv is not square".into()));
            }
            for (c, &v) in row.iter().enumerate() {
                a_inv[(r, c)] = v;
            }
        }
        let a_inv = GrowMatrix::from_dmatrix(&a_inv);
        let (b_vec, c_last) = match order {
            SplineOrder::Zero => (Some(zero_b_vec(&grid, &snap.values)), None),
            SplineOrder::Quadratic => (None, Some(quad_c_last_row(&grid))),
        };
        Ok(RecursiveState {
            order,
            lambda: snap.lambda,
            grid,
            values: snap.values.clone(),
            a_inv,
            z_hat: DVector::from_column_slice(&snap.z_hat),
            b_vec,
            c_last,
            update_count: snap.update_count,
            refactor_every: snap.refactor_every,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.snapshot()).expect("snapshot serializes")
    }

    pub fn from_json(text: &str) -> Result<RecursiveState> {
        let snap: Snapshot =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("bad snapshot: {e}")))?;
        RecursiveState::from_snapshot(&snap)
    }
}
