//! Dense convex QP by a Mehrotra predictor-corrector interior point method,
//! followed by an active-set polish step.
//!
//! ```text
//!     minimize     ½ xᵀQx + cᵀx
//!     subject to   A x  = b
//!                  G x <= h
//!                  l <= x <= u
//! ```
//!
//! The reported objective keeps the ½: callers wanting `xᵀVx` pass `Q = 2V`.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use super::{SolverError, SolverOptions, SolverSolution, SolverStatus, TraceRow, STAGNATION_WINDOW};
use crate::linalg::{dot, is_psd, lu_solve, norm_inf, Matrix};

/// Eigenvalue slack allowed when checking that `Q` is PSD.
const PSD_TOL: f64 = 1e-10;
/// Fraction of the way to the boundary taken by each interior step.
const STEP_FRACTION: f64 = 0.99;

type Step = (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>);

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticProgram {
    pub q: Matrix,
    pub c: Vec<f64>,
    pub a_eq: Matrix,
    pub b_eq: Vec<f64>,
    pub g_in: Matrix,
    pub h_in: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl QuadraticProgram {
    /// Unconstrained problem; add constraints with the `with_*` builders.
    pub fn new(q: Matrix, c: Vec<f64>) -> Self {
        let n = c.len();
        Self {
            q,
            c,
            a_eq: Matrix::zeros(0, n),
            b_eq: Vec::new(),
            g_in: Matrix::zeros(0, n),
            h_in: Vec::new(),
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn with_equalities(mut self, a: Matrix, b: Vec<f64>) -> Self {
        self.a_eq = a;
        self.b_eq = b;
        self
    }

    pub fn with_inequalities(mut self, g: Matrix, h: Vec<f64>) -> Self {
        self.g_in = g;
        self.h_in = h;
        self
    }

    pub fn with_bounds(mut self, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    /// `½ xᵀQx + cᵀx`
    pub fn objective(&self, x: &[f64]) -> f64 {
        0.5 * self.q.quad_form(x) + dot(&self.c, x)
    }

    /// Largest violation of any constraint at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut v: f64 = 0.0;
        for (k, r) in self.a_eq.mul_vec(x).iter().enumerate() {
            v = v.max((r - self.b_eq[k]).abs());
        }
        for (k, r) in self.g_in.mul_vec(x).iter().enumerate() {
            v = v.max(r - self.h_in[k]);
        }
        for i in 0..x.len() {
            v = v.max(self.lower[i] - x[i]).max(x[i] - self.upper[i]);
        }
        v
    }

    fn validate(&self) -> Result<(), SolverError> {
        let n = self.dim();
        if self.q.rows() != n || self.q.cols() != n {
            return Err(SolverError::Dimension("Q must be N x N"));
        }
        if self.a_eq.cols() != n || self.a_eq.rows() != self.b_eq.len() {
            return Err(SolverError::Dimension("A_eq must be E x N with b_eq of length E"));
        }
        if self.a_eq.rows() > n {
            return Err(SolverError::Dimension("more equalities than variables"));
        }
        if self.g_in.cols() != n || self.g_in.rows() != self.h_in.len() {
            return Err(SolverError::Dimension("G_in must be M x N with h_in of length M"));
        }
        if self.lower.len() != n || self.upper.len() != n {
            return Err(SolverError::Dimension("bounds must have length N"));
        }
        if let Some(i) = (0..n).find(|&i| self.lower[i] > self.upper[i]) {
            return Err(SolverError::InvalidBounds(i));
        }
        if !self.q.is_finite() || self.c.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::Dimension("non-finite problem data"));
        }
        if !self.q.is_symmetric(1e-12) || !is_psd(&self.q, PSD_TOL) {
            return Err(SolverError::NotPsd);
        }
        Ok(())
    }
}

/// Lagrange multipliers of a [`QuadraticProgram`], signed so that
/// `Qx + c + Aᵀy + Gᵀz + z_upper − z_lower = 0` with `z, z_upper, z_lower ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Multipliers {
    pub eq: Vec<f64>,
    pub ineq: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Independently recomputed optimality residuals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktCertificate {
    /// Largest absolute constraint violation.
    pub primal: f64,
    /// Largest negative multiplier, relative to the gradient scale.
    pub dual: f64,
    /// `‖Qx + c + Aᵀy + Gᵀz + z_u − z_l‖∞ / (‖Q‖·‖x‖ + ‖c‖)`.
    pub stationarity: f64,
    /// Largest `|multiplier · slack|`, relative to the gradient scale.
    pub complementarity: f64,
}

impl KktCertificate {
    pub fn residual(&self) -> f64 {
        self.primal
            .max(self.dual)
            .max(self.stationarity)
            .max(self.complementarity)
    }
}

/// Recomputes the KKT residuals of `(x, mult)` from the problem data alone.
pub fn kkt_certificate(prob: &QuadraticProgram, x: &[f64], mult: &Multipliers) -> KktCertificate {
    let n = prob.dim();
    let q_norm = (0..n)
        .map(|i| prob.q.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut scale = q_norm * norm_inf(x) + norm_inf(&prob.c);
    if !(scale > 0.0) {
        scale = 1.0;
    }

    let primal = prob.max_violation(x).max(0.0);

    let mut grad = prob.q.mul_vec(x);
    for i in 0..n {
        grad[i] += prob.c[i] + mult.upper[i] - mult.lower[i];
    }
    for (k, y) in mult.eq.iter().enumerate() {
        crate::linalg::axpy(*y, prob.a_eq.row(k), &mut grad);
    }
    for (k, z) in mult.ineq.iter().enumerate() {
        crate::linalg::axpy(*z, prob.g_in.row(k), &mut grad);
    }
    let stationarity = norm_inf(&grad) / scale;

    let neg = |v: &f64| (-v).max(0.0);
    let dual = mult
        .ineq
        .iter()
        .chain(&mult.lower)
        .chain(&mult.upper)
        .map(neg)
        .fold(0.0, f64::max)
        / scale;

    let mut comp: f64 = 0.0;
    let gx = prob.g_in.mul_vec(x);
    for k in 0..gx.len() {
        comp = comp.max((mult.ineq[k] * (prob.h_in[k] - gx[k])).abs());
    }
    for i in 0..n {
        if prob.lower[i].is_finite() {
            comp = comp.max((mult.lower[i] * (x[i] - prob.lower[i])).abs());
        } else {
            comp = comp.max(mult.lower[i].abs());
        }
        if prob.upper[i].is_finite() {
            comp = comp.max((mult.upper[i] * (prob.upper[i] - x[i])).abs());
        } else {
            comp = comp.max(mult.upper[i].abs());
        }
    }
    KktCertificate {
        primal,
        dual,
        stationarity,
        complementarity: comp / scale,
    }
}

/// One inequality row of the stacked system `Ĝ x ≤ ĥ`.
#[derive(Debug, Clone, Copy)]
enum Row {
    General(usize),
    Upper(usize),
    Lower(usize),
}

/// The problem after objective and row scaling, with bounds stacked under `G`.
struct Scaled<'a> {
    prob: &'a QuadraticProgram,
    n: usize,
    q: Matrix,
    c: Vec<f64>,
    a: Matrix,
    b: Vec<f64>,
    a_scale: Vec<f64>,
    g: Matrix,
    g_scale: Vec<f64>,
    rows: Vec<Row>,
    h: Vec<f64>,
    obj_scale: f64,
}

impl<'a> Scaled<'a> {
    fn new(prob: &'a QuadraticProgram) -> Self {
        let n = prob.dim();
        let mut obj_scale = prob.q.max_abs().max(norm_inf(&prob.c));
        if !(obj_scale > 0.0) {
            obj_scale = 1.0;
        }
        let q = prob.q.scaled(1.0 / obj_scale);
        let c = prob.c.iter().map(|v| v / obj_scale).collect();

        let row_norm = |r: &[f64]| {
            let m = norm_inf(r);
            if m > 0.0 {
                m
            } else {
                1.0
            }
        };
        let a_scale: Vec<f64> = (0..prob.a_eq.rows()).map(|k| row_norm(prob.a_eq.row(k))).collect();
        let a = Matrix::from_fn(prob.a_eq.rows(), n, |k, j| prob.a_eq[(k, j)] / a_scale[k]);
        let b = prob.b_eq.iter().zip(&a_scale).map(|(b, s)| b / s).collect();
        let g_scale: Vec<f64> = (0..prob.g_in.rows()).map(|k| row_norm(prob.g_in.row(k))).collect();
        let g = Matrix::from_fn(prob.g_in.rows(), n, |k, j| prob.g_in[(k, j)] / g_scale[k]);

        let mut rows = Vec::new();
        let mut h = Vec::new();
        for k in 0..prob.g_in.rows() {
            rows.push(Row::General(k));
            h.push(prob.h_in[k] / g_scale[k]);
        }
        for i in 0..n {
            if prob.upper[i].is_finite() {
                rows.push(Row::Upper(i));
                h.push(prob.upper[i]);
            }
        }
        for i in 0..n {
            if prob.lower[i].is_finite() {
                rows.push(Row::Lower(i));
                h.push(-prob.lower[i]);
            }
        }
        Self {
            prob,
            n,
            q,
            c,
            a,
            b,
            a_scale,
            g,
            g_scale,
            rows,
            h,
            obj_scale,
        }
    }

    fn m(&self) -> usize {
        self.rows.len()
    }

    /// `Ĝ x`
    fn g_mul(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| match *r {
                Row::General(k) => dot(self.g.row(k), x),
                Row::Upper(i) => x[i],
                Row::Lower(i) => -x[i],
            })
            .collect()
    }

    /// `Ĝᵀ z`
    fn g_tr_mul(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (r, &zk) in self.rows.iter().zip(z) {
            match *r {
                Row::General(k) => crate::linalg::axpy(zk, self.g.row(k), &mut out),
                Row::Upper(i) => out[i] += zk,
                Row::Lower(i) => out[i] -= zk,
            }
        }
        out
    }

    /// `Q + Ĝᵀ diag(w) Ĝ`
    fn normal_matrix(&self, w: &[f64]) -> Matrix {
        let mut h = self.q.clone();
        let n = self.n;
        for (r, &wk) in self.rows.iter().zip(w) {
            match *r {
                Row::General(k) => {
                    let g = self.g.row(k);
                    for i in 0..n {
                        let gi = wk * g[i];
                        if gi == 0.0 {
                            continue;
                        }
                        let hr = h.row_mut(i);
                        for j in 0..n {
                            hr[j] += gi * g[j];
                        }
                    }
                }
                Row::Upper(i) | Row::Lower(i) => h[(i, i)] += wk,
            }
        }
        h
    }

    fn unscale(&self, y: &[f64], z: &[f64]) -> Multipliers {
        let s = self.obj_scale;
        let mut mult = Multipliers {
            eq: y.iter().zip(&self.a_scale).map(|(y, a)| s * y / a).collect(),
            ineq: vec![0.0; self.prob.g_in.rows()],
            lower: vec![0.0; self.n],
            upper: vec![0.0; self.n],
        };
        for (r, &zk) in self.rows.iter().zip(z) {
            match *r {
                Row::General(k) => mult.ineq[k] = s * zk / self.g_scale[k],
                Row::Upper(i) => mult.upper[i] = s * zk,
                Row::Lower(i) => mult.lower[i] = s * zk,
            }
        }
        mult
    }
}

/// Solves `[H Aᵀ; A 0] [dx; dy] = [r1; r2]` given a factorization of `H`.
struct NormalSolver {
    chol: crate::linalg::Cholesky,
    /// `H⁻¹ Aᵀ`, one column per equality.
    h_inv_at: Vec<Vec<f64>>,
    schur: Matrix,
}

impl NormalSolver {
    fn new(h: &Matrix, a: &Matrix) -> Option<Self> {
        let chol = factor_regularized(h)?;
        let e = a.rows();
        let h_inv_at: Vec<Vec<f64>> = (0..e).map(|k| chol.solve(a.row(k))).collect();
        let schur = Matrix::from_fn(e, e, |i, j| dot(a.row(i), &h_inv_at[j]));
        Some(Self {
            chol,
            h_inv_at,
            schur,
        })
    }

    fn solve(&self, a: &Matrix, r1: &[f64], r2: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        let h_inv_r1 = self.chol.solve(r1);
        let e = a.rows();
        let dy = if e == 0 {
            Vec::new()
        } else {
            let rhs: Vec<f64> = (0..e).map(|k| dot(a.row(k), &h_inv_r1) - r2[k]).collect();
            lu_solve(&self.schur, &rhs, 1e-15)?
        };
        let mut dx = h_inv_r1;
        for (k, dyk) in dy.iter().enumerate() {
            crate::linalg::axpy(-dyk, &self.h_inv_at[k], &mut dx);
        }
        Some((dx, dy))
    }
}

fn factor_regularized(h: &Matrix) -> Option<crate::linalg::Cholesky> {
    if let Some(c) = h.cholesky(0.0) {
        return Some(c);
    }
    let scale = h.max_abs().max(1.0);
    let mut reg = 1e-14 * scale;
    while reg < 1e-4 * scale {
        let mut hr = h.clone();
        for i in 0..h.rows() {
            hr[(i, i)] += reg;
        }
        if let Some(c) = hr.cholesky(0.0) {
            return Some(c);
        }
        reg *= 100.0;
    }
    None
}

fn max_step(v: &[f64], dv: &[f64]) -> f64 {
    let mut alpha: f64 = 1.0 / STEP_FRACTION;
    for (x, d) in v.iter().zip(dv) {
        if *d < 0.0 {
            alpha = alpha.min(-x / d);
        }
    }
    alpha
}

struct Iterate {
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    s: Vec<f64>,
}

/// Solves a convex QP to the requested KKT tolerance.
pub fn solve_qp(prob: &QuadraticProgram, opts: &SolverOptions) -> Result<SolverSolution, SolverError> {
    prob.validate()?;
    let sp = Scaled::new(prob);
    let n = sp.n;
    let m = sp.m();
    let mut trace = Vec::new();

    let finish = |x: Vec<f64>, mult: Multipliers, iterations: usize, trace: Vec<TraceRow>| {
        let cert = kkt_certificate(prob, &x, &mult);
        SolverSolution {
            objective: prob.objective(&x),
            status: if cert.residual() <= opts.tol {
                SolverStatus::Optimal
            } else {
                SolverStatus::MaxIterations
            },
            kkt_residual: cert.residual(),
            x,
            iterations,
            trace,
            multipliers: Some(mult),
        }
    };

    // Starting point: minimise ½xᵀQx + cᵀx + ½‖Ĝx − ĥ‖² subject to Ax = b.
    let ones = vec![1.0; m];
    let h0 = sp.normal_matrix(&ones);
    let ns0 = NormalSolver::new(&h0, &sp.a).ok_or(SolverError::NotPsd)?;
    let gth = sp.g_tr_mul(&sp.h);
    let r1: Vec<f64> = (0..n).map(|i| gth[i] - sp.c[i]).collect();
    let (x0, y0) = ns0
        .solve(&sp.a, &r1, &sp.b)
        .ok_or(SolverError::Dimension("equality constraints are linearly dependent"))?;

    if m == 0 {
        let mult = sp.unscale(&y0, &[]);
        let sol = finish(x0, mult, 1, trace);
        return classify(sol);
    }

    let gx0 = sp.g_mul(&x0);
    let mut s: Vec<f64> = (0..m).map(|k| sp.h[k] - gx0[k]).collect();
    let mut z: Vec<f64> = s.iter().map(|v| -v).collect();
    shift_positive(&mut s);
    shift_positive(&mut z);
    let mut it = Iterate { x: x0, y: y0, z, s };

    let mut best: Option<(f64, Vec<f64>, Multipliers)> = None;
    let mut best_at = 0usize;
    let mut iterations = 0usize;
    let target = (opts.tol * 1e-3).max(1e-15);

    while iterations < opts.max_iter {
        iterations += 1;
        let qx = sp.q.mul_vec(&it.x);
        let aty = sp.a.tr_mul_vec(&it.y);
        let gtz = sp.g_tr_mul(&it.z);
        let rd: Vec<f64> = (0..n).map(|i| qx[i] + sp.c[i] + aty[i] + gtz[i]).collect();
        let ax = sp.a.mul_vec(&it.x);
        let re: Vec<f64> = (0..sp.b.len()).map(|k| ax[k] - sp.b[k]).collect();
        let gx = sp.g_mul(&it.x);
        let ri: Vec<f64> = (0..m).map(|k| gx[k] + it.s[k] - sp.h[k]).collect();
        let mu = dot(&it.s, &it.z) / m as f64;

        let mult = sp.unscale(&it.y, &it.z);
        let cert = kkt_certificate(prob, &it.x, &mult);
        let res = cert.residual();
        if !res.is_finite() || it.x.iter().any(|v| !v.is_finite()) {
            break;
        }
        if opts.trace {
            trace.push(TraceRow {
                iteration: iterations,
                primal: cert.primal,
                dual: cert.stationarity.max(cert.dual),
                complementarity: cert.complementarity,
                objective: prob.objective(&it.x),
            });
        }
        let improved = best.as_ref().is_none_or(|(r, _, _)| res < 0.99 * r);
        if best.as_ref().is_none_or(|(r, _, _)| res < *r) {
            best = Some((res, it.x.clone(), mult));
        }
        if improved {
            best_at = iterations;
        }
        if res <= target || (res <= opts.tol && iterations - best_at >= 5) {
            break;
        }
        if iterations - best_at >= STAGNATION_WINDOW {
            break;
        }

        let w: Vec<f64> = (0..m).map(|k| it.z[k] / it.s[k]).collect();
        let hmat = sp.normal_matrix(&w);
        let Some(ns) = NormalSolver::new(&hmat, &sp.a) else {
            break;
        };
        let neg_re: Vec<f64> = re.iter().map(|v| -v).collect();
        let direction = |rc: &[f64]| -> Option<Step> {
            // rhs1 = -rd + Ĝᵀ S⁻¹ (rc - Z ri)
            let t: Vec<f64> = (0..m).map(|k| (rc[k] - it.z[k] * ri[k]) / it.s[k]).collect();
            let gt = sp.g_tr_mul(&t);
            let r1: Vec<f64> = (0..n).map(|i| -rd[i] + gt[i]).collect();
            let (dx, dy) = ns.solve(&sp.a, &r1, &neg_re)?;
            let gdx = sp.g_mul(&dx);
            let ds: Vec<f64> = (0..m).map(|k| -ri[k] - gdx[k]).collect();
            let dz: Vec<f64> = (0..m).map(|k| (-rc[k] - it.z[k] * ds[k]) / it.s[k]).collect();
            Some((dx, dy, dz, ds))
        };

        let rc_aff: Vec<f64> = (0..m).map(|k| it.s[k] * it.z[k]).collect();
        let Some((_, _, dz_a, ds_a)) = direction(&rc_aff) else {
            break;
        };
        let alpha_aff = max_step(&it.s, &ds_a).min(max_step(&it.z, &dz_a)).min(1.0);
        let mu_aff = (0..m)
            .map(|k| (it.s[k] + alpha_aff * ds_a[k]) * (it.z[k] + alpha_aff * dz_a[k]))
            .sum::<f64>()
            / m as f64;
        let sigma = if mu > 0.0 { { let r = (mu_aff / mu).clamp(0.0, 1.0); r * r * r } } else { 0.0 };
        let rc: Vec<f64> = (0..m)
            .map(|k| it.s[k] * it.z[k] + ds_a[k] * dz_a[k] - sigma * mu)
            .collect();
        let Some((dx, dy, dz, ds)) = direction(&rc) else {
            break;
        };
        let alpha = (STEP_FRACTION * max_step(&it.s, &ds).min(max_step(&it.z, &dz))).min(1.0);
        for i in 0..n {
            it.x[i] += alpha * dx[i];
        }
        for k in 0..it.y.len() {
            it.y[k] += alpha * dy[k];
        }
        for k in 0..m {
            it.s[k] += alpha * ds[k];
            it.z[k] += alpha * dz[k];
        }
    }

    let Some((_, x_ipm, mult_ipm)) = best else {
        let sol = SolverSolution {
            x: it.x,
            objective: f64::NAN,
            status: SolverStatus::Infeasible,
            kkt_residual: f64::INFINITY,
            iterations,
            trace,
            multipliers: None,
        };
        return Err(SolverError::Infeasible(Box::new(sol)));
    };
    let active: Vec<bool> = (0..m).map(|k| it.s[k] <= it.z[k]).collect();
    let mut sol = finish(x_ipm, mult_ipm, iterations, trace);
    if let Some((xp, mp)) = polish(&sp, &active) {
        let cert = kkt_certificate(prob, &xp, &mp);
        if cert.residual() <= sol.kkt_residual {
            sol.objective = prob.objective(&xp);
            sol.kkt_residual = cert.residual();
            sol.status = if cert.residual() <= opts.tol {
                SolverStatus::Optimal
            } else {
                sol.status
            };
            sol.x = xp;
            sol.multipliers = Some(mp);
        }
    }
    if sol.status != SolverStatus::Optimal && iterations < opts.max_iter {
        sol.status = SolverStatus::Infeasible;
    }
    classify(sol)
}

fn classify(sol: SolverSolution) -> Result<SolverSolution, SolverError> {
    match sol.status {
        SolverStatus::Optimal => Ok(sol),
        SolverStatus::MaxIterations => Err(SolverError::MaxIterations(Box::new(sol))),
        SolverStatus::Infeasible => Err(SolverError::Infeasible(Box::new(sol))),
    }
}

/// Shifts a vector so every entry is at least one when any entry is not positive.
fn shift_positive(v: &mut [f64]) {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    if lo <= 0.0 {
        for x in v.iter_mut() {
            *x += 1.0 - lo;
        }
    }
}

/// Re-solves the equality-constrained QP on the guessed active set.
fn polish(sp: &Scaled<'_>, active: &[bool]) -> Option<(Vec<f64>, Multipliers)> {
    let n = sp.n;
    let mut fixed: Vec<Option<f64>> = vec![None; n];
    let mut general = Vec::new();
    for (k, r) in sp.rows.iter().enumerate() {
        if !active[k] {
            continue;
        }
        match *r {
            Row::General(g) => general.push((k, g)),
            Row::Upper(i) => fixed[i] = Some(sp.h[k]),
            Row::Lower(i) => {
                let l = -sp.h[k];
                if fixed[i].is_some_and(|u| u != l) {
                    return None;
                }
                fixed[i] = Some(l);
            }
        }
    }
    let free: Vec<usize> = (0..n).filter(|&i| fixed[i].is_none()).collect();
    let mut x = vec![0.0; n];
    for i in 0..n {
        if let Some(v) = fixed[i] {
            x[i] = v;
        }
    }
    let e = sp.a.rows();
    let ncons = e + general.len();
    let nf = free.len();
    let dim = nf + ncons;
    let cons_row = |r: usize| -> &[f64] {
        if r < e {
            sp.a.row(r)
        } else {
            sp.g.row(general[r - e].1)
        }
    };
    let cons_rhs = |r: usize| -> f64 {
        if r < e {
            sp.b[r]
        } else {
            sp.h[general[r - e].0]
        }
    };
    let mut kkt = Matrix::zeros(dim, dim);
    let mut rhs = vec![0.0; dim];
    for (a, &i) in free.iter().enumerate() {
        for (b, &j) in free.iter().enumerate() {
            kkt[(a, b)] = sp.q[(i, j)];
        }
        let mut r = -sp.c[i];
        for j in 0..n {
            if fixed[j].is_some() {
                r -= sp.q[(i, j)] * x[j];
            }
        }
        rhs[a] = r;
    }
    for r in 0..ncons {
        let row = cons_row(r);
        for (a, &i) in free.iter().enumerate() {
            kkt[(nf + r, a)] = row[i];
            kkt[(a, nf + r)] = row[i];
        }
        let mut v = cons_rhs(r);
        for j in 0..n {
            if fixed[j].is_some() {
                v -= row[j] * x[j];
            }
        }
        rhs[nf + r] = v;
    }
    let sol = if dim == 0 { Vec::new() } else { lu_solve(&kkt, &rhs, 1e-13)? };
    for (a, &i) in free.iter().enumerate() {
        x[i] = sol[a];
    }
    let y: Vec<f64> = sol[nf..nf + e].to_vec();
    let mut z = vec![0.0; sp.m()];
    for (r, &(k, _)) in general.iter().enumerate() {
        z[k] = sol[nf + e + r];
    }
    // bound multipliers from stationarity of the fixed coordinates
    let mut grad = sp.q.mul_vec(&x);
    for i in 0..n {
        grad[i] += sp.c[i];
    }
    for (k, yk) in y.iter().enumerate() {
        crate::linalg::axpy(*yk, sp.a.row(k), &mut grad);
    }
    for &(k, g) in &general {
        crate::linalg::axpy(z[k], sp.g.row(g), &mut grad);
    }
    for (k, r) in sp.rows.iter().enumerate() {
        if !active[k] {
            continue;
        }
        match *r {
            Row::Upper(i) => z[k] = -grad[i],
            Row::Lower(i) => z[k] = grad[i],
            Row::General(_) => {}
        }
    }
    // a row that is both lower- and upper-active carries the whole gradient on one side
    for (k, r) in sp.rows.iter().enumerate() {
        if let Row::Lower(i) = *r {
            if active[k] {
                if let Some(ku) = sp
                    .rows
                    .iter()
                    .position(|r2| matches!(*r2, Row::Upper(j) if j == i))
                {
                    if active[ku] {
                        let g = grad[i];
                        z[k] = g.max(0.0);
                        z[ku] = (-g).max(0.0);
                    }
                }
            }
        }
    }
    Some((x, sp.unscale(&y, &z)))
}
