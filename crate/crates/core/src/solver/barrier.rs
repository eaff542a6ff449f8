//! `min ½ yᵀVy − Σ log yᵢ` over `0 < yᵢ ≤ d`.
//!
//! Projected Newton on the free coordinates with an Armijo line search.
//! When a Newton step cannot make progress the solver falls back to one
//! sweep of exact cyclic coordinate updates
//! `yᵢ ← (−rᵢ + √(rᵢ² + 4Vᵢᵢ)) / (2Vᵢᵢ)` clipped to `(0, d]`.

use alloc::vec;
use alloc::vec::Vec;

use super::{SolverError, SolverOptions, SolverSolution, SolverStatus, TraceRow};
use crate::linalg::{dot, Matrix};
use crate::riskmodels::is_positive_definite;

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACK: usize = 60;

/// `½ yᵀVy − Σ log yᵢ`
pub fn barrier_objective(v: &Matrix, y: &[f64]) -> f64 {
    0.5 * v.quad_form(y) - y.iter().map(|v| libm::log(*v)).sum::<f64>()
}

/// Largest projected-gradient violation at `y`: `|gᵢ|` for `yᵢ < d`,
/// `max(gᵢ, 0)` for `yᵢ = d`, with `g = Vy − 1/y`.
pub fn barrier_residual(v: &Matrix, y: &[f64], d: f64) -> f64 {
    let vy = v.mul_vec(y);
    let mut r: f64 = 0.0;
    for i in 0..y.len() {
        let g = vy[i] - 1.0 / y[i];
        let viol = if y[i] >= d { g.max(0.0) } else { g.abs() };
        r = r.max(viol);
    }
    r
}

fn gradient(v: &Matrix, y: &[f64]) -> Vec<f64> {
    let mut g = v.mul_vec(y);
    for (gi, yi) in g.iter_mut().zip(y) {
        *gi -= 1.0 / yi;
    }
    g
}

fn coordinate_sweep(v: &Matrix, y: &mut [f64], d: f64) {
    let n = y.len();
    for i in 0..n {
        let vii = v[(i, i)];
        let r = dot(v.row(i), y) - vii * y[i];
        // larger root of vii·t² + r·t − 1 = 0, written without cancellation
        let root = libm::sqrt(r * r + 4.0 * vii);
        let t = if r >= 0.0 {
            2.0 / (r + root)
        } else {
            (root - r) / (2.0 * vii)
        };
        y[i] = t.min(d);
    }
}

/// Solves the box-constrained log-barrier program for a positive definite `V`.
pub fn solve_box_log_barrier(
    v: &Matrix,
    d: f64,
    opts: &SolverOptions,
) -> Result<SolverSolution, SolverError> {
    let n = v.rows();
    if !v.is_square() || n == 0 {
        return Err(SolverError::Dimension("V must be a non-empty square matrix"));
    }
    if !(d > 0.0) || !d.is_finite() {
        return Err(SolverError::Dimension("upper bound d must be positive and finite"));
    }
    if !v.is_finite() || !v.is_symmetric(1e-12) || !is_positive_definite(v) {
        return Err(SolverError::NotPositiveDefinite);
    }

    let mut y = vec![(d / 2.0).min(1.0); n];
    let mut trace = Vec::new();
    let mut iterations = 0usize;
    let mut f = barrier_objective(v, &y);

    loop {
        let res = barrier_residual(v, &y, d);
        if opts.trace {
            trace.push(TraceRow {
                iteration: iterations,
                primal: 0.0,
                dual: res,
                complementarity: 0.0,
                objective: f,
            });
        }
        if res <= opts.tol {
            return Ok(SolverSolution {
                x: y,
                objective: f,
                status: SolverStatus::Optimal,
                kkt_residual: res,
                iterations,
                trace,
                multipliers: None,
            });
        }
        if iterations >= opts.max_iter {
            let sol = SolverSolution {
                x: y,
                objective: f,
                status: SolverStatus::MaxIterations,
                kkt_residual: res,
                iterations,
                trace,
                multipliers: None,
            };
            return Err(SolverError::MaxIterations(alloc::boxed::Box::new(sol)));
        }
        iterations += 1;

        let g = gradient(v, &y);
        let free: Vec<usize> = (0..n).filter(|&i| !(y[i] >= d && g[i] <= 0.0)).collect();
        let mut stepped = false;
        if !free.is_empty() {
            let mut h = v.select_principal(&free);
            for (a, &i) in free.iter().enumerate() {
                h[(a, a)] += 1.0 / (y[i] * y[i]);
            }
            if let Some(ch) = h.cholesky(0.0) {
                let gf: Vec<f64> = free.iter().map(|&i| -g[i]).collect();
                let p = ch.solve(&gf);
                // keep y strictly positive
                let mut alpha: f64 = 1.0;
                for (a, &i) in free.iter().enumerate() {
                    if p[a] < 0.0 {
                        alpha = alpha.min(-0.99 * y[i] / p[a]);
                    }
                }
                for _ in 0..MAX_BACKTRACK {
                    let mut trial = y.clone();
                    for (a, &i) in free.iter().enumerate() {
                        trial[i] = (y[i] + alpha * p[a]).min(d);
                    }
                    let ft = barrier_objective(v, &trial);
                    let decrease: f64 = (0..n).map(|i| g[i] * (trial[i] - y[i])).sum();
                    if ft.is_finite() && ft <= f + ARMIJO * decrease && ft <= f {
                        stepped = ft < f || trial != y;
                        y = trial;
                        f = ft;
                        break;
                    }
                    alpha *= 0.5;
                }
            }
        }
        if !stepped {
            coordinate_sweep(v, &mut y, d);
            f = barrier_objective(v, &y);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn identity_is_all_ones() {
        let sol = solve_box_log_barrier(&Matrix::identity(3), 5.0, &SolverOptions::default()).unwrap();
        for y in &sol.x {
            assert_abs_diff_eq!(*y, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn diagonal_closed_form() {
        let v = Matrix::from_diagonal(&[4.0, 1.0]);
        let sol = solve_box_log_barrier(&v, 5.0, &SolverOptions::default()).unwrap();
        assert_abs_diff_eq!(sol.x[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.x[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn bound_becomes_active() {
        // unconstrained optimum is 1/sqrt(0.01) = 10 > d
        let v = Matrix::from_diagonal(&[0.01, 1.0]);
        let sol = solve_box_log_barrier(&v, 5.0, &SolverOptions::default()).unwrap();
        assert_eq!(sol.x[0], 5.0);
        assert_abs_diff_eq!(sol.x[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn indefinite_is_rejected() {
        let v = Matrix::from_rows(&[[1.0, 2.0], [2.0, 1.0]]);
        assert_eq!(
            solve_box_log_barrier(&v, 5.0, &SolverOptions::default()),
            Err(SolverError::NotPositiveDefinite)
        );
    }

    #[test]
    fn coordinate_update_is_exact_for_one_dimension() {
        let v = Matrix::from_rows(&[[0.25]]);
        let mut y = vec![1.0];
        coordinate_sweep(&v, &mut y, 5.0);
        assert_abs_diff_eq!(y[0], 2.0, epsilon = 1e-15);
    }
}
