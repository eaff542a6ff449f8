//! Optimization primitives: a dense convex QP solver and a box-constrained
//! log-barrier minimizer.
//!
//! Both report a [`SolverSolution`] whose `kkt_residual` is recomputed from
//! the returned point, so `status == Optimal` can be checked from the
//! outside.

mod barrier;
mod qp;

use alloc::vec::Vec;

pub use barrier::{barrier_objective, barrier_residual, solve_box_log_barrier};
pub use qp::{kkt_certificate, solve_qp, KktCertificate, Multipliers, QuadraticProgram};

/// Default convergence tolerance.
pub const DEFAULT_TOL: f64 = 1e-8;
/// Default iteration cap.
pub const DEFAULT_MAX_ITER: usize = 50_000;
/// Iterations without progress after which a problem is declared infeasible.
pub const STAGNATION_WINDOW: usize = 1_000;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Record one [`TraceRow`] per iteration.
    #[cfg_attr(feature = "serde", serde(default))]
    pub trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            trace: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SolverStatus {
    Optimal,
    MaxIterations,
    Infeasible,
}

/// Residuals after one iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TraceRow {
    pub iteration: usize,
    pub primal: f64,
    pub dual: f64,
    pub complementarity: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSolution {
    pub x: Vec<f64>,
    /// `½ xᵀQx + cᵀx` for QPs; the barrier objective for the risk-parity program.
    pub objective: f64,
    pub status: SolverStatus,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub trace: Vec<TraceRow>,
    /// Lagrange multipliers, when the solver produces them.
    pub multipliers: Option<Multipliers>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolverError {
    #[error("problem dimensions are inconsistent: {0}")]
    Dimension(&'static str),
    #[error("lower bound exceeds upper bound at index {0}")]
    InvalidBounds(usize),
    #[error("quadratic term is not positive semidefinite")]
    NotPsd,
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("problem is infeasible (kkt residual {:.3e})", .0.kkt_residual)]
    Infeasible(alloc::boxed::Box<SolverSolution>),
    #[error("iteration limit reached (kkt residual {:.3e})", .0.kkt_residual)]
    MaxIterations(alloc::boxed::Box<SolverSolution>),
}
