//! Long-only, fully invested portfolio construction.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::linalg::{dot, sum_compensated, Matrix};
use crate::month::Month;
use crate::riskmodels::CovarianceModel;
use crate::solver::{
    solve_box_log_barrier, solve_qp, QuadraticProgram, SolverError, SolverOptions, SolverSolution,
};

/// Weights at or below this count as zero positions.
pub const POSITION_THRESHOLD: f64 = 1e-6;
/// Default risk-parity upper bound `d`.
pub const DEFAULT_RP_BOUND: f64 = 5.0;
/// Negative weights down to this are treated as solver dust and clipped.
const NEGATIVE_DUST: f64 = 1e-10;
/// Tolerance on `Σx = 1` and on the upper bound.
const BUDGET_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StrategyError {
    #[error("upper bounds sum to {0} < 1, full investment is infeasible")]
    InfeasibleBounds(f64),
    #[error("upper bound must be positive, got {0}")]
    InvalidUpperBound(f64),
    #[error("risk-parity bound d must be positive, got {0}")]
    InvalidRpBound(f64),
    #[error("upper bound vector has length {have}, expected {want}")]
    BoundLength { have: usize, want: usize },
    #[error("volatility of asset {0} is zero")]
    DegenerateVols(usize),
    #[error("market cap of asset {0} is not strictly positive")]
    NonPositiveCap(usize),
    #[error("covariance matrix is not positive semidefinite")]
    NotPsd,
    #[error("covariance matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("portfolio needs at least one asset")]
    Empty,
    #[error("solver failed: {0}")]
    Solver(SolverError),
    #[error("solution violates holdings invariants: {0}")]
    InvalidSolution(&'static str),
}

impl From<SolverError> for StrategyError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::NotPsd => StrategyError::NotPsd,
            SolverError::NotPositiveDefinite => StrategyError::NotPositiveDefinite,
            other => StrategyError::Solver(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum StrategyKind {
    ValueWeighted,
    EqualWeighted,
    MinVariance,
    MaxDiversification,
    RiskParity,
}

impl StrategyKind {
    /// Column order of the performance tables.
    pub const ALL: [StrategyKind; 5] = [
        StrategyKind::ValueWeighted,
        StrategyKind::EqualWeighted,
        StrategyKind::MinVariance,
        StrategyKind::MaxDiversification,
        StrategyKind::RiskParity,
    ];

    pub const OPTIMIZED: [StrategyKind; 3] = [
        StrategyKind::MinVariance,
        StrategyKind::MaxDiversification,
        StrategyKind::RiskParity,
    ];

    pub fn is_benchmark(self) -> bool {
        matches!(self, StrategyKind::ValueWeighted | StrategyKind::EqualWeighted)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::ValueWeighted => "value_weighted",
            StrategyKind::EqualWeighted => "equal_weighted",
            StrategyKind::MinVariance => "min_variance",
            StrategyKind::MaxDiversification => "max_diversification",
            StrategyKind::RiskParity => "risk_parity",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            StrategyKind::ValueWeighted => "Market (Value-Weighted)",
            StrategyKind::EqualWeighted => "Equal Weighted",
            StrategyKind::MinVariance => "Minimum Variance",
            StrategyKind::MaxDiversification => "Maximum Diversification",
            StrategyKind::RiskParity => "Risk Parity",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyKind {
    type Err = &'static str;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or("expected value_weighted, equal_weighted, min_variance, max_diversification or risk_parity")
    }
}

/// Per-asset upper bound `u`.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum UpperBound {
    #[default]
    None,
    Uniform(f64),
    PerAsset(Vec<f64>),
}

impl UpperBound {
    /// Resolved bound vector for `n` assets; `+∞` where unbounded.
    pub fn resolve(&self, n: usize) -> Result<Vec<f64>, StrategyError> {
        let u = match self {
            UpperBound::None => vec![f64::INFINITY; n],
            UpperBound::Uniform(v) => vec![*v; n],
            UpperBound::PerAsset(v) if v.len() == n => v.clone(),
            UpperBound::PerAsset(v) => {
                return Err(StrategyError::BoundLength {
                    have: v.len(),
                    want: n,
                })
            }
        };
        if let Some(bad) = u.iter().find(|v| !(**v > 0.0)) {
            return Err(StrategyError::InvalidUpperBound(*bad));
        }
        let total: f64 = u.iter().map(|v| v.min(1.0)).sum();
        if total < 1.0 - BUDGET_TOL {
            return Err(StrategyError::InfeasibleBounds(total));
        }
        Ok(u)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StrategyConfig {
    pub upper_bound: UpperBound,
    /// Risk-parity bound `d`.
    pub rp_bound: f64,
    pub solver: SolverOptions,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self {
            upper_bound: UpperBound::None,
            rp_bound: DEFAULT_RP_BOUND,
            solver: SolverOptions::default(),
        }
    }
}

/// Weights of one portfolio at one rebalance.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Holdings {
    pub weights: Vec<f64>,
    pub strategy: StrategyKind,
    pub rebalance_date: Option<Month>,
}

impl Holdings {
    /// Clips solver dust, checks the budget and wraps the weights.
    fn finalize(
        mut weights: Vec<f64>,
        strategy: StrategyKind,
        upper: Option<&[f64]>,
    ) -> Result<Self, StrategyError> {
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(StrategyError::InvalidSolution("non-finite weight"));
        }
        if weights.iter().any(|w| *w < -NEGATIVE_DUST) {
            return Err(StrategyError::InvalidSolution("negative weight"));
        }
        for w in &mut weights {
            if *w < 0.0 {
                *w = 0.0;
            }
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > BUDGET_TOL {
            return Err(StrategyError::InvalidSolution("weights do not sum to one"));
        }
        if let Some(u) = upper {
            if weights.iter().zip(u).any(|(w, u)| *w > u + BUDGET_TOL) {
                return Err(StrategyError::InvalidSolution("upper bound exceeded"));
            }
        }
        Ok(Self {
            weights,
            strategy,
            rebalance_date: None,
        })
    }

    pub fn at(mut self, date: Month) -> Self {
        self.rebalance_date = Some(date);
        self
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Number of weights above [`POSITION_THRESHOLD`].
    pub fn positions(&self) -> usize {
        self.weights.iter().filter(|w| **w > POSITION_THRESHOLD).count()
    }

    /// `1 / Σ xᵢ²`
    pub fn effective_n(&self) -> f64 {
        1.0 / sum_compensated(self.weights.iter().map(|w| w * w))
    }

    /// Scatters the weights into a vector of length `n` at `index`.
    pub fn expand(&self, index: &[usize], n: usize) -> Self {
        let mut w = vec![0.0; n];
        for (k, &i) in index.iter().enumerate() {
            w[i] = self.weights[k];
        }
        Self {
            weights: w,
            strategy: self.strategy,
            rebalance_date: self.rebalance_date,
        }
    }
}

/// Portfolio variance `xᵀVx`.
pub fn portfolio_variance(v: &Matrix, x: &[f64]) -> f64 {
    v.quad_form(x)
}

/// `(σᵀx) / √(xᵀVx)`
pub fn diversification_ratio(v: &CovarianceModel, x: &[f64]) -> f64 {
    dot(v.vols(), x) / libm::sqrt(v.matrix().quad_form(x))
}

/// Risk contributions `xᵢ (Vx)ᵢ`.
pub fn risk_contributions(v: &Matrix, x: &[f64]) -> Vec<f64> {
    v.mul_vec(x).iter().zip(x).map(|(vx, xi)| vx * xi).collect()
}

/// `min xᵀVx  s.t. 1ᵀx = 1, 0 ≤ x ≤ u`.
pub fn min_variance(v: &CovarianceModel, cfg: &StrategyConfig) -> Result<Holdings, StrategyError> {
    min_variance_run(v, cfg).map(|r| r.holdings)
}

fn min_variance_run(v: &CovarianceModel, cfg: &StrategyConfig) -> Result<StrategyRun, StrategyError> {
    let n = v.dim();
    if n == 0 {
        return Err(StrategyError::Empty);
    }
    let u = cfg.upper_bound.resolve(n)?;
    let prob = QuadraticProgram::new(v.matrix().scaled(2.0), vec![0.0; n])
        .with_equalities(Matrix::from_vec(1, n, vec![1.0; n]), vec![1.0])
        .with_bounds(vec![0.0; n], u.clone());
    let sol = solve_qp(&prob, &cfg.solver)?;
    let holdings = Holdings::finalize(sol.x.clone(), StrategyKind::MinVariance, Some(&u))?;
    Ok(StrategyRun::new(holdings, sol))
}

/// Maximum diversification through the homogenised program
/// `min zᵀVz  s.t. σᵀz = 1, z ≥ 0, z − (1ᵀz)·u ≤ 0`, then `x = z / 1ᵀz`.
pub fn max_diversification(
    v: &CovarianceModel,
    cfg: &StrategyConfig,
) -> Result<Holdings, StrategyError> {
    max_diversification_run(v, cfg).map(|r| r.holdings)
}

fn max_diversification_run(v: &CovarianceModel, cfg: &StrategyConfig) -> Result<StrategyRun, StrategyError> {
    let n = v.dim();
    if n == 0 {
        return Err(StrategyError::Empty);
    }
    let sigma = v.vols();
    if let Some(i) = sigma.iter().position(|s| !(*s > 0.0)) {
        return Err(StrategyError::DegenerateVols(i));
    }
    let u = cfg.upper_bound.resolve(n)?;
    let bounded: Vec<usize> = (0..n).filter(|&i| u[i] < 1.0).collect();
    let g = Matrix::from_fn(bounded.len(), n, |r, j| {
        let i = bounded[r];
        (if i == j { 1.0 } else { 0.0 }) - u[i]
    });
    let prob = QuadraticProgram::new(v.matrix().scaled(2.0), vec![0.0; n])
        .with_equalities(Matrix::from_vec(1, n, sigma.to_vec()), vec![1.0])
        .with_inequalities(g, vec![0.0; bounded.len()])
        .with_bounds(vec![0.0; n], vec![f64::INFINITY; n]);
    let sol = solve_qp(&prob, &cfg.solver)?;
    let z: Vec<f64> = sol.x.iter().map(|v| v.max(0.0)).collect();
    let k: f64 = z.iter().sum();
    if !(k > 0.0) {
        return Err(StrategyError::InvalidSolution("zero homogenisation constant"));
    }
    let x = z.iter().map(|zi| zi / k).collect();
    let holdings = Holdings::finalize(x, StrategyKind::MaxDiversification, Some(&u))?;
    Ok(StrategyRun::new(holdings, sol))
}

/// Risk parity: `y = argmin ½yᵀVy − Σ log yᵢ` on `(0, d]`, then `x = y / 1ᵀy`.
pub fn risk_parity(v: &CovarianceModel, cfg: &StrategyConfig) -> Result<Holdings, StrategyError> {
    risk_parity_run(v, cfg).map(|r| r.holdings)
}

fn risk_parity_run(v: &CovarianceModel, cfg: &StrategyConfig) -> Result<StrategyRun, StrategyError> {
    let n = v.dim();
    if n == 0 {
        return Err(StrategyError::Empty);
    }
    if !(cfg.rp_bound > 0.0) {
        return Err(StrategyError::InvalidRpBound(cfg.rp_bound));
    }
    let sol = solve_box_log_barrier(v.matrix(), cfg.rp_bound, &cfg.solver)?;
    let total: f64 = sol.x.iter().sum();
    let x = sol.x.iter().map(|y| y / total).collect();
    let holdings = Holdings::finalize(x, StrategyKind::RiskParity, None)?;
    Ok(StrategyRun::new(holdings, sol))
}

pub fn equal_weighted(n: usize) -> Result<Holdings, StrategyError> {
    if n == 0 {
        return Err(StrategyError::Empty);
    }
    Ok(Holdings {
        weights: vec![1.0 / n as f64; n],
        strategy: StrategyKind::EqualWeighted,
        rebalance_date: None,
    })
}

pub fn value_weighted(caps: &[f64]) -> Result<Holdings, StrategyError> {
    if caps.is_empty() {
        return Err(StrategyError::Empty);
    }
    if let Some(i) = caps.iter().position(|c| !(*c > 0.0) || !c.is_finite()) {
        return Err(StrategyError::NonPositiveCap(i));
    }
    let total: f64 = caps.iter().sum();
    Ok(Holdings {
        weights: caps.iter().map(|c| c / total).collect(),
        strategy: StrategyKind::ValueWeighted,
        rebalance_date: None,
    })
}

/// Holdings plus the solver output behind them.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyRun {
    pub holdings: Holdings,
    /// `None` for the benchmarks.
    pub solution: Option<SolverSolution>,
}

impl StrategyRun {
    fn new(holdings: Holdings, solution: SolverSolution) -> Self {
        Self {
            holdings,
            solution: Some(solution),
        }
    }

    fn benchmark(holdings: Holdings) -> Self {
        Self {
            holdings,
            solution: None,
        }
    }
}

/// Like [`construct`], keeping the solver output.
pub fn construct_run(
    kind: StrategyKind,
    v: Option<&CovarianceModel>,
    caps: &[f64],
    cfg: &StrategyConfig,
) -> Result<StrategyRun, StrategyError> {
    let need = || v.ok_or(StrategyError::Empty);
    match kind {
        StrategyKind::EqualWeighted => equal_weighted(caps.len()).map(StrategyRun::benchmark),
        StrategyKind::ValueWeighted => value_weighted(caps).map(StrategyRun::benchmark),
        StrategyKind::MinVariance => min_variance_run(need()?, cfg),
        StrategyKind::MaxDiversification => max_diversification_run(need()?, cfg),
        StrategyKind::RiskParity => risk_parity_run(need()?, cfg),
    }
}

/// Builds the holdings of any strategy. Benchmarks ignore `v`.
pub fn construct(
    kind: StrategyKind,
    v: Option<&CovarianceModel>,
    caps: &[f64],
    cfg: &StrategyConfig,
) -> Result<Holdings, StrategyError> {
    construct_run(kind, v, caps, cfg).map(|r| r.holdings)
}
