//! Risk models, long-only portfolio construction and a rolling
//! out-of-sample backtest for monthly equity panels.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the CLI and
//! the parallel runner live in the `divport` crate.

#![cfg_attr(not(test), no_std)]
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod analytics;
pub mod backtest;
pub mod linalg;
pub mod month;
pub mod panel;
pub mod riskmodels;
pub mod solver;
pub mod strategies;
pub mod synthgen;

pub use analytics::{build_report, Exhibit, PerformanceReport};
pub use backtest::{run_backtest, run_matrix, BacktestConfig, BacktestError, BacktestResult, Combination};
pub use linalg::Matrix;
pub use month::Month;
pub use panel::{active_universe, EstimationWindow, PanelError, ReturnsPanel};
pub use riskmodels::{CovarianceModel, RiskModelError, RiskModelKind, Shrinkage};
pub use solver::{SolverError, SolverOptions, SolverSolution, SolverStatus};
pub use strategies::{Holdings, StrategyConfig, StrategyError, StrategyKind, UpperBound};
pub use synthgen::{generate, GroundTruth, SynthSpec};
