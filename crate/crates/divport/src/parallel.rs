//! Month-parallel backtests on rayon.
//!
//! Months are evaluated by the same per-month functions as the serial
//! runners and reassembled in schedule order, so output is bit-identical
//! to `divport_core::backtest::{run_backtest, run_matrix}`.

use std::collections::BTreeMap;

use rayon::prelude::*;

use divport_core::backtest::{
    assemble, assemble_matrix, evaluate_month, evaluate_month_all, rebalance_months, BacktestConfig,
    BacktestError, BacktestResult, Combination,
};
use divport_core::ReturnsPanel;

/// Runs `f` on a pool of `threads` workers, or on the global pool when `None`.
pub fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .expect("thread pool")
            .install(f),
        None => f(),
    }
}

pub fn run_backtest_parallel(panel: &ReturnsPanel, cfg: &BacktestConfig) -> Result<BacktestResult, BacktestError> {
    let schedule = rebalance_months(panel, cfg)?;
    let outcomes = schedule
        .into_par_iter()
        .map(|t| evaluate_month(panel, t, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(assemble(cfg.combination(), outcomes))
}

pub fn run_matrix_parallel(
    panel: &ReturnsPanel,
    base: &BacktestConfig,
) -> Result<BTreeMap<Combination, BacktestResult>, BacktestError> {
    let schedule = rebalance_months(panel, base)?;
    let per_month = schedule
        .into_par_iter()
        .map(|t| evaluate_month_all(panel, t, base))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(assemble_matrix(per_month))
}
