//! Performance metrics and the exhibit-style comparison table.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::backtest::{BacktestResult, Combination};
use crate::panel::ReturnsPanel;
use crate::riskmodels::RiskModelKind;
use crate::strategies::{Holdings, StrategyKind};

pub use crate::strategies::POSITION_THRESHOLD;

const MONTHS_PER_YEAR: f64 = 12.0;

/// Printed where a metric is undefined or a portfolio could not be built.
pub const UNDEFINED_MARKER: &str = "--";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalyticsError {
    #[error("return series is empty")]
    EmptySeries,
    #[error("holdings history is empty")]
    EmptyHistory,
    #[error("return {value} at position {index} is not greater than -1")]
    ReturnOutOfRange { index: usize, value: f64 },
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("market returns have zero variance")]
    DegenerateMarket,
}

/// Annualized return statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Annualized {
    pub avg_excess_return: f64,
    pub stdev: f64,
    /// `None` when `stdev` is zero.
    pub sharpe: Option<f64>,
    /// `None` when `Π(1 + r)` is not positive.
    pub compound_return: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PerformanceReport {
    pub avg_excess_return: f64,
    pub stdev: f64,
    pub sharpe: Option<f64>,
    pub compound_return: Option<f64>,
    pub market_beta: f64,
    pub avg_positions: f64,
    pub effective_n: f64,
    /// Months with a recorded return.
    pub n_months: usize,
    /// Months where the portfolio could not be built.
    pub n_failures: usize,
}

fn sample_mean_std(r: &[f64]) -> (f64, f64) {
    let n = r.len() as f64;
    let mean = r.iter().sum::<f64>() / n;
    if r.iter().all(|v| *v == r[0]) {
        return (r[0], 0.0);
    }
    let ss: f64 = r.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, libm::sqrt(ss / (n - 1.0)))
}

pub fn annualize(r: &[f64]) -> Result<Annualized, AnalyticsError> {
    if r.is_empty() {
        return Err(AnalyticsError::EmptySeries);
    }
    if let Some((index, &value)) = r.iter().enumerate().find(|(_, v)| !(**v > -1.0)) {
        return Err(AnalyticsError::ReturnOutOfRange { index, value });
    }
    let (mean, sd) = sample_mean_std(r);
    let avg = MONTHS_PER_YEAR * mean;
    let stdev = libm::sqrt(MONTHS_PER_YEAR) * sd;
    let growth: f64 = r.iter().map(|v| 1.0 + v).product();
    let compound = (growth > 0.0 && growth.is_finite())
        .then(|| libm::pow(growth, MONTHS_PER_YEAR / r.len() as f64) - 1.0);
    Ok(Annualized {
        avg_excess_return: avg,
        stdev,
        sharpe: (stdev > 0.0).then(|| avg / stdev),
        compound_return: compound,
    })
}

/// OLS slope of `portfolio` on `market`, with intercept.
pub fn market_beta(portfolio: &[f64], market: &[f64]) -> Result<f64, AnalyticsError> {
    if portfolio.len() != market.len() {
        return Err(AnalyticsError::LengthMismatch(portfolio.len(), market.len()));
    }
    if portfolio.is_empty() {
        return Err(AnalyticsError::EmptySeries);
    }
    let n = market.len() as f64;
    let mp = portfolio.iter().sum::<f64>() / n;
    let mm = market.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (p, m) in portfolio.iter().zip(market) {
        sxy += (p - mp) * (m - mm);
        sxx += (m - mm) * (m - mm);
    }
    if !(sxx > 0.0) {
        return Err(AnalyticsError::DegenerateMarket);
    }
    Ok(sxy / sxx)
}

/// `(avg_positions, effective_n)` averaged over the history.
pub fn concentration(history: &[Holdings], threshold: f64) -> Result<(f64, f64), AnalyticsError> {
    if history.is_empty() {
        return Err(AnalyticsError::EmptyHistory);
    }
    let n = history.len() as f64;
    let mut positions = 0.0;
    let mut eff = 0.0;
    for h in history {
        positions += h.weights.iter().filter(|w| **w > threshold).count() as f64;
        eff += h.effective_n();
    }
    Ok((positions / n, eff / n))
}

/// Market excess returns at the months recorded in `result`.
pub fn aligned_market(result: &BacktestResult, panel: &ReturnsPanel) -> Vec<f64> {
    result
        .month_indices(panel)
        .into_iter()
        .map(|t| panel.market()[t])
        .collect()
}

/// All seven metrics. `market` is aligned with `result.months`.
pub fn build_report(
    result: &BacktestResult,
    market: &[f64],
    threshold: f64,
) -> Result<PerformanceReport, AnalyticsError> {
    let a = annualize(&result.oos_returns)?;
    let beta = market_beta(&result.oos_returns, market)?;
    let (avg_positions, effective_n) = concentration(&result.holdings_history, threshold)?;
    Ok(PerformanceReport {
        avg_excess_return: a.avg_excess_return,
        stdev: a.stdev,
        sharpe: a.sharpe,
        compound_return: a.compound_return,
        market_beta: beta,
        avg_positions,
        effective_n,
        n_months: result.oos_returns.len(),
        n_failures: result.failures.len(),
    })
}

/// Row labels of the comparison table, in order.
pub const EXHIBIT_ROWS: [&str; 7] = [
    "Average Excess Return",
    "Standard Deviation",
    "Sharpe Ratio",
    "Compound Return",
    "Market Beta",
    "Average Positions",
    "Effective N",
];

/// One risk model's table: the two benchmarks and its three optimizers.
#[derive(Debug, Clone, PartialEq)]
pub struct Exhibit {
    pub risk_model: RiskModelKind,
    /// In [`StrategyKind::ALL`] order. `None` when no month could be evaluated.
    pub columns: Vec<(StrategyKind, Option<PerformanceReport>)>,
}

fn pct(v: f64) -> String {
    alloc::format!("{:.1}%", 100.0 * v)
}

impl Exhibit {
    pub fn title(&self) -> String {
        alloc::format!("Performance of {} Risk Model Portfolios", self.risk_model.label())
    }

    /// Formatted cells, one row per [`EXHIBIT_ROWS`] entry.
    pub fn cells(&self) -> Vec<Vec<String>> {
        let undefined = || String::from(UNDEFINED_MARKER);
        let mut rows: Vec<Vec<String>> = EXHIBIT_ROWS.iter().map(|_| Vec::new()).collect();
        for (_, rep) in &self.columns {
            let Some(r) = rep else {
                for row in rows.iter_mut() {
                    row.push(undefined());
                }
                continue;
            };
            rows[0].push(pct(r.avg_excess_return));
            rows[1].push(pct(r.stdev));
            rows[2].push(r.sharpe.map_or_else(undefined, |s| alloc::format!("{s:.2}")));
            rows[3].push(r.compound_return.map_or_else(undefined, pct));
            rows[4].push(alloc::format!("{:.2}", r.market_beta));
            rows[5].push(alloc::format!("{:.1}", r.avg_positions));
            rows[6].push(alloc::format!("{:.1}", r.effective_n));
        }
        rows
    }

    /// Aligned plain-text table.
    pub fn to_text(&self) -> String {
        let header: Vec<&str> = self.columns.iter().map(|(s, _)| s.label()).collect();
        let cells = self.cells();
        let label_w = EXHIBIT_ROWS.iter().map(|s| s.chars().count()).max().unwrap_or(0);
        let widths: Vec<usize> = header
            .iter()
            .enumerate()
            .map(|(j, h)| {
                cells
                    .iter()
                    .map(|row| row[j].chars().count())
                    .chain(core::iter::once(h.chars().count()))
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.title());
        let _ = write!(out, "{:label_w$}", "");
        for (h, w) in header.iter().zip(&widths) {
            let _ = write!(out, "  {h:>w$}");
        }
        out.push('\n');
        for (label, row) in EXHIBIT_ROWS.iter().zip(&cells) {
            let _ = write!(out, "{label:label_w$}");
            for (c, w) in row.iter().zip(&widths) {
                let _ = write!(out, "  {c:>w$}");
            }
            out.push('\n');
        }
        out
    }
}

/// One table per risk model from the 11-entry matrix. Columns whose
/// report cannot be built render as undefined.
pub fn build_exhibits(
    results: &BTreeMap<Combination, BacktestResult>,
    panel: &ReturnsPanel,
    threshold: f64,
) -> Vec<Exhibit> {
    RiskModelKind::ALL
        .iter()
        .map(|&m| Exhibit {
            risk_model: m,
            columns: StrategyKind::ALL
                .iter()
                .map(|&s| {
                    let rep = results
                        .get(&Combination::new(m, s))
                        .and_then(|r| build_report(r, &aligned_market(r, panel), threshold).ok());
                    (s, rep)
                })
                .collect(),
        })
        .collect()
}
