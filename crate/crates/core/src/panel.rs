//! Monthly returns panel and estimation windows.
//!
//! A missing observation is stored as NaN. Anything else that is not a
//! finite number is rejected at construction.

use alloc::string::String;
use alloc::vec::Vec;

use crate::linalg::Matrix;
use crate::month::Month;

/// Default estimation window length, in months.
pub const DEFAULT_WINDOW: usize = 60;
/// Default number of months left out between the window and the OOS month.
pub const DEFAULT_SKIP: usize = 1;

/// Marker for a missing observation inside a panel matrix.
pub const MISSING: f64 = f64::NAN;

#[inline]
pub fn is_missing(v: f64) -> bool {
    v.is_nan()
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PanelError {
    #[error("panel has no rows")]
    EmptyPanel,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(&'static str),
    #[error("dates are not consecutive calendar months at row {row} ({date})")]
    NonConsecutiveDates { row: usize, date: Month },
    #[error("duplicate asset id `{0}`")]
    DuplicateAsset(String),
    #[error("non-finite value in {series} at row {row}, column {col}")]
    NonFiniteValue {
        series: &'static str,
        row: usize,
        col: usize,
    },
    #[error("return {value} at row {row}, column {col} is not greater than -1")]
    ReturnOutOfRange { row: usize, col: usize, value: f64 },
    #[error("market cap {value} at row {row}, column {col} is not strictly positive")]
    NonPositiveCap { row: usize, col: usize, value: f64 },
    #[error("panel has {have} months but at least {need} are required")]
    ShortPanel { have: usize, need: usize },
    #[error("month index {t} has insufficient history for window {window} with skip {skip}")]
    OutOfRange { t: usize, window: usize, skip: usize },
    #[error("no asset has a complete history over the window")]
    EmptyUniverse,
}

/// Aligned monthly excess returns, market excess returns and market caps.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnsPanel {
    dates: Vec<Month>,
    asset_ids: Vec<String>,
    returns: Matrix,
    market: Vec<f64>,
    caps: Matrix,
}

impl ReturnsPanel {
    /// Validates and assembles a panel. `caps = None` means all-ones caps.
    pub fn new(
        dates: Vec<Month>,
        asset_ids: Vec<String>,
        returns: Matrix,
        market: Vec<f64>,
        caps: Option<Matrix>,
    ) -> Result<Self, PanelError> {
        let t = dates.len();
        let n = asset_ids.len();
        if t == 0 {
            return Err(PanelError::EmptyPanel);
        }
        if returns.rows() != t || returns.cols() != n {
            return Err(PanelError::ShapeMismatch("returns must be T x N"));
        }
        if market.len() != t {
            return Err(PanelError::ShapeMismatch("market must have length T"));
        }
        let caps = match caps {
            Some(c) => c,
            None => Matrix::from_fn(t, n, |_, _| 1.0),
        };
        if caps.rows() != t || caps.cols() != n {
            return Err(PanelError::ShapeMismatch("caps must be T x N"));
        }
        for row in 1..t {
            if dates[row] != dates[row - 1].next() {
                return Err(PanelError::NonConsecutiveDates {
                    row,
                    date: dates[row],
                });
            }
        }
        for (i, id) in asset_ids.iter().enumerate() {
            if asset_ids[..i].contains(id) {
                return Err(PanelError::DuplicateAsset(id.clone()));
            }
        }
        for (row, &m) in market.iter().enumerate() {
            if !m.is_finite() {
                return Err(PanelError::NonFiniteValue {
                    series: "market",
                    row,
                    col: 0,
                });
            }
        }
        for row in 0..t {
            for col in 0..n {
                let r = returns[(row, col)];
                if !is_missing(r) {
                    if !r.is_finite() {
                        return Err(PanelError::NonFiniteValue {
                            series: "returns",
                            row,
                            col,
                        });
                    }
                    if r <= -1.0 {
                        return Err(PanelError::ReturnOutOfRange { row, col, value: r });
                    }
                }
                let c = caps[(row, col)];
                if !is_missing(c) {
                    if !c.is_finite() {
                        return Err(PanelError::NonFiniteValue {
                            series: "caps",
                            row,
                            col,
                        });
                    }
                    if c <= 0.0 {
                        return Err(PanelError::NonPositiveCap { row, col, value: c });
                    }
                }
            }
        }
        Ok(Self {
            dates,
            asset_ids,
            returns,
            market,
            caps,
        })
    }

    pub fn dates(&self) -> &[Month] {
        &self.dates
    }

    pub fn asset_ids(&self) -> &[String] {
        &self.asset_ids
    }

    pub fn returns(&self) -> &Matrix {
        &self.returns
    }

    pub fn market(&self) -> &[f64] {
        &self.market
    }

    pub fn caps(&self) -> &Matrix {
        &self.caps
    }

    pub fn n_months(&self) -> usize {
        self.dates.len()
    }

    pub fn n_assets(&self) -> usize {
        self.asset_ids.len()
    }

    pub fn has_missing(&self) -> bool {
        self.returns.as_slice().iter().any(|v| is_missing(*v))
    }

    /// Row index of a month, if present.
    pub fn index_of(&self, month: Month) -> Option<usize> {
        let first = self.dates[0].ordinal();
        let off = month.ordinal() - first;
        (off >= 0 && (off as usize) < self.dates.len()).then_some(off as usize)
    }

    /// Fails with `ShortPanel` unless at least one OOS month exists.
    pub fn ensure_length(&self, window: usize, skip: usize) -> Result<(), PanelError> {
        let need = window + skip + 1;
        if self.n_months() < need {
            return Err(PanelError::ShortPanel {
                have: self.n_months(),
                need,
            });
        }
        Ok(())
    }

    /// Estimation window for out-of-sample month `t`: rows `[t - skip - w, t - skip)`.
    pub fn window_at(&self, t: usize, w: usize, skip: usize) -> Result<EstimationWindow, PanelError> {
        let out_of_range = PanelError::OutOfRange { t, window: w, skip };
        if w < 2 || t >= self.n_months() {
            return Err(out_of_range);
        }
        let end = t.checked_sub(skip).ok_or(out_of_range.clone())?;
        if end < w {
            return Err(out_of_range);
        }
        Ok(self.window_through(end - 1, w))
    }

    /// The `w` rows ending at row `last`, inclusive.
    pub fn window_ending(&self, last: usize, w: usize) -> Result<EstimationWindow, PanelError> {
        if w < 2 || last >= self.n_months() || last + 1 < w {
            return Err(PanelError::OutOfRange {
                t: last + 1,
                window: w,
                skip: 0,
            });
        }
        Ok(self.window_through(last, w))
    }

    fn window_through(&self, last: usize, w: usize) -> EstimationWindow {
        let start = last + 1 - w;
        let n = self.n_assets();
        EstimationWindow {
            returns: Matrix::from_fn(w, n, |i, j| self.returns[(start + i, j)]),
            market: self.market[start..=last].to_vec(),
            caps: self.caps.row(last).to_vec(),
            end_date: self.dates[last],
            assets: (0..n).collect(),
        }
    }
}

/// Rows of the panel used to estimate one rebalance.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationWindow {
    /// W x N excess returns.
    pub returns: Matrix,
    /// W market excess returns.
    pub market: Vec<f64>,
    /// Market caps as of the last window month.
    pub caps: Vec<f64>,
    pub end_date: Month,
    /// Panel column index of each window column.
    pub assets: Vec<usize>,
}

impl EstimationWindow {
    /// Builds a complete window directly from data (no panel).
    pub fn from_parts(returns: Matrix, market: Vec<f64>, end_date: Month) -> Self {
        assert_eq!(returns.rows(), market.len(), "window rows must match market length");
        let n = returns.cols();
        Self {
            returns,
            market,
            caps: alloc::vec![1.0; n],
            end_date,
            assets: (0..n).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.returns.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.rows() == 0
    }

    pub fn n_assets(&self) -> usize {
        self.returns.cols()
    }

    /// Keeps the listed window columns.
    pub fn restrict(&self, cols: &[usize]) -> Self {
        Self {
            returns: self.returns.select_columns(cols),
            market: self.market.clone(),
            caps: cols.iter().map(|&c| self.caps[c]).collect(),
            end_date: self.end_date,
            assets: cols.iter().map(|&c| self.assets[c]).collect(),
        }
    }
}

/// Window columns whose returns are present over every window month.
pub fn active_universe(window: &EstimationWindow) -> Result<Vec<usize>, PanelError> {
    let idx: Vec<usize> = (0..window.n_assets())
        .filter(|&j| (0..window.len()).all(|i| window.returns[(i, j)].is_finite()))
        .collect();
    if idx.is_empty() {
        Err(PanelError::EmptyUniverse)
    } else {
        Ok(idx)
    }
}
