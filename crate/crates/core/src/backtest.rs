//! Rolling out-of-sample backtest.
//!
//! Each OOS month `t` is evaluated independently from the immutable panel:
//! window `[t - skip - W, t - skip)`, completeness filter, estimate,
//! construct, then `xᵀ r_t`. [`evaluate_month`] and [`evaluate_month_all`]
//! are the units of work; [`assemble`] orders outcomes by month, so any
//! execution order gives the same result.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

use crate::month::Month;
use crate::panel::{active_universe, is_missing, PanelError, ReturnsPanel, DEFAULT_SKIP, DEFAULT_WINDOW};
use crate::riskmodels::{estimate, CovarianceModel, RiskModelError, RiskModelKind, Shrinkage};
use crate::strategies::{construct, Holdings, StrategyConfig, StrategyError, StrategyKind};

/// Shortest window accepted by [`BacktestConfig::validate`].
pub const MIN_WINDOW: usize = 12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BacktestError {
    #[error("invalid backtest configuration: {0}")]
    InvalidConfig(&'static str),
    #[error(transparent)]
    Panel(#[from] PanelError),
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BacktestConfig {
    pub window: usize,
    pub skip: usize,
    pub risk_model: RiskModelKind,
    pub strategy: StrategyKind,
    pub strategy_config: StrategyConfig,
    pub shrinkage: Shrinkage,
    /// First OOS month to evaluate.
    pub start: Option<Month>,
    /// Last OOS month to evaluate.
    pub end: Option<Month>,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            window: DEFAULT_WINDOW,
            skip: DEFAULT_SKIP,
            risk_model: RiskModelKind::SingleFactor,
            strategy: StrategyKind::MinVariance,
            strategy_config: StrategyConfig::default(),
            shrinkage: Shrinkage::LedoitWolf,
            start: None,
            end: None,
        }
    }
}

impl BacktestConfig {
    pub fn validate(&self) -> Result<(), BacktestError> {
        if self.window < MIN_WINDOW {
            return Err(BacktestError::InvalidConfig("window must be at least 12 months"));
        }
        if self.skip > 1 {
            return Err(BacktestError::InvalidConfig("skip must be 0 or 1"));
        }
        if let (Some(s), Some(e)) = (self.start, self.end) {
            if s > e {
                return Err(BacktestError::InvalidConfig("start month is after end month"));
            }
        }
        if let Shrinkage::Fixed(d) = self.shrinkage {
            if !(0.0..=1.0).contains(&d) {
                return Err(BacktestError::InvalidConfig("shrinkage intensity must lie in [0, 1]"));
            }
        }
        if !(self.strategy_config.rp_bound > 0.0) {
            return Err(BacktestError::InvalidConfig("risk-parity bound must be positive"));
        }
        Ok(())
    }

    pub fn combination(&self) -> Combination {
        Combination::new(self.risk_model, self.strategy)
    }
}

/// One cell of the comparison matrix. Benchmarks carry no risk model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Combination {
    pub risk_model: Option<RiskModelKind>,
    pub strategy: StrategyKind,
}

impl Combination {
    pub fn new(risk_model: RiskModelKind, strategy: StrategyKind) -> Self {
        Self {
            risk_model: (!strategy.is_benchmark()).then_some(risk_model),
            strategy,
        }
    }

    /// The 11 cells: two benchmarks, then every risk model with every optimizer.
    pub fn all() -> Vec<Combination> {
        let mut out = Vec::with_capacity(11);
        for s in [StrategyKind::ValueWeighted, StrategyKind::EqualWeighted] {
            out.push(Combination {
                risk_model: None,
                strategy: s,
            });
        }
        for m in RiskModelKind::ALL {
            for s in StrategyKind::OPTIMIZED {
                out.push(Combination {
                    risk_model: Some(m),
                    strategy: s,
                });
            }
        }
        out
    }

    /// `strategy` or `risk_model__strategy`, safe as a file stem.
    pub fn slug(&self) -> alloc::string::String {
        match self.risk_model {
            Some(m) => alloc::format!("{}__{}", m.as_str(), self.strategy.as_str()),
            None => alloc::string::String::from(self.strategy.as_str()),
        }
    }
}

impl fmt::Display for Combination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.risk_model {
            Some(m) => write!(f, "{m}/{}", self.strategy),
            None => write!(f, "{}", self.strategy),
        }
    }
}

/// Why a month has no OOS return.
#[derive(Debug, Clone, PartialEq)]
pub enum Failure {
    Universe(PanelError),
    RiskModel(RiskModelError),
    Strategy(StrategyError),
}

impl Failure {
    /// Short machine-readable tag.
    pub fn tag(&self) -> &'static str {
        match self {
            Failure::Universe(PanelError::EmptyUniverse) => "empty_universe",
            Failure::Universe(_) => "panel",
            Failure::RiskModel(RiskModelError::DegenerateMarket) => "degenerate_market",
            Failure::RiskModel(_) => "risk_model",
            Failure::Strategy(StrategyError::NotPositiveDefinite) => "not_positive_definite",
            Failure::Strategy(StrategyError::NotPsd) => "not_psd",
            Failure::Strategy(StrategyError::NonPositiveCap(_)) => "non_positive_cap",
            Failure::Strategy(StrategyError::InfeasibleBounds(_)) => "infeasible_bounds",
            Failure::Strategy(StrategyError::Solver(_)) => "solver",
            Failure::Strategy(_) => "strategy",
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Universe(e) => write!(f, "{e}"),
            Failure::RiskModel(e) => write!(f, "{e}"),
            Failure::Strategy(e) => write!(f, "{e}"),
        }
    }
}

/// Holdings and realized return for one OOS month.
#[derive(Debug, Clone, PartialEq)]
pub struct MonthRecord {
    /// Full-panel-width weights; zero outside the active universe.
    pub holdings: Holdings,
    pub oos_return: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonthOutcome {
    pub t: usize,
    pub month: Month,
    pub result: Result<MonthRecord, Failure>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestResult {
    pub combination: Combination,
    /// Every scheduled OOS month, failed or not.
    pub schedule: Vec<Month>,
    /// Months with a recorded return, aligned with `oos_returns`.
    pub months: Vec<Month>,
    pub oos_returns: Vec<f64>,
    pub holdings_history: Vec<Holdings>,
    pub failures: Vec<(Month, Failure)>,
}

impl BacktestResult {
    /// Panel row indices of the recorded months.
    pub fn month_indices(&self, panel: &ReturnsPanel) -> Vec<usize> {
        self.months
            .iter()
            .filter_map(|m| panel.index_of(*m))
            .collect()
    }
}

/// Panel row indices of the OOS months, after the start/end clamps.
pub fn rebalance_months(panel: &ReturnsPanel, cfg: &BacktestConfig) -> Result<Vec<usize>, BacktestError> {
    cfg.validate()?;
    panel.ensure_length(cfg.window, cfg.skip)?;
    let first = cfg.window + cfg.skip;
    let dates = panel.dates();
    let schedule: Vec<usize> = (first..panel.n_months())
        .filter(|&t| cfg.start.is_none_or(|s| dates[t] >= s))
        .filter(|&t| cfg.end.is_none_or(|e| dates[t] <= e))
        .collect();
    if schedule.is_empty() {
        let have = match cfg.end {
            Some(e) if e < dates[0] => 0,
            Some(e) => panel.index_of(e).map_or(panel.n_months(), |i| i + 1),
            None => panel.n_months(),
        };
        return Err(PanelError::ShortPanel {
            have,
            need: first + 1,
        }
        .into());
    }
    Ok(schedule)
}

/// `Σ xᵢ r_{t,i}` with missing returns counted as zero.
pub fn realized_return(panel: &ReturnsPanel, t: usize, weights: &[f64]) -> f64 {
    let row = panel.returns().row(t);
    weights
        .iter()
        .zip(row)
        .filter(|(w, r)| **w != 0.0 && !is_missing(**r))
        .map(|(w, r)| w * r)
        .sum()
}

fn record(
    panel: &ReturnsPanel,
    t: usize,
    assets: &[usize],
    holdings: Result<Holdings, StrategyError>,
) -> Result<MonthRecord, Failure> {
    let h = holdings.map_err(Failure::Strategy)?;
    let full = h.expand(assets, panel.n_assets()).at(panel.dates()[t]);
    let oos_return = realized_return(panel, t, &full.weights);
    Ok(MonthRecord {
        holdings: full,
        oos_return,
    })
}

/// Runs one combination for OOS month `t`.
pub fn evaluate_month(panel: &ReturnsPanel, t: usize, cfg: &BacktestConfig) -> Result<MonthOutcome, BacktestError> {
    let window = panel.window_at(t, cfg.window, cfg.skip)?;
    let month = panel.dates()[t];
    let active = match active_universe(&window) {
        Ok(a) => a,
        Err(e) => {
            return Ok(MonthOutcome {
                t,
                month,
                result: Err(Failure::Universe(e)),
            })
        }
    };
    let sub = window.restrict(&active);
    let result = if cfg.strategy.is_benchmark() {
        record(panel, t, &sub.assets, construct(cfg.strategy, None, &sub.caps, &cfg.strategy_config))
    } else {
        match estimate(cfg.risk_model, &sub, cfg.shrinkage) {
            Ok(v) => record(
                panel,
                t,
                &sub.assets,
                construct(cfg.strategy, Some(&v), &sub.caps, &cfg.strategy_config),
            ),
            Err(e) => Err(Failure::RiskModel(e)),
        }
    };
    Ok(MonthOutcome { t, month, result })
}

/// Runs all 11 combinations for OOS month `t`, estimating each risk model once.
pub fn evaluate_month_all(
    panel: &ReturnsPanel,
    t: usize,
    cfg: &BacktestConfig,
) -> Result<Vec<(Combination, MonthOutcome)>, BacktestError> {
    let window = panel.window_at(t, cfg.window, cfg.skip)?;
    let month = panel.dates()[t];
    let combos = Combination::all();
    let active = match active_universe(&window) {
        Ok(a) => a,
        Err(e) => {
            return Ok(combos
                .into_iter()
                .map(|c| {
                    let result = Err(Failure::Universe(e.clone()));
                    (c, MonthOutcome { t, month, result })
                })
                .collect())
        }
    };
    let sub = window.restrict(&active);
    let mut models: BTreeMap<RiskModelKind, Result<CovarianceModel, RiskModelError>> = BTreeMap::new();
    for m in RiskModelKind::ALL {
        models.insert(m, estimate(m, &sub, cfg.shrinkage));
    }
    let sc = &cfg.strategy_config;
    Ok(combos
        .into_iter()
        .map(|c| {
            let result = match c.risk_model {
                None => record(panel, t, &sub.assets, construct(c.strategy, None, &sub.caps, sc)),
                Some(m) => match &models[&m] {
                    Ok(v) => record(panel, t, &sub.assets, construct(c.strategy, Some(v), &sub.caps, sc)),
                    Err(e) => Err(Failure::RiskModel(e.clone())),
                },
            };
            (c, MonthOutcome { t, month, result })
        })
        .collect())
}

/// Builds a result from per-month outcomes supplied in any order.
pub fn assemble(combination: Combination, mut outcomes: Vec<MonthOutcome>) -> BacktestResult {
    outcomes.sort_by_key(|o| o.t);
    let mut res = BacktestResult {
        combination,
        schedule: Vec::with_capacity(outcomes.len()),
        months: Vec::new(),
        oos_returns: Vec::new(),
        holdings_history: Vec::new(),
        failures: Vec::new(),
    };
    for o in outcomes {
        res.schedule.push(o.month);
        match o.result {
            Ok(r) => {
                res.months.push(o.month);
                res.oos_returns.push(r.oos_return);
                res.holdings_history.push(r.holdings);
            }
            Err(f) => res.failures.push((o.month, f)),
        }
    }
    res
}

/// Single-threaded backtest of one combination.
pub fn run_backtest(panel: &ReturnsPanel, cfg: &BacktestConfig) -> Result<BacktestResult, BacktestError> {
    let schedule = rebalance_months(panel, cfg)?;
    let outcomes = schedule
        .into_iter()
        .map(|t| evaluate_month(panel, t, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(assemble(cfg.combination(), outcomes))
}

/// Groups per-month matrix outcomes by combination.
pub fn assemble_matrix(
    per_month: Vec<Vec<(Combination, MonthOutcome)>>,
) -> BTreeMap<Combination, BacktestResult> {
    let mut by_combo: BTreeMap<Combination, Vec<MonthOutcome>> = BTreeMap::new();
    for c in Combination::all() {
        by_combo.insert(c, Vec::with_capacity(per_month.len()));
    }
    for month in per_month {
        for (c, o) in month {
            by_combo.entry(c).or_default().push(o);
        }
    }
    by_combo
        .into_iter()
        .map(|(c, o)| (c, assemble(c, o)))
        .collect()
}

/// Single-threaded run of all 11 combinations over one schedule.
/// `base.risk_model` and `base.strategy` are ignored.
pub fn run_matrix(
    panel: &ReturnsPanel,
    base: &BacktestConfig,
) -> Result<BTreeMap<Combination, BacktestResult>, BacktestError> {
    let schedule = rebalance_months(panel, base)?;
    let per_month = schedule
        .into_iter()
        .map(|t| evaluate_month_all(panel, t, base))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(assemble_matrix(per_month))
}
