//! `divport` command line.
//!
//! Precedence: flags, then the `--config` file (TOML or JSON), then
//! defaults. The resolved configuration is written to `manifest.json` in the
//! output directory in the same shape `--config` accepts, so a run can be
//! repeated from its manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use divport_core::analytics::{aligned_market, build_exhibits, build_report, Exhibit, PerformanceReport, EXHIBIT_ROWS, POSITION_THRESHOLD};
use divport_core::backtest::{BacktestConfig, BacktestError, BacktestResult};
use divport_core::riskmodels::{
    constant_correlation_estimates, estimate, estimate_loadings, shrink_betas, shrink_log_variances,
    RiskModelKind, Shrinkage, VARIANCE_FLOOR,
};
use divport_core::solver::{SolverOptions, DEFAULT_MAX_ITER, DEFAULT_TOL};
use divport_core::strategies::{construct_run, StrategyConfig, StrategyKind, UpperBound, DEFAULT_RP_BOUND};
use divport_core::synthgen::{generate, SynthSpec};
use divport_core::{active_universe, Month, ReturnsPanel};

use crate::io::{self, write_atomic, IoError, LoadOptions};
use crate::parallel::{run_backtest_parallel, run_matrix_parallel, with_threads};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        if e.is_missing_file() {
            CliError::Config(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

impl From<BacktestError> for CliError {
    fn from(e: BacktestError) -> Self {
        match e {
            BacktestError::InvalidConfig(_) => CliError::Config(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "divport", version, about = "Risk-model portfolio backtests on monthly return panels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Backtest one risk model and strategy.
    Backtest(RunArgs),
    /// Backtest all 9 risk-model/strategy combinations and both benchmarks.
    Matrix(RunArgs),
    /// Write a seeded synthetic single-factor panel.
    Generate(GenerateArgs),
    /// Estimate one risk model on the window ending at a given month.
    Estimate(RunArgs),
}

#[derive(Debug, Args, Default)]
pub struct RunArgs {
    /// TOML or JSON config file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Returns CSV: `date,<asset ids...>`.
    #[arg(long)]
    pub returns: Option<PathBuf>,
    /// Market CSV: `date,market`.
    #[arg(long)]
    pub market: Option<PathBuf>,
    /// Market caps CSV, same shape as the returns file. All ones when absent.
    #[arg(long)]
    pub caps: Option<PathBuf>,
    /// Read empty return cells as missing; incomplete assets leave the window's universe.
    #[arg(long)]
    pub allow_missing: bool,
    /// single_factor, constant_correlation or sample_shrunk.
    #[arg(long, value_parser = clap::value_parser!(RiskModelKind))]
    pub risk_model: Option<RiskModelKind>,
    /// value_weighted, equal_weighted, min_variance, max_diversification or risk_parity.
    #[arg(long, value_parser = clap::value_parser!(StrategyKind))]
    pub strategy: Option<StrategyKind>,
    /// Estimation window in months (default 60, at least 12).
    #[arg(long)]
    pub window: Option<usize>,
    /// Months left out between the window and the OOS month, 0 or 1 (default 1).
    #[arg(long)]
    pub skip: Option<usize>,
    /// Uniform per-asset weight cap for min variance and max diversification (default none).
    #[arg(long)]
    pub upper_bound: Option<f64>,
    /// Risk-parity bound d on the unnormalized weights (default 5).
    #[arg(long)]
    pub rp_bound: Option<f64>,
    /// Fixed shrinkage intensity in [0, 1]; Ledoit-Wolf when absent.
    #[arg(long)]
    pub shrink_delta: Option<f64>,
    /// First OOS month, YYYY-MM.
    #[arg(long)]
    pub start: Option<Month>,
    /// Last OOS month, YYYY-MM.
    #[arg(long)]
    pub end: Option<Month>,
    /// Last window month for `estimate`, YYYY-MM (default: last panel month).
    #[arg(long)]
    pub end_month: Option<Month>,
    /// Solver tolerance (default 1e-8).
    #[arg(long)]
    pub tol: Option<f64>,
    /// Solver iteration cap (default 50000).
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Worker threads; 1 runs single-threaded. Defaults to all cores.
    #[arg(long)]
    pub threads: Option<usize>,
    /// With `estimate --strategy`, write the solver's per-iteration residuals to trace.csv.
    #[arg(long)]
    pub trace: bool,
}

#[derive(Debug, Args, Default)]
pub struct GenerateArgs {
    /// TOML or JSON config file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// RNG seed (default 0).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of assets (default 100).
    #[arg(long)]
    pub n_assets: Option<usize>,
    /// Number of months (default 600, at least 62).
    #[arg(long)]
    pub n_months: Option<usize>,
}

/// Every configurable value. Config files and manifests use this shape.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub command: Option<String>,
    pub version: Option<String>,
    pub out: Option<PathBuf>,
    pub returns: Option<PathBuf>,
    pub market: Option<PathBuf>,
    pub caps: Option<PathBuf>,
    pub allow_missing: Option<bool>,
    pub risk_model: Option<RiskModelKind>,
    pub strategy: Option<StrategyKind>,
    pub window: Option<usize>,
    pub skip: Option<usize>,
    pub upper_bound: Option<f64>,
    pub rp_bound: Option<f64>,
    pub shrink_delta: Option<f64>,
    pub start: Option<Month>,
    pub end: Option<Month>,
    pub end_month: Option<Month>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub seed: Option<u64>,
    pub n_assets: Option<usize>,
    pub n_months: Option<usize>,
    pub synth: Option<SynthSpec>,
}

pub fn read_config(path: &Path) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_err(format!("cannot read config {}: {e}", path.display())))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))
    } else {
        toml::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))
    }
}

fn pick<T>(flag: Option<T>, file: Option<T>) -> Option<T> {
    flag.or(file)
}

impl RunArgs {
    fn resolve(&self, command: &str) -> Result<FileConfig, CliError> {
        let f = match &self.config {
            Some(p) => read_config(p)?,
            None => FileConfig::default(),
        };
        if let Some(c) = &f.command {
            if c != command {
                return Err(config_err(format!("config was written for `{c}`, not `{command}`")));
            }
        }
        Ok(FileConfig {
            command: Some(command.to_string()),
            version: Some(env!("CARGO_PKG_VERSION").to_string()),
            out: pick(self.out.clone(), f.out),
            returns: pick(self.returns.clone(), f.returns),
            market: pick(self.market.clone(), f.market),
            caps: pick(self.caps.clone(), f.caps),
            allow_missing: Some(self.allow_missing || f.allow_missing.unwrap_or(false)),
            risk_model: pick(self.risk_model, f.risk_model),
            strategy: pick(self.strategy, f.strategy),
            window: pick(self.window, f.window),
            skip: pick(self.skip, f.skip),
            upper_bound: pick(self.upper_bound, f.upper_bound),
            rp_bound: pick(self.rp_bound, f.rp_bound),
            shrink_delta: pick(self.shrink_delta, f.shrink_delta),
            start: pick(self.start, f.start),
            end: pick(self.end, f.end),
            end_month: pick(self.end_month, f.end_month),
            tol: pick(self.tol, f.tol),
            max_iter: pick(self.max_iter, f.max_iter),
            seed: f.seed,
            n_assets: f.n_assets,
            n_months: f.n_months,
            synth: None,
        })
    }
}

/// Typed view of a resolved [`FileConfig`] for the panel subcommands.
struct Resolved {
    file: FileConfig,
    out: PathBuf,
    returns: PathBuf,
    market: PathBuf,
    caps: Option<PathBuf>,
    backtest: BacktestConfig,
}

fn resolve_run(mut file: FileConfig, need_pair: bool) -> Result<Resolved, CliError> {
    let out = file.out.clone().ok_or_else(|| config_err("--out is required"))?;
    let returns = file.returns.clone().ok_or_else(|| config_err("--returns is required"))?;
    let market = file.market.clone().ok_or_else(|| config_err("--market is required"))?;
    for p in [Some(&returns), Some(&market), file.caps.as_ref()].into_iter().flatten() {
        if p.as_os_str().is_empty() {
            return Err(config_err("input paths must not be empty"));
        }
    }
    let risk_model = file.risk_model.unwrap_or(RiskModelKind::SingleFactor);
    let strategy = file.strategy.unwrap_or(StrategyKind::MinVariance);
    if need_pair && (file.risk_model.is_none() || file.strategy.is_none()) {
        return Err(config_err("--risk-model and --strategy are required"));
    }
    let upper_bound = match file.upper_bound {
        None => UpperBound::None,
        Some(u) if u > 0.0 && u.is_finite() => UpperBound::Uniform(u),
        Some(u) => return Err(config_err(format!("--upper-bound must be positive, got {u}"))),
    };
    let rp_bound = file.rp_bound.unwrap_or(DEFAULT_RP_BOUND);
    if !(rp_bound > 0.0) || !rp_bound.is_finite() {
        return Err(config_err(format!("--rp-bound must be positive, got {rp_bound}")));
    }
    let shrinkage = match file.shrink_delta {
        None => Shrinkage::LedoitWolf,
        Some(d) if (0.0..=1.0).contains(&d) => Shrinkage::Fixed(d),
        Some(d) => return Err(config_err(format!("--shrink-delta must lie in [0, 1], got {d}"))),
    };
    let tol = file.tol.unwrap_or(DEFAULT_TOL);
    if !(tol > 0.0) {
        return Err(config_err(format!("--tol must be positive, got {tol}")));
    }
    let backtest = BacktestConfig {
        window: file.window.unwrap_or(divport_core::panel::DEFAULT_WINDOW),
        skip: file.skip.unwrap_or(divport_core::panel::DEFAULT_SKIP),
        risk_model,
        strategy,
        strategy_config: StrategyConfig {
            upper_bound,
            rp_bound,
            solver: SolverOptions {
                tol,
                max_iter: file.max_iter.unwrap_or(DEFAULT_MAX_ITER),
                trace: false,
            },
        },
        shrinkage,
        start: file.start,
        end: file.end,
    };
    backtest.validate()?;
    file.window = Some(backtest.window);
    file.skip = Some(backtest.skip);
    file.rp_bound = Some(rp_bound);
    file.tol = Some(tol);
    file.max_iter = Some(backtest.strategy_config.solver.max_iter);
    if need_pair {
        file.risk_model = Some(risk_model);
        file.strategy = Some(strategy);
    }
    Ok(Resolved {
        caps: file.caps.clone(),
        file,
        out,
        returns,
        market,
        backtest,
    })
}

fn load(r: &Resolved, check_length: bool) -> Result<ReturnsPanel, CliError> {
    let opts = LoadOptions {
        allow_missing: r.file.allow_missing.unwrap_or(false),
        window: check_length.then_some(r.backtest.window),
        skip: r.backtest.skip,
    };
    Ok(io::load_panel(&r.returns, &r.market, r.caps.as_deref(), opts)?)
}

/// Output files, written only after every one of them has been rendered.
#[derive(Default)]
struct Outputs(BTreeMap<PathBuf, Vec<u8>>);

impl Outputs {
    fn add(&mut self, rel: impl Into<PathBuf>, body: impl Into<Vec<u8>>) {
        self.0.insert(rel.into(), body.into());
    }

    fn json(&mut self, rel: impl Into<PathBuf>, v: &impl Serialize) -> Result<(), CliError> {
        let mut s = serde_json::to_string_pretty(v).map_err(runtime)?;
        s.push('\n');
        self.add(rel, s);
        Ok(())
    }

    fn write(self, dir: &Path) -> Result<(), CliError> {
        std::fs::create_dir_all(dir)
            .map_err(|e| runtime(format!("cannot create {}: {e}", dir.display())))?;
        for (rel, body) in self.0 {
            let p = dir.join(&rel);
            write_atomic(&p, &body).map_err(|e| runtime(format!("cannot write {}: {e}", p.display())))?;
        }
        Ok(())
    }
}

fn failures_json(r: &BacktestResult) -> Value {
    Value::Array(
        r.failures
            .iter()
            .map(|(m, f)| json!({ "month": m.to_string(), "tag": f.tag(), "message": f.to_string() }))
            .collect(),
    )
}

fn result_json(r: &BacktestResult, report: &Result<PerformanceReport, String>) -> Value {
    json!({
        "combination": r.combination.slug(),
        "risk_model": r.combination.risk_model.map(|m| m.as_str()),
        "strategy": r.combination.strategy.as_str(),
        "scheduled_months": r.schedule.len(),
        "first_month": r.schedule.first().map(|m| m.to_string()),
        "last_month": r.schedule.last().map(|m| m.to_string()),
        "report": report.as_ref().ok(),
        "report_error": report.as_ref().err(),
        "failures": failures_json(r),
    })
}

fn report_for(r: &BacktestResult, panel: &ReturnsPanel) -> Result<PerformanceReport, String> {
    build_report(r, &aligned_market(r, panel), POSITION_THRESHOLD).map_err(|e| e.to_string())
}

fn report_text(r: &BacktestResult, report: &Result<PerformanceReport, String>) -> String {
    let mut s = String::new();
    let label = match r.combination.risk_model {
        Some(m) => format!("{} / {}", m.label(), r.combination.strategy.label()),
        None => r.combination.strategy.label().to_string(),
    };
    let _ = writeln!(s, "{label}");
    if let (Some(a), Some(b)) = (r.schedule.first(), r.schedule.last()) {
        let _ = writeln!(s, "OOS months {a} to {b}: {} evaluated, {} failed", r.oos_returns.len(), r.failures.len());
    }
    match report {
        Ok(rep) => {
            let ex = Exhibit {
                risk_model: r.combination.risk_model.unwrap_or(RiskModelKind::SingleFactor),
                columns: vec![(r.combination.strategy, Some(rep.clone()))],
            };
            let cells = ex.cells();
            let w = EXHIBIT_ROWS.iter().map(|l| l.len()).max().unwrap_or(0);
            for (label, row) in EXHIBIT_ROWS.iter().zip(cells) {
                let _ = writeln!(s, "{label:w$}  {}", row[0]);
            }
        }
        Err(e) => {
            let _ = writeln!(s, "no report: {e}");
        }
    }
    if !r.failures.is_empty() {
        let _ = writeln!(s, "\nFailures");
        for (m, f) in &r.failures {
            let _ = writeln!(s, "{m}  {}  {f}", f.tag());
        }
    }
    s
}

pub fn cmd_backtest(args: &RunArgs) -> Result<(), CliError> {
    let r = resolve_run(args.resolve("backtest")?, true)?;
    let panel = load(&r, true)?;
    let result = with_threads(args.threads, || run_backtest_parallel(&panel, &r.backtest))?;
    let report = report_for(&result, &panel);
    let mut out = Outputs::default();
    out.json("report.json", &result_json(&result, &report))?;
    out.add("report.txt", report_text(&result, &report));
    out.add("oos_returns.csv", io::oos_returns_csv(&result));
    out.add("holdings.csv", io::holdings_csv(&result, panel.asset_ids()));
    out.add("cumulative.csv", io::cumulative_csv(&result));
    out.json("manifest.json", &r.file)?;
    out.write(&r.out)
}

fn exhibit_json(ex: &Exhibit) -> Value {
    json!({
        "risk_model": ex.risk_model.as_str(),
        "title": ex.title(),
        "rows": EXHIBIT_ROWS,
        "columns": ex.columns.iter().map(|(s, rep)| json!({
            "strategy": s.as_str(),
            "label": s.label(),
            "report": rep,
        })).collect::<Vec<_>>(),
    })
}

pub fn cmd_matrix(args: &RunArgs) -> Result<(), CliError> {
    let r = resolve_run(args.resolve("matrix")?, false)?;
    let panel = load(&r, true)?;
    let results = with_threads(args.threads, || run_matrix_parallel(&panel, &r.backtest))?;
    let exhibits = build_exhibits(&results, &panel, POSITION_THRESHOLD);
    let mut out = Outputs::default();
    for ex in &exhibits {
        out.add(format!("exhibit_{}.txt", ex.risk_model.as_str()), ex.to_text());
    }
    out.json("exhibits.json", &exhibits.iter().map(exhibit_json).collect::<Vec<_>>())?;
    let mut summary = Vec::new();
    for (c, res) in &results {
        let slug = c.slug();
        out.add(Path::new("cumulative").join(format!("{slug}.csv")), io::cumulative_csv(res));
        out.add(Path::new("oos_returns").join(format!("{slug}.csv")), io::oos_returns_csv(res));
        summary.push(result_json(res, &report_for(res, &panel)));
    }
    out.json("report.json", &summary)?;
    out.json("manifest.json", &r.file)?;
    out.write(&r.out)
}

pub fn cmd_estimate(args: &RunArgs) -> Result<(), CliError> {
    let r = resolve_run(args.resolve("estimate")?, false)?;
    let file = &r.file;
    let kind = file.risk_model.ok_or_else(|| config_err("--risk-model is required"))?;
    let panel = load(&r, false)?;
    let last = match file.end_month {
        Some(m) => panel
            .index_of(m)
            .ok_or_else(|| config_err(format!("--end-month {m} is outside the panel")))?,
        None => panel.n_months() - 1,
    };
    let window = panel.window_ending(last, r.backtest.window).map_err(runtime)?;
    let active = active_universe(&window).map_err(runtime)?;
    let sub = window.restrict(&active);
    let ids: Vec<String> = sub.assets.iter().map(|&j| panel.asset_ids()[j].clone()).collect();
    let model = estimate(kind, &sub, r.backtest.shrinkage).map_err(runtime)?;

    let mut est = json!({
        "risk_model": kind.as_str(),
        "end_month": sub.end_date.to_string(),
        "window": sub.len(),
        "asset_ids": ids,
        "vols": model.vols(),
        "intensity": model.intensity(),
        "npd": model.is_npd(),
    });
    match kind {
        RiskModelKind::SingleFactor => {
            let f = estimate_loadings(&sub).map_err(runtime)?;
            let floored: Vec<f64> = f.omega2_hat.iter().map(|o| o.max(VARIANCE_FLOOR)).collect();
            est["beta_hat"] = json!(f.beta_hat);
            est["beta"] = json!(shrink_betas(&f.beta_hat));
            est["omega2_hat"] = json!(f.omega2_hat);
            est["omega2"] = json!(shrink_log_variances(&floored).map_err(runtime)?);
            est["sigma2_f"] = json!(f.sigma2_f);
        }
        RiskModelKind::ConstantCorrelation => {
            let c = constant_correlation_estimates(&sub).map_err(runtime)?;
            let n = c.correlations.rows();
            let rows: Vec<Vec<f64>> = (0..n).map(|i| c.correlations.row(i).to_vec()).collect();
            est["rho"] = json!(c.rho);
            est["sigma"] = json!(c.sigma);
            est["correlations"] = json!(rows);
        }
        RiskModelKind::SampleShrunk => {}
    }

    let mut out = Outputs::default();
    out.add("covariance.csv", io::matrix_csv(&ids, model.matrix()));
    if let Some(s) = file.strategy {
        let mut cfg = r.backtest.strategy_config.clone();
        cfg.solver.trace = args.trace;
        let run = construct_run(s, Some(&model), &sub.caps, &cfg).map_err(runtime)?;
        let mut h = String::from("date,asset_id,weight\n");
        for (id, w) in ids.iter().zip(&run.holdings.weights) {
            let _ = writeln!(h, "{},{id},{w:.8}", sub.end_date);
        }
        out.add("holdings.csv", h);
        if let Some(sol) = &run.solution {
            est["solver"] = json!({
                "status": sol.status,
                "iterations": sol.iterations,
                "kkt_residual": sol.kkt_residual,
                "objective": sol.objective,
            });
            if args.trace {
                out.add("trace.csv", io::trace_csv(&sol.trace));
            }
        }
    } else if args.trace {
        return Err(config_err("--trace needs --strategy"));
    }
    out.json("estimates.json", &est)?;
    out.json("manifest.json", file)?;
    out.write(&r.out)
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<(), CliError> {
    let f = match &args.config {
        Some(p) => read_config(p)?,
        None => FileConfig::default(),
    };
    if let Some(c) = &f.command {
        if c != "generate" {
            return Err(config_err(format!("config was written for `{c}`, not `generate`")));
        }
    }
    let out = pick(args.out.clone(), f.out).ok_or_else(|| config_err("--out is required"))?;
    let mut spec = f.synth.unwrap_or_default();
    if let Some(v) = pick(args.seed, f.seed) {
        spec.seed = v;
    }
    if let Some(v) = pick(args.n_assets, f.n_assets) {
        spec.n_assets = v;
    }
    if let Some(v) = pick(args.n_months, f.n_months) {
        spec.n_months = v;
    }
    let (panel, truth) = generate(&spec).map_err(|e| config_err(e.to_string()))?;
    let manifest = FileConfig {
        command: Some("generate".into()),
        version: Some(env!("CARGO_PKG_VERSION").to_string()),
        out: Some(out.clone()),
        seed: Some(spec.seed),
        n_assets: Some(spec.n_assets),
        n_months: Some(spec.n_months),
        synth: Some(spec),
        ..Default::default()
    };
    let mut o = Outputs::default();
    o.add("returns.csv", io::returns_csv(&panel));
    o.add("market.csv", io::market_csv(&panel));
    o.add("caps.csv", io::caps_csv(&panel));
    o.json("ground_truth.json", &truth)?;
    o.json("manifest.json", &manifest)?;
    o.write(&out)
}

pub fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Backtest(a) => cmd_backtest(a),
        Command::Matrix(a) => cmd_matrix(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Generate(a) => cmd_generate(a),
    }
}

/// Parses `args`, runs the subcommand and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("divport: {e}");
            e.exit_code()
        }
    }
}

