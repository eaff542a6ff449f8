//! CSV ingestion and output writers.
//!
//! Floats that must round-trip are written with 17 significant digits.
//! Every writer goes through [`write_atomic`]: a temporary file in the
//! target directory, then a rename.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use divport_core::backtest::BacktestResult;
use divport_core::linalg::Matrix;
use divport_core::panel::{PanelError, ReturnsPanel, MISSING};
use divport_core::solver::TraceRow;
use divport_core::Month;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: line {line}: {reason}")]
    MalformedFile {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("dates in {a} and {b} do not match (first difference at row {row})")]
    MisalignedDates { a: PathBuf, b: PathBuf, row: usize },
    #[error("{path}: line {line}, column `{column}`: value `{value}` is not a finite number")]
    NonFiniteValue {
        path: PathBuf,
        line: usize,
        column: String,
        value: String,
    },
    #[error("panel has {have} months but at least {need} are required")]
    ShortPanel { have: usize, need: usize },
    #[error("invalid panel: {0}")]
    Panel(PanelError),
}

impl IoError {
    /// True when the error means an input file could not be opened.
    pub fn is_missing_file(&self) -> bool {
        matches!(self, IoError::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoadOptions {
    /// Read empty cells in the returns file as missing instead of rejecting them.
    pub allow_missing: bool,
    /// Window and skip used for the length check; `None` skips it.
    pub window: Option<usize>,
    pub skip: usize,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            allow_missing: false,
            window: Some(divport_core::panel::DEFAULT_WINDOW),
            skip: divport_core::panel::DEFAULT_SKIP,
        }
    }
}

struct Table {
    path: PathBuf,
    columns: Vec<String>,
    dates: Vec<Month>,
    /// Row-major values.
    values: Vec<f64>,
}

fn read_table(path: &Path, allow_empty: bool) -> Result<Table, IoError> {
    let text = fs::read_to_string(path).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let malformed = |line: usize, reason: String| IoError::MalformedFile {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = rdr
        .headers()
        .map_err(|e| malformed(1, e.to_string()))?
        .clone();
    if header.len() < 2 || header.get(0) != Some("date") {
        return Err(malformed(1, "header must start with `date` followed by at least one column".into()));
    }
    let columns: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut dates = Vec::new();
    let mut values = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| malformed(line, e.to_string()))?;
        if rec.len() != header.len() {
            return Err(malformed(
                line,
                format!("expected {} fields, found {}", header.len(), rec.len()),
            ));
        }
        let date: Month = rec[0]
            .parse()
            .map_err(|_| malformed(line, format!("bad date `{}`, expected YYYY-MM", &rec[0])))?;
        dates.push(date);
        for (j, cell) in rec.iter().skip(1).enumerate() {
            let non_finite = || IoError::NonFiniteValue {
                path: path.to_path_buf(),
                line,
                column: columns[j].clone(),
                value: cell.to_string(),
            };
            if cell.is_empty() {
                if allow_empty {
                    values.push(MISSING);
                    continue;
                }
                return Err(non_finite());
            }
            let v: f64 = cell.parse().map_err(|_| non_finite())?;
            if !v.is_finite() {
                return Err(non_finite());
            }
            values.push(v);
        }
    }
    if dates.is_empty() {
        return Err(malformed(2, "no data rows".into()));
    }
    Ok(Table {
        path: path.to_path_buf(),
        columns,
        dates,
        values,
    })
}

fn check_aligned(a: &Table, b: &Table) -> Result<(), IoError> {
    if a.dates == b.dates {
        return Ok(());
    }
    let row = a
        .dates
        .iter()
        .zip(&b.dates)
        .position(|(x, y)| x != y)
        .unwrap_or(a.dates.len().min(b.dates.len()));
    Err(IoError::MisalignedDates {
        a: a.path.clone(),
        b: b.path.clone(),
        row,
    })
}

/// Loads and validates a returns/market/caps trio.
pub fn load_panel(
    returns_path: &Path,
    market_path: &Path,
    caps_path: Option<&Path>,
    opts: LoadOptions,
) -> Result<ReturnsPanel, IoError> {
    let returns = read_table(returns_path, opts.allow_missing)?;
    let market = read_table(market_path, false)?;
    if market.columns.len() != 1 {
        return Err(IoError::MalformedFile {
            path: market.path,
            line: 1,
            reason: "market file must have header `date,market`".into(),
        });
    }
    check_aligned(&returns, &market)?;
    let caps = match caps_path {
        Some(p) => {
            let c = read_table(p, opts.allow_missing)?;
            check_aligned(&returns, &c)?;
            if c.columns != returns.columns {
                return Err(IoError::MalformedFile {
                    path: c.path,
                    line: 1,
                    reason: "caps header must list the same assets as the returns file".into(),
                });
            }
            Some(Matrix::from_vec(c.dates.len(), c.columns.len(), c.values))
        }
        None => None,
    };
    let t = returns.dates.len();
    let n = returns.columns.len();
    let panel = ReturnsPanel::new(
        returns.dates,
        returns.columns,
        Matrix::from_vec(t, n, returns.values),
        market.values,
        caps,
    )
    .map_err(IoError::Panel)?;
    if let Some(w) = opts.window {
        panel.ensure_length(w, opts.skip).map_err(|e| match e {
            PanelError::ShortPanel { have, need } => IoError::ShortPanel { have, need },
            other => IoError::Panel(other),
        })?;
    }
    Ok(panel)
}

/// 17 significant digits, round-trips every finite f64.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:.16e}")
    }
}

/// Writes `bytes` to `path` via a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

fn table_csv(first: &str, columns: &[String], dates: &[Month], cell: impl Fn(usize, usize) -> f64) -> String {
    let mut s = String::from(first);
    for c in columns {
        s.push(',');
        s.push_str(c);
    }
    s.push('\n');
    for (i, d) in dates.iter().enumerate() {
        let _ = write!(s, "{d}");
        for j in 0..columns.len() {
            s.push(',');
            s.push_str(&fmt_f64(cell(i, j)));
        }
        s.push('\n');
    }
    s
}

pub fn returns_csv(panel: &ReturnsPanel) -> String {
    table_csv("date", panel.asset_ids(), panel.dates(), |i, j| panel.returns()[(i, j)])
}

pub fn market_csv(panel: &ReturnsPanel) -> String {
    table_csv("date", &["market".to_string()], panel.dates(), |i, _| panel.market()[i])
}

pub fn caps_csv(panel: &ReturnsPanel) -> String {
    table_csv("date", panel.asset_ids(), panel.dates(), |i, j| panel.caps()[(i, j)])
}

/// Writes `returns.csv`, `market.csv` and `caps.csv` into `dir`.
pub fn write_panel(dir: &Path, panel: &ReturnsPanel) -> std::io::Result<()> {
    write_atomic(&dir.join("returns.csv"), returns_csv(panel).as_bytes())?;
    write_atomic(&dir.join("market.csv"), market_csv(panel).as_bytes())?;
    write_atomic(&dir.join("caps.csv"), caps_csv(panel).as_bytes())
}

/// `date,excess_return`
pub fn oos_returns_csv(result: &BacktestResult) -> String {
    let mut s = String::from("date,excess_return\n");
    for (m, r) in result.months.iter().zip(&result.oos_returns) {
        let _ = writeln!(s, "{m},{}", fmt_f64(*r));
    }
    s
}

/// Running `Π(1 + r) − 1` over the recorded months.
pub fn cumulative_returns(oos: &[f64]) -> Vec<f64> {
    let mut g = 1.0;
    oos.iter()
        .map(|r| {
            g *= 1.0 + r;
            g - 1.0
        })
        .collect()
}

/// `date,cumulative_return`
pub fn cumulative_csv(result: &BacktestResult) -> String {
    let mut s = String::from("date,cumulative_return\n");
    for (m, c) in result.months.iter().zip(cumulative_returns(&result.oos_returns)) {
        let _ = writeln!(s, "{m},{}", fmt_f64(c));
    }
    s
}

/// `date,asset_id,weight`, 8 decimals, zero weights omitted.
pub fn holdings_csv(result: &BacktestResult, asset_ids: &[String]) -> String {
    let mut s = String::from("date,asset_id,weight\n");
    for (m, h) in result.months.iter().zip(&result.holdings_history) {
        for (id, w) in asset_ids.iter().zip(&h.weights) {
            if *w != 0.0 {
                let _ = writeln!(s, "{m},{id},{w:.8}");
            }
        }
    }
    s
}

/// Square matrix with asset ids on both axes.
pub fn matrix_csv(ids: &[String], m: &Matrix) -> String {
    let mut s = String::from("asset_id");
    for id in ids {
        s.push(',');
        s.push_str(id);
    }
    s.push('\n');
    for (i, id) in ids.iter().enumerate() {
        s.push_str(id);
        for j in 0..m.cols() {
            s.push(',');
            s.push_str(&fmt_f64(m[(i, j)]));
        }
        s.push('\n');
    }
    s
}

/// Reads a file written by [`matrix_csv`].
pub fn read_matrix_csv(path: &Path) -> Result<(Vec<String>, Matrix), IoError> {
    let text = fs::read_to_string(path).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let malformed = |line: usize, reason: String| IoError::MalformedFile {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let ids: Vec<String> = rdr
        .headers()
        .map_err(|e| malformed(1, e.to_string()))?
        .iter()
        .skip(1)
        .map(str::to_string)
        .collect();
    let mut data = Vec::with_capacity(ids.len() * ids.len());
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| malformed(k + 2, e.to_string()))?;
        for cell in rec.iter().skip(1) {
            data.push(cell.parse::<f64>().map_err(|e| malformed(k + 2, e.to_string()))?);
        }
    }
    if data.len() != ids.len() * ids.len() {
        return Err(malformed(1, "matrix is not square".into()));
    }
    let n = ids.len();
    Ok((ids, Matrix::from_vec(n, n, data)))
}

/// `iteration,primal,dual,complementarity,objective`
pub fn trace_csv(trace: &[TraceRow]) -> String {
    let mut s = String::from("iteration,primal,dual,complementarity,objective\n");
    for r in trace {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.iteration,
            fmt_f64(r.primal),
            fmt_f64(r.dual),
            fmt_f64(r.complementarity),
            fmt_f64(r.objective)
        );
    }
    s
}
