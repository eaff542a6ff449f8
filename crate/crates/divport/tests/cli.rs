#![allow(clippy::needless_range_loop)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use divport::io::{load_panel, read_matrix_csv, write_panel, LoadOptions};
use divport_core::riskmodels::estimate;
use divport_core::{RiskModelKind, Shrinkage};
use serde_json::Value;
use tempfile::TempDir;

fn divport(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_divport")).args(args).output().expect("spawn divport")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Generated panel in `dir/data`.
fn data(dir: &Path, seed: u64, assets: usize, months: usize) -> PathBuf {
    let d = dir.join("data");
    let out = divport(&[
        "generate",
        "--out",
        s(&d),
        "--seed",
        &seed.to_string(),
        "--n-assets",
        &assets.to_string(),
        "--n-months",
        &months.to_string(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    d
}

fn inputs(d: &Path) -> Vec<String> {
    vec![
        "--returns".into(),
        s(&d.join("returns.csv")).into(),
        "--market".into(),
        s(&d.join("market.csv")).into(),
        "--caps".into(),
        s(&d.join("caps.csv")).into(),
    ]
}

fn run(cmd: &str, d: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args: Vec<String> = vec![cmd.into(), "--out".into(), s(out).into()];
    args.extend(inputs(d));
    args.extend(extra.iter().map(|a| a.to_string()));
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    divport(&refs)
}

fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(p) = stack.pop() {
        for e in std::fs::read_dir(&p).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                files.insert(path.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&path).unwrap());
            }
        }
    }
    files
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn backtest_smoke() {
    let tmp = TempDir::new().unwrap();
    let d = data(tmp.path(), 1, 6, 80);
    let out = tmp.path().join("bt");
    let o = run("backtest", &d, &out, &["--risk-model", "single_factor", "--strategy", "min_variance"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["report.json", "report.txt", "oos_returns.csv", "holdings.csv", "cumulative.csv", "manifest.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let rep = json(&out.join("report.json"));
    assert_eq!(rep["scheduled_months"], 19);
    assert!(rep["report"]["sharpe"].is_number());
    let oos = std::fs::read_to_string(out.join("oos_returns.csv")).unwrap();
    assert!(oos.starts_with("date,excess_return\n"));
    assert_eq!(oos.lines().count(), 20);
    let cum = std::fs::read_to_string(out.join("cumulative.csv")).unwrap();
    assert!(cum.starts_with("date,cumulative_return\n"));
    let h = std::fs::read_to_string(out.join("holdings.csv")).unwrap();
    assert!(h.starts_with("date,asset_id,weight\n"));
}

#[test]
fn missing_returns_file_is_config_error() {
    let tmp = TempDir::new().unwrap();
    let d = data(tmp.path(), 1, 3, 70);
    let missing = tmp.path().join("nope.csv");
    let o = divport(&[
        "backtest",
        "--out",
        s(&tmp.path().join("x")),
        "--returns",
        s(&missing),
        "--market",
        s(&d.join("market.csv")),
        "--risk-model",
        "single_factor",
        "--strategy",
        "min_variance",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains(s(&missing)));
    assert!(!tmp.path().join("x").exists());
}

#[test]
fn npd_months_are_reported_not_fatal() {
    let tmp = TempDir::new().unwrap();
    let d = data(tmp.path(), 2, 20, 70);
    let out = tmp.path().join("npd");
    let o = run(
        "backtest",
        &d,
        &out,
        &[
            "--risk-model",
            "sample_shrunk",
            "--strategy",
            "risk_parity",
            "--window",
            "12",
            "--shrink-delta",
            "0",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rep = json(&out.join("report.json"));
    let f = rep["failures"].as_array().unwrap();
    assert!(!f.is_empty());
    assert_eq!(f[0]["tag"], "not_positive_definite");
}

#[test]
fn matrix_outputs_and_determinism() {
    let tmp = TempDir::new().unwrap();
    let d = data(tmp.path(), 3, 8, 75);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_eq!(run("matrix", &d, &a, &[]).status.code(), Some(0));
    assert_eq!(run("matrix", &d, &b, &["--threads", "3"]).status.code(), Some(0));
    for m in ["single_factor", "constant_correlation", "sample_shrunk"] {
        assert!(a.join(format!("exhibit_{m}.txt")).is_file());
    }
    assert_eq!(std::fs::read_dir(a.join("cumulative")).unwrap().count(), 11);
    let (sa, mut sb) = (snapshot(&a), snapshot(&b));
    // the manifests differ only in the output directory
    sb.remove(Path::new("manifest.json"));
    let mut sa2 = sa.clone();
    sa2.remove(Path::new("manifest.json"));
    assert_eq!(sa2, sb);

    let o = divport(&["matrix", "--config", s(&a.join("manifest.json"))]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(snapshot(&a), sa);
}

#[test]
fn end_clamp_before_first_month_is_runtime_error() {
    let tmp = TempDir::new().unwrap();
    let d = data(tmp.path(), 4, 4, 70);
    let o = run("matrix", &d, &tmp.path().join("m"), &["--end", "1970-06"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("at least 62"));
}

#[test]
fn invalid_config_values_exit_two() {
    let tmp = TempDir::new().unwrap();
    let d = data(tmp.path(), 4, 4, 70);
    for extra in [&["--window", "6"][..], &["--skip", "2"], &["--shrink-delta", "1.5"], &["--risk-model", "bogus"]] {
        let o = run("matrix", &d, &tmp.path().join("m"), extra);
        assert_eq!(o.status.code(), Some(2), "{extra:?}");
    }
}

#[test]
fn estimate_outputs_match_library() {
    let tmp = TempDir::new().unwrap();
    let d = data(tmp.path(), 5, 3, 62);
    let panel = load_panel(
        &d.join("returns.csv"),
        &d.join("market.csv"),
        Some(&d.join("caps.csv")),
        LoadOptions::default(),
    )
    .unwrap();
    let window = panel.window_ending(61, 60).unwrap();
    for kind in RiskModelKind::ALL {
        let out = tmp.path().join(kind.as_str());
        let o = run("estimate", &d, &out, &["--risk-model", kind.as_str()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let (ids, v) = read_matrix_csv(&out.join("covariance.csv")).unwrap();
        assert_eq!(ids.len(), 3);
        assert!(v.is_symmetric(0.0));
        let lib = estimate(kind, &window, Shrinkage::LedoitWolf).unwrap();
        assert_eq!(&v, lib.matrix());
        let est = json(&out.join("estimates.json"));
        if kind == RiskModelKind::ConstantCorrelation {
            let c = est["correlations"].as_array().unwrap();
            let mut total = 0.0;
            for i in 0..3 {
                for j in (i + 1)..3 {
                    total += c[i][j].as_f64().unwrap();
                }
            }
            assert!((est["rho"].as_f64().unwrap() - total / 3.0).abs() < 1e-15);
        }
    }
}

#[test]
fn estimate_with_strategy_and_trace() {
    let tmp = TempDir::new().unwrap();
    let d = data(tmp.path(), 6, 5, 62);
    let out = tmp.path().join("e");
    let o = run(
        "estimate",
        &d,
        &out,
        &["--risk-model", "single_factor", "--strategy", "risk_parity", "--trace"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("holdings.csv").is_file());
    assert!(out.join("trace.csv").is_file());
    assert_eq!(json(&out.join("estimates.json"))["solver"]["status"], "optimal");
}

#[test]
fn panel_round_trips_bit_exactly() {
    let tmp = TempDir::new().unwrap();
    let (panel, _) = divport_core::generate(&divport_core::SynthSpec {
        n_assets: 7,
        n_months: 64,
        seed: 8,
        ..Default::default()
    })
    .unwrap();
    write_panel(tmp.path(), &panel).unwrap();
    let back = load_panel(
        &tmp.path().join("returns.csv"),
        &tmp.path().join("market.csv"),
        Some(&tmp.path().join("caps.csv")),
        LoadOptions::default(),
    )
    .unwrap();
    assert_eq!(back, panel);
}
