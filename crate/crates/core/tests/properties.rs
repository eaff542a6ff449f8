mod common;

use common::*;
use divport_core::analytics::{annualize, market_beta};
use divport_core::linalg::Matrix;
use divport_core::riskmodels::{
    constant_correlation_target, estimate, sample_cov_shrunk, sample_covariance, shrink_betas,
    shrink_log_variances, single_factor_from_parts,
};
use divport_core::strategies::{construct, diversification_ratio, portfolio_variance};
use divport_core::{
    active_universe, CovarianceModel, EstimationWindow, Month, ReturnsPanel, RiskModelKind, Shrinkage,
    StrategyConfig, StrategyKind,
};
use proptest::prelude::*;

fn permuted(w: &EstimationWindow, p: &[usize]) -> EstimationWindow {
    EstimationWindow::from_parts(w.returns.select_columns(p), w.market.clone(), w.end_date)
}

fn holdings_ok(x: &[f64]) -> bool {
    let s: f64 = x.iter().sum();
    (s - 1.0).abs() <= 1e-8 && x.iter().all(|v| *v >= 0.0)
}

proptest! {
    #[test]
    fn beta_shrink_is_affine_contraction(b in prop::collection::vec(-3.0f64..4.0, 2..20)) {
        let s = shrink_betas(&b);
        for i in 0..b.len() {
            for j in 0..b.len() {
                if b[i] < b[j] {
                    prop_assert!(s[i] < s[j]);
                }
            }
            prop_assert!(((s[i] - 1.0) - (2.0 / 3.0) * (b[i] - 1.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn log_vol_shrink_keeps_mean_and_contracts(v in prop::collection::vec(1e-8f64..1.0, 2..20)) {
        let s = shrink_log_variances(&v).unwrap();
        let la: Vec<f64> = v.iter().map(|x| x.sqrt().ln()).collect();
        let lb: Vec<f64> = s.iter().map(|x| x.sqrt().ln()).collect();
        prop_assert!((mean(&la) - mean(&lb)).abs() < 1e-12);
        let span = |l: &[f64]| {
            l.iter().cloned().fold(f64::MIN, f64::max) - l.iter().cloned().fold(f64::MAX, f64::min)
        };
        prop_assert!((span(&lb) - 2.0 / 3.0 * span(&la)).abs() < 1e-12);
    }

    #[test]
    fn single_factor_is_rank_one_plus_diagonal(
        b in prop::collection::vec(0.0f64..2.0, 3..8),
        s2 in 1e-4f64..0.01,
        seed in any::<u64>(),
    ) {
        let mut g = rng(seed);
        let d: Vec<f64> = (0..b.len()).map(|_| uniform(&mut g, 1e-4, 0.02)).collect();
        let m = single_factor_from_parts(&b, s2, &d);
        let n = b.len();
        // every 2x2 minor of V - D vanishes
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let r = |a: usize, c: usize| m.matrix()[(a, c)] - if a == c { d[a] } else { 0.0 };
                    prop_assert!((r(i, i) * r(j, j) - r(i, j) * r(j, i)).abs() < 1e-15);
                }
            }
        }
        prop_assert!(divport_core::riskmodels::is_positive_definite(m.matrix()));
    }

    #[test]
    fn constant_correlation_recovers_rho(seed in any::<u64>(), n in 2usize..10) {
        let mut g = rng(seed);
        let w = random_window(&mut g, 60, n);
        let v = estimate(RiskModelKind::ConstantCorrelation, &w, Shrinkage::LedoitWolf).unwrap();
        let (rho, _, _) = oracle_constant_correlation(&w);
        let m = v.matrix();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    prop_assert!((m[(i, j)] / (m[(i, i)] * m[(j, j)]).sqrt() - rho).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn shrunk_entries_between_sample_and_target(seed in any::<u64>(), delta in 0.0f64..=1.0) {
        let mut g = rng(seed);
        let w = random_window(&mut g, 36, 6);
        let s = sample_covariance(&w.returns);
        let f = constant_correlation_target(&s);
        let v = sample_cov_shrunk(&w, Shrinkage::Fixed(delta)).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let (lo, hi) = (s[(i, j)].min(f[(i, j)]), s[(i, j)].max(f[(i, j)]));
                let slack = 1e-15 * hi.abs().max(lo.abs());
                prop_assert!(v.matrix()[(i, j)] >= lo - slack && v.matrix()[(i, j)] <= hi + slack);
            }
        }
    }

    #[test]
    fn estimators_are_permutation_equivariant(seed in any::<u64>()) {
        let mut g = rng(seed);
        let n = 5;
        let w = random_window(&mut g, 60, n);
        let p = vec![3, 0, 4, 1, 2];
        let wp = permuted(&w, &p);
        for kind in RiskModelKind::ALL {
            let a = estimate(kind, &w, Shrinkage::LedoitWolf).unwrap();
            let b = estimate(kind, &wp, Shrinkage::LedoitWolf).unwrap();
            for i in 0..n {
                for j in 0..n {
                    let x = a.matrix()[(p[i], p[j])];
                    prop_assert!((b.matrix()[(i, j)] - x).abs() <= 1e-12 * x.abs().max(1e-4));
                }
            }
        }
    }

    #[test]
    fn estimates_are_psd(seed in any::<u64>(), n in 2usize..12) {
        let mut g = rng(seed);
        let w = random_window(&mut g, 60, n);
        for kind in [RiskModelKind::SingleFactor, RiskModelKind::ConstantCorrelation] {
            let v = estimate(kind, &w, Shrinkage::LedoitWolf).unwrap();
            prop_assert!(divport_core::riskmodels::validate_psd(v.matrix(), 1e-10));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn strategy_orderings(seed in any::<u64>(), n in 2usize..8) {
        let mut g = rng(seed);
        let v = CovarianceModel::from_matrix(slack_rp_instance(&mut g, n, 5.0), RiskModelKind::SampleShrunk);
        let cfg = StrategyConfig::default();
        let caps: Vec<f64> = (0..n).map(|_| uniform(&mut g, 1.0, 10.0)).collect();
        let all: Vec<_> = StrategyKind::ALL
            .iter()
            .map(|k| (*k, construct(*k, Some(&v), &caps, &cfg).unwrap()))
            .collect();
        let get = |k: StrategyKind| &all.iter().find(|(a, _)| *a == k).unwrap().1.weights;
        for (_, h) in &all {
            prop_assert!(holdings_ok(&h.weights));
        }
        let mv = portfolio_variance(v.matrix(), get(StrategyKind::MinVariance));
        let md = diversification_ratio(&v, get(StrategyKind::MaxDiversification));
        for (_, h) in &all {
            prop_assert!(mv <= portfolio_variance(v.matrix(), &h.weights) * (1.0 + 1e-8));
            prop_assert!(md >= diversification_ratio(&v, &h.weights) * (1.0 - 1e-8));
        }
    }

    #[test]
    fn strategy_scale_invariance(seed in any::<u64>(), s in 0.1f64..10.0) {
        let mut g = rng(seed);
        let v = CovarianceModel::from_matrix(slack_rp_instance(&mut g, 5, 5.0 / 10f64.sqrt()), RiskModelKind::SampleShrunk);
        let cfg = StrategyConfig::default();
        for k in StrategyKind::OPTIMIZED {
            let a = construct(k, Some(&v), &[], &cfg).unwrap();
            let b = construct(k, Some(&v.scaled(s)), &[], &cfg).unwrap();
            for i in 0..5 {
                prop_assert!((a.weights[i] - b.weights[i]).abs() <= 1e-6, "{k} {i}");
            }
        }
    }
}

proptest! {
    #[test]
    fn annualize_shift_consistent(
        r in prop::collection::vec(-0.2f64..0.2, 2..200),
        c in -0.05f64..0.05,
    ) {
        let a = annualize(&r).unwrap();
        let shifted: Vec<f64> = r.iter().map(|x| x + c).collect();
        let b = annualize(&shifted).unwrap();
        prop_assert!((b.avg_excess_return - a.avg_excess_return - 12.0 * c).abs() < 1e-12);
    }

    #[test]
    fn market_beta_of_market_is_one(m in prop::collection::vec(-0.3f64..0.3, 3..200)) {
        prop_assume!(m.iter().any(|v| *v != m[0]));
        prop_assert_eq!(market_beta(&m, &m).unwrap(), 1.0);
    }

    #[test]
    fn report_ignores_order(r in prop::collection::vec(-0.2f64..0.2, 3..100), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut p = r.clone();
        p.shuffle(&mut rng(seed));
        let a = annualize(&r).unwrap();
        let b = annualize(&p).unwrap();
        prop_assert!((a.avg_excess_return - b.avg_excess_return).abs() < 1e-12);
        prop_assert!((a.stdev - b.stdev).abs() < 1e-12);
        prop_assert!((a.compound_return.unwrap() - b.compound_return.unwrap()).abs() < 1e-12);
    }

    #[test]
    fn effective_n_below_positions(w in prop::collection::vec(0.0f64..1.0, 1..50)) {
        prop_assume!(w.iter().sum::<f64>() > 0.0);
        let s: f64 = w.iter().sum();
        let x: Vec<f64> = w.iter().map(|v| v / s).collect();
        let h = divport_core::strategies::equal_weighted(1).unwrap();
        let h = divport_core::Holdings { weights: x.clone(), ..h };
        let count = x.iter().filter(|v| **v > 0.0).count() as f64;
        prop_assert!(h.effective_n() <= count * (1.0 + 1e-12));
        prop_assert!(h.effective_n() >= 1.0 - 1e-12);
    }

    #[test]
    fn window_never_looks_ahead(t_len in 20usize..80, w in 2usize..15, skip in 0usize..2, seed in any::<u64>()) {
        prop_assume!(w + skip < t_len);
        let panel = tiny_panel(t_len, 3, seed);
        let mut g = rng(seed ^ 1);
        let t = (w + skip) + (g.random::<u64>() as usize) % (t_len - w - skip);
        let win = panel.window_at(t, w, skip).unwrap();
        prop_assert_eq!(win.len(), w);
        prop_assert_eq!(win.end_date, panel.dates()[t - skip - 1]);
        for i in 0..w {
            prop_assert_eq!(win.market[i], panel.market()[t - skip - w + i]);
        }
    }

    #[test]
    fn universe_is_monotone(mask in prop::collection::vec(any::<bool>(), 2..10)) {
        let n = mask.len();
        let rows = 6;
        let data: Vec<f64> = (0..rows * n)
            .map(|k| if !mask[k % n] && k / n == 2 { f64::NAN } else { 0.01 })
            .collect();
        let base = EstimationWindow::from_parts(Matrix::from_vec(rows, n, data.clone()), vec![0.0; rows], Month::new(2000, 1).unwrap());
        let mut wider = data.clone();
        let mut grown = Vec::new();
        for r in 0..rows {
            grown.extend_from_slice(&wider[r * n..(r + 1) * n]);
            grown.push(0.02);
        }
        wider = grown;
        let ext = EstimationWindow::from_parts(Matrix::from_vec(rows, n + 1, wider), vec![0.0; rows], Month::new(2000, 1).unwrap());
        let a = active_universe(&base).unwrap_or_default();
        let b = active_universe(&ext).unwrap();
        for i in a {
            prop_assert!(b.contains(&i));
        }
    }
}

use rand::Rng;

fn tiny_panel(t_len: usize, n: usize, seed: u64) -> ReturnsPanel {
    let mut g = rng(seed);
    let dates: Vec<Month> = (0..t_len).map(|k| Month::new(2000, 1).unwrap().plus(k as i64)).collect();
    let data: Vec<f64> = (0..t_len * n).map(|_| 0.05 * normal(&mut g)).collect();
    let market: Vec<f64> = (0..t_len).map(|_| 0.04 * normal(&mut g)).collect();
    ReturnsPanel::new(
        dates,
        (0..n).map(|k| format!("A{k}")).collect(),
        Matrix::from_vec(t_len, n, data),
        market,
        None,
    )
    .unwrap()
}
