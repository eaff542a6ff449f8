//! Independent reference implementations used by the integration tests.
//!
//! Everything here is written with plain scalar loops over `Vec<Vec<f64>>`
//! and shares no code with the library estimators.

#![allow(dead_code, clippy::needless_range_loop)]

use divport_core::linalg::Matrix;
use divport_core::panel::EstimationWindow;
use divport_core::Month;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type Dense = Vec<Vec<f64>>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

pub fn col(w: &EstimationWindow, j: usize) -> Vec<f64> {
    (0..w.len()).map(|t| w.returns[(t, j)]).collect()
}

pub fn mean(v: &[f64]) -> f64 {
    let mut s = 0.0;
    for x in v {
        s += x;
    }
    s / v.len() as f64
}

pub fn cov(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let mut s = 0.0;
    for t in 0..a.len() {
        s += (a[t] - ma) * (b[t] - mb);
    }
    s / (a.len() as f64 - 1.0)
}

/// Window of single-factor returns with random loadings and vols.
pub fn random_window(rng: &mut ChaCha8Rng, w: usize, n: usize) -> EstimationWindow {
    let sm = uniform(rng, 0.02, 0.06);
    let market: Vec<f64> = (0..w).map(|_| 0.005 + sm * normal(rng)).collect();
    let beta: Vec<f64> = (0..n).map(|_| uniform(rng, -0.2, 2.0)).collect();
    let om: Vec<f64> = (0..n).map(|_| uniform(rng, 0.01, 0.15)).collect();
    let mut data = Vec::with_capacity(w * n);
    for t in 0..w {
        for j in 0..n {
            data.push(beta[j] * market[t] + om[j] * normal(rng));
        }
    }
    EstimationWindow::from_parts(Matrix::from_vec(w, n, data), market, Month::new(2000, 1).unwrap())
}

/// Per-asset least-squares fit with intercept: (slope, intercept, residual variance), and Var(r_M).
pub fn oracle_loadings(w: &EstimationWindow) -> (Vec<f64>, Vec<f64>, Vec<f64>, f64) {
    let m = &w.market;
    let n_obs = m.len() as f64;
    let vm = cov(m, m);
    let mut beta = Vec::new();
    let mut alpha = Vec::new();
    let mut resid = Vec::new();
    for j in 0..w.n_assets() {
        let r = col(w, j);
        // normal equations for [alpha, beta]
        let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
        for t in 0..m.len() {
            sx += m[t];
            sy += r[t];
            sxx += m[t] * m[t];
            sxy += m[t] * r[t];
        }
        let b = cov(&r, m) / vm;
        let a = (sy - b * sx) / n_obs;
        let _ = (sxx, sxy);
        let mut ss = 0.0;
        for t in 0..m.len() {
            let e = r[t] - a - b * m[t];
            ss += e * e;
        }
        beta.push(b);
        alpha.push(a);
        resid.push(ss / (n_obs - 1.0));
    }
    (beta, alpha, resid, vm)
}

pub fn oracle_shrink_log_var(v: &[f64]) -> Vec<f64> {
    let logs: Vec<f64> = v.iter().map(|x| x.sqrt().ln()).collect();
    let avg = mean(&logs);
    logs.iter()
        .map(|l| {
            let s = (2.0 / 3.0) * l + (1.0 / 3.0) * avg;
            (s.exp()) * (s.exp())
        })
        .collect()
}

pub fn oracle_single_factor(w: &EstimationWindow) -> Dense {
    let (bh, _, om2, s2) = oracle_loadings(w);
    let b: Vec<f64> = bh.iter().map(|x| 2.0 / 3.0 * x + 1.0 / 3.0).collect();
    let d = oracle_shrink_log_var(&om2.iter().map(|o| o.max(1e-12)).collect::<Vec<_>>());
    let n = b.len();
    let mut v = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            v[i][j] = s2 * b[i] * b[j] + if i == j { d[i] } else { 0.0 };
        }
    }
    v
}

pub fn oracle_sample_cov(w: &EstimationWindow) -> Dense {
    let n = w.n_assets();
    let cols: Vec<Vec<f64>> = (0..n).map(|j| col(w, j)).collect();
    let mut s = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            s[i][j] = cov(&cols[i], &cols[j]);
        }
    }
    s
}

pub fn oracle_avg_corr(s: &Dense) -> f64 {
    let n = s.len();
    let mut total = 0.0;
    let mut k = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            total += s[i][j] / (s[i][i] * s[j][j]).sqrt();
            k += 1.0;
        }
    }
    total / k
}

/// (ρ, shrunk σ, V)
pub fn oracle_constant_correlation(w: &EstimationWindow) -> (f64, Vec<f64>, Dense) {
    let s = oracle_sample_cov(w);
    let n = s.len();
    let rho = oracle_avg_corr(&s);
    let var: Vec<f64> = (0..n).map(|i| s[i][i]).collect();
    let sigma: Vec<f64> = oracle_shrink_log_var(&var).iter().map(|v| v.sqrt()).collect();
    let mut v = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            v[i][j] = if i == j {
                sigma[i] * sigma[i]
            } else {
                rho * sigma[i] * sigma[j]
            };
        }
    }
    (rho, sigma, v)
}

/// Constant-correlation target from the matrix's own vols and mean correlation.
pub fn oracle_target(s: &Dense) -> Dense {
    let n = s.len();
    let r = oracle_avg_corr(s);
    let mut f = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            f[i][j] = if i == j { s[i][i] } else { r * (s[i][i] * s[j][j]).sqrt() };
        }
    }
    f
}

pub fn oracle_blend(f: &Dense, s: &Dense, d: f64) -> Dense {
    f.iter()
        .zip(s)
        .map(|(fr, sr)| fr.iter().zip(sr).map(|(a, b)| d * a + (1.0 - d) * b).collect())
        .collect()
}

/// Ledoit-Wolf (2004) constant-correlation intensity, written from the
/// published estimator with its `1/T` moments.
pub fn oracle_lw(w: &EstimationWindow) -> f64 {
    let t_len = w.len();
    let n = w.n_assets();
    let tf = t_len as f64;
    let cols: Vec<Vec<f64>> = (0..n).map(|j| col(w, j)).collect();
    let means: Vec<f64> = cols.iter().map(|c| mean(c)).collect();
    let y = |t: usize, i: usize| cols[i][t] - means[i];
    let mut s = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for t in 0..t_len {
                acc += y(t, i) * y(t, j);
            }
            s[i][j] = acc / tf;
        }
    }
    let rbar = oracle_avg_corr(&s);
    let mut pi_hat = 0.0;
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for t in 0..t_len {
                let d = y(t, i) * y(t, j) - s[i][j];
                acc += d * d;
            }
            pi_hat += acc / tf;
        }
    }
    let theta = |k: usize, i: usize, j: usize| {
        // mean_t (y_k^2 - s_kk)(y_i y_j - s_ij)
        let mut acc = 0.0;
        for t in 0..t_len {
            acc += (y(t, k) * y(t, k) - s[k][k]) * (y(t, i) * y(t, j) - s[i][j]);
        }
        acc / tf
    };
    let mut rho_hat = 0.0;
    for i in 0..n {
        let mut acc = 0.0;
        for t in 0..t_len {
            let d = y(t, i) * y(t, i) - s[i][i];
            acc += d * d;
        }
        rho_hat += acc / tf;
    }
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            rho_hat += rbar / 2.0
                * ((s[j][j] / s[i][i]).sqrt() * theta(i, i, j) + (s[i][i] / s[j][j]).sqrt() * theta(j, i, j));
        }
    }
    let mut gamma = 0.0;
    for i in 0..n {
        for j in 0..n {
            let f = if i == j { s[i][i] } else { rbar * (s[i][i] * s[j][j]).sqrt() };
            gamma += (f - s[i][j]) * (f - s[i][j]);
        }
    }
    let kappa = (pi_hat - rho_hat) / gamma;
    (kappa / tf).clamp(0.0, 1.0)
}

pub fn max_abs_diff(a: &Dense, b: &Matrix) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..a.len() {
        for j in 0..a.len() {
            m = m.max((a[i][j] - b[(i, j)]).abs());
        }
    }
    m
}

pub fn to_matrix(a: &Dense) -> Matrix {
    let n = a.len();
    Matrix::from_fn(n, n, |i, j| a[i][j])
}

pub fn quad(v: &Matrix, x: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..x.len() {
        for j in 0..x.len() {
            s += x[i] * v[(i, j)] * x[j];
        }
    }
    s
}

/// Random covariance `L Lᵀ` with vols in `[vlo, vhi]` and random correlations.
pub fn random_cov(rng: &mut ChaCha8Rng, n: usize, vlo: f64, vhi: f64) -> Matrix {
    let k = n + 2;
    let f: Vec<Vec<f64>> = (0..n).map(|_| (0..k).map(|_| normal(rng)).collect()).collect();
    let mut c = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            c[i][j] = f[i].iter().zip(&f[j]).map(|(a, b)| a * b).sum();
        }
    }
    let vols: Vec<f64> = (0..n).map(|_| uniform(rng, vlo, vhi)).collect();
    Matrix::from_fn(n, n, |i, j| vols[i] * vols[j] * c[i][j] / (c[i][i] * c[j][j]).sqrt())
}

/// Uniform draw from the probability simplex.
pub fn random_simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

pub fn div_ratio(v: &Matrix, x: &[f64]) -> f64 {
    let mut num = 0.0;
    for i in 0..x.len() {
        num += v[(i, i)].sqrt() * x[i];
    }
    num / quad(v, x).sqrt()
}

/// Minimum of `xᵀVx` over the 3-asset simplex: grid at `step`, then a
/// local grid at `fine` around the coarse winner.
pub fn grid_min_variance_3(v: &Matrix, step: f64, fine: f64) -> (Vec<f64>, f64) {
    let eval = |a: f64, b: f64| {
        let x = [a, b, 1.0 - a - b];
        quad(v, &x)
    };
    let k = (1.0 / step).round() as usize;
    let mut best = (0.0, 0.0, f64::INFINITY);
    for i in 0..=k {
        for j in 0..=(k - i) {
            let (a, b) = (i as f64 * step, j as f64 * step);
            let f = eval(a, b);
            if f < best.2 {
                best = (a, b, f);
            }
        }
    }
    let span = (2.0 * step / fine).round() as i64;
    let (ca, cb) = (best.0, best.1);
    for i in -span..=span {
        for j in -span..=span {
            let a = ca + i as f64 * fine;
            let b = cb + j as f64 * fine;
            if a < 0.0 || b < 0.0 || a + b > 1.0 {
                continue;
            }
            let f = eval(a, b);
            if f < best.2 {
                best = (a, b, f);
            }
        }
    }
    (vec![best.0, best.1, 1.0 - best.0 - best.1], best.2)
}

/// Positive definite instance whose risk-parity solution leaves `d` slack,
/// found by rejection against a solve with a loose bound.
pub fn slack_rp_instance(rng: &mut ChaCha8Rng, n: usize, d: f64) -> Matrix {
    use divport_core::solver::solve_box_log_barrier;
    use divport_core::SolverOptions;
    loop {
        let v = random_cov(rng, n, 0.5, 2.0);
        let Ok(s) = solve_box_log_barrier(&v, 1e6, &SolverOptions::default()) else {
            continue;
        };
        if s.x.iter().all(|y| *y < 0.9 * d) {
            return v;
        }
    }
}
