//! Covariance risk models estimated from an [`EstimationWindow`].
//!
//! Three estimators are provided:
//!
//! * single factor: `V = σ_f² b bᵀ + D`, with betas shrunk a third of the
//!   way toward one and idiosyncratic log-vols shrunk a third of the way
//!   toward their cross-sectional mean;
//! * constant correlation: `V = ρ σσᵀ + (1 − ρ) Diag(σ)²`, with ρ the mean
//!   pairwise sample correlation and log-vols shrunk as above;
//! * shrunk sample: `V = δ F + (1 − δ) S`, where `F` is the constant
//!   correlation target built from `S` itself and δ is either fixed or the
//!   Ledoit-Wolf intensity estimate.
//!
//! Sample moments use the `W − 1` denominator.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::linalg::{mean, Matrix};
use crate::panel::EstimationWindow;

/// Weight of the shrinkage target in the beta and log-vol adjustments.
pub const SHRINK_WEIGHT: f64 = 1.0 / 3.0;
/// Idiosyncratic variances below this are floored before taking logs.
pub const VARIANCE_FLOOR: f64 = 1e-12;
/// Default absolute eigenvalue tolerance of [`validate_psd`].
pub const DEFAULT_PSD_TOL: f64 = 1e-10;
/// Relative Cholesky pivot floor used by [`is_positive_definite`].
pub const PD_RELATIVE_PIVOT: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RiskModelError {
    #[error("market returns have zero sample variance")]
    DegenerateMarket,
    #[error("variance at index {index} is not strictly positive")]
    NonPositiveVariance { index: usize },
    #[error("asset at index {index} has zero sample variance")]
    DegenerateAsset { index: usize },
    #[error("average correlation {rho} is outside the PSD range for {n} assets")]
    CorrelationOutOfPsdRange { rho: f64, n: usize },
    #[error("estimator needs at least {need} assets, got {have}")]
    TooFewAssets { have: usize, need: usize },
    #[error("window needs at least 2 observations, got {0}")]
    TooShortWindow(usize),
    #[error("shrinkage intensity {0} is outside [0, 1]")]
    InvalidIntensity(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum RiskModelKind {
    SingleFactor,
    ConstantCorrelation,
    SampleShrunk,
}

impl RiskModelKind {
    pub const ALL: [RiskModelKind; 3] = [
        RiskModelKind::SingleFactor,
        RiskModelKind::ConstantCorrelation,
        RiskModelKind::SampleShrunk,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RiskModelKind::SingleFactor => "single_factor",
            RiskModelKind::ConstantCorrelation => "constant_correlation",
            RiskModelKind::SampleShrunk => "sample_shrunk",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            RiskModelKind::SingleFactor => "Single-Factor",
            RiskModelKind::ConstantCorrelation => "Constant Correlation",
            RiskModelKind::SampleShrunk => "Sample Covariance (Shrinkage)",
        }
    }
}

impl fmt::Display for RiskModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RiskModelKind {
    type Err = &'static str;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "single_factor" => Ok(RiskModelKind::SingleFactor),
            "constant_correlation" => Ok(RiskModelKind::ConstantCorrelation),
            "sample_shrunk" => Ok(RiskModelKind::SampleShrunk),
            _ => Err("expected single_factor, constant_correlation or sample_shrunk"),
        }
    }
}

/// How the shrunk sample estimator chooses δ.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Shrinkage {
    #[default]
    LedoitWolf,
    Fixed(f64),
}

/// Raw single-factor regression estimates.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FactorEstimates {
    pub beta_hat: Vec<f64>,
    pub omega2_hat: Vec<f64>,
    pub sigma2_f: f64,
}

/// Inputs of the constant-correlation form.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConstantCorrelationEstimates {
    pub rho: f64,
    /// Shrunk volatilities.
    pub sigma: Vec<f64>,
    /// Pairwise sample correlations, row-major N x N with unit diagonal.
    pub correlations: Matrix,
}

/// A covariance estimate together with its volatilities.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceModel {
    matrix: Matrix,
    vols: Vec<f64>,
    kind: RiskModelKind,
    intensity: Option<f64>,
    npd: bool,
}

impl CovarianceModel {
    /// Wraps a symmetric matrix; volatilities are the roots of its diagonal.
    pub fn from_matrix(matrix: Matrix, kind: RiskModelKind) -> Self {
        let vols = matrix.diagonal().iter().map(|v| libm::sqrt(*v)).collect();
        Self {
            matrix,
            vols,
            kind,
            intensity: None,
            npd: false,
        }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn vols(&self) -> &[f64] {
        &self.vols
    }

    pub fn kind(&self) -> RiskModelKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    /// δ used by the shrunk sample estimator.
    pub fn intensity(&self) -> Option<f64> {
        self.intensity
    }

    /// Set when a shrunk sample estimate failed [`validate_psd`].
    pub fn is_npd(&self) -> bool {
        self.npd
    }

    /// Same model with the matrix multiplied by `s > 0`.
    pub fn scaled(&self, s: f64) -> Self {
        Self::from_matrix(self.matrix.scaled(s), self.kind)
    }
}

/// Single-factor loadings by moment matrices: `β̂ = Cov(r, r_M) / Var(r_M)`
/// and `ω̂²` the sample variance of the fitted-line residual.
pub fn estimate_loadings(window: &EstimationWindow) -> Result<FactorEstimates, RiskModelError> {
    let w = window.len();
    if w < 2 {
        return Err(RiskModelError::TooShortWindow(w));
    }
    let n = window.n_assets();
    let dof = (w - 1) as f64;
    let m_mean = mean(&window.market);
    let mc: Vec<f64> = window.market.iter().map(|m| m - m_mean).collect();
    let var_m = mc.iter().map(|v| v * v).sum::<f64>() / dof;
    // a constant series leaves only rounding noise in var_m
    let noise = 16.0 * f64::EPSILON * window.market.iter().fold(0.0f64, |a, m| a.max(m.abs()));
    if !(var_m > noise * noise) {
        return Err(RiskModelError::DegenerateMarket);
    }
    let centered = center_columns(&window.returns);
    // Cov(r_i, r_M) for every asset at once: Xcᵀ m_c / (W - 1)
    let cov_m: Vec<f64> = centered.tr_mul_vec(&mc).iter().map(|c| c / dof).collect();
    let beta_hat: Vec<f64> = cov_m.iter().map(|c| c / var_m).collect();
    let mut omega2_hat = vec![0.0; n];
    for t in 0..w {
        let row = centered.row(t);
        for j in 0..n {
            let e = row[j] - beta_hat[j] * mc[t];
            omega2_hat[j] += e * e;
        }
    }
    for o in &mut omega2_hat {
        *o /= dof;
    }
    Ok(FactorEstimates {
        beta_hat,
        omega2_hat,
        sigma2_f: var_m,
    })
}

/// `β = (2/3) β̂ + 1/3`, element-wise.
pub fn shrink_betas(beta_hat: &[f64]) -> Vec<f64> {
    beta_hat
        .iter()
        .map(|b| (1.0 - SHRINK_WEIGHT) * b + SHRINK_WEIGHT)
        .collect()
}

/// Shrinks log volatilities a third of the way toward their mean.
pub fn shrink_log_vols(log_vols: &[f64]) -> Vec<f64> {
    let avg = mean(log_vols);
    log_vols
        .iter()
        .map(|l| (1.0 - SHRINK_WEIGHT) * l + SHRINK_WEIGHT * avg)
        .collect()
}

/// Applies [`shrink_log_vols`] to variances and returns shrunk variances.
pub fn shrink_log_variances(variances: &[f64]) -> Result<Vec<f64>, RiskModelError> {
    if let Some(index) = variances.iter().position(|v| !(*v > 0.0)) {
        return Err(RiskModelError::NonPositiveVariance { index });
    }
    let logs: Vec<f64> = variances.iter().map(|v| 0.5 * libm::log(*v)).collect();
    Ok(shrink_log_vols(&logs)
        .into_iter()
        .map(|l| libm::exp(2.0 * l))
        .collect())
}

/// Assembles `σ_f² b bᵀ + Diag(d)`.
pub fn single_factor_from_parts(b: &[f64], sigma2_f: f64, idio: &[f64]) -> CovarianceModel {
    let n = b.len();
    assert_eq!(idio.len(), n);
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        let si = sigma2_f * b[i];
        for j in i..n {
            let v = si * b[j];
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
        m[(i, i)] += idio[i];
    }
    CovarianceModel::from_matrix(m, RiskModelKind::SingleFactor)
}

pub fn single_factor_cov(window: &EstimationWindow) -> Result<CovarianceModel, RiskModelError> {
    let est = estimate_loadings(window)?;
    let b = shrink_betas(&est.beta_hat);
    let floored: Vec<f64> = est.omega2_hat.iter().map(|o| o.max(VARIANCE_FLOOR)).collect();
    let d = shrink_log_variances(&floored)?;
    Ok(single_factor_from_parts(&b, est.sigma2_f, &d))
}

/// Assembles `ρ σσᵀ + (1 − ρ) Diag(σ)²`. The diagonal is set to `σᵢ²` directly.
pub fn constant_correlation_from_parts(rho: f64, sigma: &[f64]) -> CovarianceModel {
    let n = sigma.len();
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = sigma[i] * sigma[i];
        for j in (i + 1)..n {
            let v = rho * sigma[i] * sigma[j];
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    CovarianceModel {
        matrix: m,
        vols: sigma.to_vec(),
        kind: RiskModelKind::ConstantCorrelation,
        intensity: None,
        npd: false,
    }
}

/// Mean pairwise correlation and shrunk volatilities.
pub fn constant_correlation_estimates(
    window: &EstimationWindow,
) -> Result<ConstantCorrelationEstimates, RiskModelError> {
    let n = window.n_assets();
    if n < 2 {
        return Err(RiskModelError::TooFewAssets { have: n, need: 2 });
    }
    if window.len() < 2 {
        return Err(RiskModelError::TooShortWindow(window.len()));
    }
    let s = sample_covariance(&window.returns);
    let var = s.diagonal();
    if let Some(index) = var.iter().position(|v| !(*v > VARIANCE_FLOOR)) {
        return Err(RiskModelError::DegenerateAsset { index });
    }
    let correlations = correlation_matrix(&s);
    let rho = average_off_diagonal(&correlations);
    if !(rho > -1.0 / (n as f64 - 1.0)) || !(rho < 1.0) {
        return Err(RiskModelError::CorrelationOutOfPsdRange { rho, n });
    }
    let sigma = shrink_log_variances(&var)?
        .into_iter()
        .map(libm::sqrt)
        .collect();
    Ok(ConstantCorrelationEstimates {
        rho,
        sigma,
        correlations,
    })
}

pub fn constant_correlation_cov(window: &EstimationWindow) -> Result<CovarianceModel, RiskModelError> {
    let est = constant_correlation_estimates(window)?;
    Ok(constant_correlation_from_parts(est.rho, &est.sigma))
}

/// Sample covariance with the `W − 1` denominator.
pub fn sample_covariance(returns: &Matrix) -> Matrix {
    let w = returns.rows();
    let n = returns.cols();
    let c = center_columns(returns);
    let dof = (w as f64) - 1.0;
    let mut s = Matrix::zeros(n, n);
    for t in 0..w {
        let row = c.row(t);
        for i in 0..n {
            let ri = row[i];
            let out = s.row_mut(i);
            for j in i..n {
                out[j] += ri * row[j];
            }
        }
    }
    for i in 0..n {
        for j in i..n {
            let v = s[(i, j)] / dof;
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    s
}

/// Constant-correlation target built from a covariance matrix's own
/// volatilities and average correlation.
pub fn constant_correlation_target(s: &Matrix) -> Matrix {
    let n = s.rows();
    let sd: Vec<f64> = s.diagonal().iter().map(|v| libm::sqrt(*v)).collect();
    let r_bar = average_off_diagonal(&correlation_matrix(s));
    let mut f = Matrix::zeros(n, n);
    for i in 0..n {
        f[(i, i)] = s[(i, i)];
        for j in (i + 1)..n {
            let v = r_bar * sd[i] * sd[j];
            f[(i, j)] = v;
            f[(j, i)] = v;
        }
    }
    f
}

/// Ledoit-Wolf (2004) intensity for the constant-correlation target, in [0, 1].
pub fn ledoit_wolf_intensity(returns: &Matrix) -> f64 {
    let t = returns.rows();
    let n = returns.cols();
    if n < 2 || t < 2 {
        return 0.0;
    }
    let tf = t as f64;
    let x = center_columns(returns);
    // sample covariance with the 1/T normalisation
    let mut s = Matrix::zeros(n, n);
    for r in 0..t {
        let row = x.row(r);
        for i in 0..n {
            for j in 0..n {
                s[(i, j)] += row[i] * row[j];
            }
        }
    }
    let s = s.scaled(1.0 / tf);
    let sd: Vec<f64> = s.diagonal().iter().map(|v| libm::sqrt(*v)).collect();
    if sd.iter().any(|v| !(*v > 0.0)) {
        return 0.0;
    }
    let r_bar = average_off_diagonal(&correlation_matrix(&s));

    // pi_ij = mean_t (x_ti x_tj - s_ij)^2
    // theta_ij = mean_t (x_ti^2 - s_ii)(x_ti x_tj - s_ij)
    let mut pi = Matrix::zeros(n, n);
    let mut theta = Matrix::zeros(n, n);
    for r in 0..t {
        let row = x.row(r);
        for i in 0..n {
            let sq = row[i] * row[i] - s[(i, i)];
            for j in 0..n {
                let p = row[i] * row[j] - s[(i, j)];
                pi[(i, j)] += p * p;
                theta[(i, j)] += sq * p;
            }
        }
    }
    let pi_hat: f64 = pi.as_slice().iter().sum::<f64>() / tf;
    let mut rho_hat = 0.0;
    for i in 0..n {
        rho_hat += pi[(i, i)] / tf;
        for j in 0..n {
            if i != j {
                rho_hat += r_bar * (sd[j] / sd[i]) * theta[(i, j)] / tf;
            }
        }
    }
    let mut gamma = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let d = r_bar * sd[i] * sd[j] - s[(i, j)];
                gamma += d * d;
            }
        }
    }
    if !(gamma > 0.0) {
        return 0.0;
    }
    let kappa = (pi_hat - rho_hat) / gamma;
    (kappa / tf).clamp(0.0, 1.0)
}

/// `δ F + (1 − δ) S`.
pub fn blend(target: &Matrix, sample: &Matrix, delta: f64) -> Matrix {
    Matrix::from_fn(sample.rows(), sample.cols(), |i, j| {
        delta * target[(i, j)] + (1.0 - delta) * sample[(i, j)]
    })
}

pub fn sample_cov_shrunk(
    window: &EstimationWindow,
    shrinkage: Shrinkage,
) -> Result<CovarianceModel, RiskModelError> {
    if window.len() < 2 {
        return Err(RiskModelError::TooShortWindow(window.len()));
    }
    let delta = match shrinkage {
        Shrinkage::Fixed(d) if (0.0..=1.0).contains(&d) => d,
        Shrinkage::Fixed(d) => return Err(RiskModelError::InvalidIntensity(d)),
        Shrinkage::LedoitWolf => ledoit_wolf_intensity(&window.returns),
    };
    let s = sample_covariance(&window.returns);
    let f = constant_correlation_target(&s);
    let v = blend(&f, &s, delta);
    let mut model = CovarianceModel::from_matrix(v, RiskModelKind::SampleShrunk);
    model.intensity = Some(delta);
    model.npd = !validate_psd(model.matrix(), DEFAULT_PSD_TOL);
    Ok(model)
}

/// Estimates the requested model.
pub fn estimate(
    kind: RiskModelKind,
    window: &EstimationWindow,
    shrinkage: Shrinkage,
) -> Result<CovarianceModel, RiskModelError> {
    match kind {
        RiskModelKind::SingleFactor => single_factor_cov(window),
        RiskModelKind::ConstantCorrelation => constant_correlation_cov(window),
        RiskModelKind::SampleShrunk => sample_cov_shrunk(window, shrinkage),
    }
}

/// True iff the smallest eigenvalue of a symmetric matrix is at least `-tol`,
/// tested by factoring `M + tol·I`.
pub fn validate_psd(matrix: &Matrix, tol: f64) -> bool {
    crate::linalg::is_psd(matrix, tol)
}

/// Strict definiteness used by the risk-parity program: every Cholesky
/// pivot must exceed [`PD_RELATIVE_PIVOT`] times the largest diagonal entry.
pub fn is_positive_definite(matrix: &Matrix) -> bool {
    let scale = matrix.diagonal().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    scale > 0.0 && matrix.cholesky(PD_RELATIVE_PIVOT * scale).is_some()
}

fn center_columns(x: &Matrix) -> Matrix {
    let w = x.rows();
    let n = x.cols();
    let mut means = vec![0.0; n];
    for t in 0..w {
        for (m, v) in means.iter_mut().zip(x.row(t)) {
            *m += v;
        }
    }
    for m in &mut means {
        *m /= w as f64;
    }
    Matrix::from_fn(w, n, |t, j| x[(t, j)] - means[j])
}

fn correlation_matrix(s: &Matrix) -> Matrix {
    let n = s.rows();
    let sd: Vec<f64> = s.diagonal().iter().map(|v| libm::sqrt(*v)).collect();
    Matrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0
        } else {
            s[(i, j)] / (sd[i] * sd[j])
        }
    })
}

fn average_off_diagonal(c: &Matrix) -> f64 {
    let n = c.rows();
    if n < 2 {
        return 0.0;
    }
    let mut sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            sum += c[(i, j)];
        }
    }
    sum / ((n * (n - 1) / 2) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::month::Month;
    use approx::assert_abs_diff_eq;

    fn window(returns: Matrix, market: Vec<f64>) -> EstimationWindow {
        EstimationWindow::from_parts(returns, market, Month::new(2000, 1).unwrap())
    }

    fn market(w: usize) -> Vec<f64> {
        (0..w).map(|t| 0.03 * libm::sin(t as f64 * 1.3) + 0.004).collect()
    }

    #[test]
    fn loadings_perfect_tracking() {
        let m = market(60);
        let r = Matrix::from_fn(60, 1, |t, _| m[t]);
        let est = estimate_loadings(&window(r, m)).unwrap();
        assert_eq!(est.beta_hat[0], 1.0);
        assert_eq!(est.omega2_hat[0], 0.0);
    }

    #[test]
    fn loadings_constant_asset() {
        let m = market(60);
        let r = Matrix::from_fn(60, 1, |_, _| 0.5);
        let est = estimate_loadings(&window(r, m)).unwrap();
        assert_eq!(est.beta_hat[0], 0.0);
        assert_eq!(est.omega2_hat[0], 0.0);
    }

    #[test]
    fn loadings_degenerate_market() {
        let r = Matrix::from_fn(10, 2, |t, j| (t + j) as f64 * 0.01);
        let e = estimate_loadings(&window(r, vec![0.01; 10]));
        assert_eq!(e, Err(RiskModelError::DegenerateMarket));
    }

    #[test]
    fn beta_shrinkage_values() {
        let b = shrink_betas(&[1.0, 0.5, 1.6]);
        assert_eq!(b[0], 1.0);
        assert_abs_diff_eq!(b[1], 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b[2], 1.4, epsilon = 1e-15);
    }

    #[test]
    fn log_vol_shrinkage_values() {
        let s = shrink_log_vols(&[0.0, 3.0]);
        assert_abs_diff_eq!(s[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(s[1], 2.5, epsilon = 1e-15);
        let v = shrink_log_variances(&[0.04, 0.04, 0.04]).unwrap();
        for x in v {
            assert_abs_diff_eq!(x, 0.04, epsilon = 1e-16);
        }
        assert_eq!(
            shrink_log_variances(&[0.01, 0.0]),
            Err(RiskModelError::NonPositiveVariance { index: 1 })
        );
    }

    #[test]
    fn single_factor_assembly() {
        let m = single_factor_from_parts(&[1.0, 1.0], 0.04, &[0.01, 0.01]);
        let want = Matrix::from_rows(&[[0.05, 0.04], [0.04, 0.05]]);
        assert!(m.matrix().max_abs_diff(&want) < 1e-16);
        let m = single_factor_from_parts(&[0.0, 0.0], 0.04, &[0.01, 0.02]);
        assert_eq!(m.matrix(), &Matrix::from_diagonal(&[0.01, 0.02]));
    }

    #[test]
    fn constant_correlation_assembly() {
        let m = constant_correlation_from_parts(0.0, &[0.1, 0.2]);
        assert!(m.matrix().max_abs_diff(&Matrix::from_diagonal(&[0.01, 0.04])) < 1e-17);
        let m = constant_correlation_from_parts(1.0, &[0.1, 0.2]);
        let want = Matrix::from_rows(&[[0.01, 0.02], [0.02, 0.04]]);
        assert!(m.matrix().max_abs_diff(&want) < 1e-17);
        let m = constant_correlation_from_parts(0.5, &[0.1, 0.2]);
        let want = Matrix::from_rows(&[[0.01, 0.01], [0.01, 0.04]]);
        assert!(m.matrix().max_abs_diff(&want) < 1e-17);
        assert_eq!(m.vols(), &[0.1, 0.2]);
    }

    #[test]
    fn constant_correlation_errors() {
        let m = market(20);
        let one = Matrix::from_fn(20, 1, |t, _| m[t]);
        assert!(matches!(
            constant_correlation_cov(&window(one, m.clone())),
            Err(RiskModelError::TooFewAssets { .. })
        ));
        let flat = Matrix::from_fn(20, 2, |t, j| if j == 0 { m[t] } else { 0.25 });
        assert_eq!(
            constant_correlation_cov(&window(flat, m.clone())),
            Err(RiskModelError::DegenerateAsset { index: 1 })
        );
        // two perfectly anti-correlated assets: rho = -1 = -1/(N-1)
        let anti = Matrix::from_fn(20, 2, |t, j| if j == 0 { m[t] } else { -m[t] });
        assert!(matches!(
            constant_correlation_cov(&window(anti, m)),
            Err(RiskModelError::CorrelationOutOfPsdRange { .. })
        ));
    }

    #[test]
    fn shrunk_sample_endpoints() {
        let m = market(30);
        let r = Matrix::from_fn(30, 3, |t, j| {
            m[t] * (0.5 + j as f64) + 0.01 * libm::cos((t * (j + 2)) as f64)
        });
        let w = window(r.clone(), m);
        let s = sample_covariance(&r);
        let f = constant_correlation_target(&s);
        let v0 = sample_cov_shrunk(&w, Shrinkage::Fixed(0.0)).unwrap();
        assert_eq!(v0.matrix(), &s);
        let v1 = sample_cov_shrunk(&w, Shrinkage::Fixed(1.0)).unwrap();
        assert_eq!(v1.matrix(), &f);
        assert_eq!(
            sample_cov_shrunk(&w, Shrinkage::Fixed(1.5)),
            Err(RiskModelError::InvalidIntensity(1.5))
        );
        let lw = sample_cov_shrunk(&w, Shrinkage::LedoitWolf).unwrap();
        let d = lw.intensity().unwrap();
        assert!((0.0..=1.0).contains(&d));
    }

    #[test]
    fn psd_checks() {
        assert!(validate_psd(&Matrix::identity(4), DEFAULT_PSD_TOL));
        let bad = Matrix::from_rows(&[[1.0, 2.0], [2.0, 1.0]]);
        assert!(!validate_psd(&bad, DEFAULT_PSD_TOL));
        assert!(!is_positive_definite(&bad));
        let sigma: Vec<f64> = (0..10).map(|i| 0.05 + 0.01 * i as f64).collect();
        let cc = constant_correlation_from_parts(0.99, &sigma);
        assert!(validate_psd(cc.matrix(), DEFAULT_PSD_TOL));
        // rank-one matrix is PSD but not strictly PD
        let r1 = Matrix::from_fn(3, 3, |i, j| ((i + 1) * (j + 1)) as f64);
        assert!(validate_psd(&r1, DEFAULT_PSD_TOL));
        assert!(!is_positive_definite(&r1));
    }
}
