//! Seeded single-factor Gaussian panels with known ground truth.
//!
//! `r_M ~ N(μ_m, σ_m²)`, `rᵢ = βᵢ r_M + εᵢ` with `εᵢ ~ N(0, ωᵢ²)`.
//! The stream comes from ChaCha8 seeded with the 64-bit seed and is drawn
//! in a fixed order: all betas, all omegas, all initial caps, then month by
//! month the market shock followed by one shock per asset.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{StandardNormal, Uniform};

use crate::linalg::Matrix;
use crate::month::Month;
use crate::panel::ReturnsPanel;

/// Shortest panel accepted, one OOS month at the default window.
pub const MIN_MONTHS: usize = 62;
/// Simulated returns are floored here to keep every return above −1.
pub const RETURN_FLOOR: f64 = -0.99;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct SynthSpec {
    pub n_assets: usize,
    pub n_months: usize,
    pub seed: u64,
    pub mu_m: f64,
    pub sigma_m: f64,
    pub beta_range: (f64, f64),
    pub omega_range: (f64, f64),
    /// Mean and standard deviation of log initial caps.
    pub cap_log_mean: f64,
    pub cap_log_sd: f64,
    pub start: Month,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_assets: 100,
            n_months: 600,
            seed: 0,
            mu_m: 0.005,
            sigma_m: 0.045,
            beta_range: (0.5, 1.5),
            omega_range: (0.03, 0.09),
            cap_log_mean: 7.0,
            cap_log_sd: 1.0,
            start: Month::new(1970, 1).expect("valid month"),
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = SynthError::InvalidSpec;
        if self.n_assets == 0 {
            return Err(bad("n_assets must be positive"));
        }
        if self.n_months < MIN_MONTHS {
            return Err(bad("n_months must be at least 62"));
        }
        if !(self.sigma_m > 0.0) || !self.sigma_m.is_finite() || !self.mu_m.is_finite() {
            return Err(bad("sigma_m must be positive and finite"));
        }
        let ordered = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo <= hi;
        if !ordered(self.beta_range) {
            return Err(bad("beta_range must be finite and ordered"));
        }
        if !ordered(self.omega_range) || self.omega_range.0 < 0.0 {
            return Err(bad("omega_range must be finite, ordered and non-negative"));
        }
        if !self.cap_log_mean.is_finite() || !(self.cap_log_sd >= 0.0) || !self.cap_log_sd.is_finite() {
            return Err(bad("cap parameters must be finite with non-negative spread"));
        }
        Ok(())
    }
}

/// Parameters the panel was drawn from.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GroundTruth {
    pub beta: Vec<f64>,
    pub omega: Vec<f64>,
    pub sigma_f: f64,
    pub mu_m: f64,
    pub seed: u64,
}

impl GroundTruth {
    /// `σ_f² ββᵀ + Diag(ω²)`
    pub fn covariance(&self) -> Matrix {
        let s2 = self.sigma_f * self.sigma_f;
        let n = self.beta.len();
        Matrix::from_fn(n, n, |i, j| {
            let c = s2 * self.beta[i] * self.beta[j];
            if i == j {
                c + self.omega[i] * self.omega[i]
            } else {
                c
            }
        })
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        // keep the stream aligned with the non-degenerate case
        let _: f64 = rng.random();
        return lo;
    }
    rng.sample(Uniform::new(lo, hi).expect("validated range"))
}

pub fn generate(spec: &SynthSpec) -> Result<(ReturnsPanel, GroundTruth), SynthError> {
    spec.validate()?;
    let n = spec.n_assets;
    let t_len = spec.n_months;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let beta: Vec<f64> = (0..n).map(|_| uniform(&mut rng, spec.beta_range)).collect();
    let omega: Vec<f64> = (0..n).map(|_| uniform(&mut rng, spec.omega_range)).collect();
    let mut cap: Vec<f64> = (0..n)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            libm::exp(spec.cap_log_mean + spec.cap_log_sd * z)
        })
        .collect();

    let mut returns = Vec::with_capacity(t_len * n);
    let mut caps = Vec::with_capacity(t_len * n);
    let mut market = Vec::with_capacity(t_len);
    for _ in 0..t_len {
        let zm: f64 = rng.sample(StandardNormal);
        let rm = spec.mu_m + spec.sigma_m * zm;
        market.push(rm.max(RETURN_FLOOR));
        for j in 0..n {
            let z: f64 = rng.sample(StandardNormal);
            let r = (beta[j] * rm + omega[j] * z).max(RETURN_FLOOR);
            cap[j] *= 1.0 + r;
            returns.push(r);
            caps.push(cap[j]);
        }
    }

    let dates: Vec<Month> = (0..t_len).map(|i| spec.start.plus(i as i64)).collect();
    let width = format!("{}", n).len().max(4);
    let ids: Vec<String> = (1..=n).map(|j| format!("S{j:0width$}")).collect();
    let panel = ReturnsPanel::new(
        dates,
        ids,
        Matrix::from_vec(t_len, n, returns),
        market,
        Some(Matrix::from_vec(t_len, n, caps)),
    )
    .map_err(|_| SynthError::InvalidSpec("parameters produce an invalid panel"))?;
    let truth = GroundTruth {
        beta,
        omega,
        sigma_f: spec.sigma_m,
        mu_m: spec.mu_m,
        seed: spec.seed,
    };
    Ok((panel, truth))
}
