//! Least squares, heteroskedasticity-robust (White/HC0) covariances,
//! Newey-West long-run variance of a sample mean with the Andrews AR(1)
//! plug-in truncation lag, and significance stars.
//!
//! ```text
//! Ω   = γ₀ + 2 Σ_{j=1..L} (1 − j/(L+1)) γⱼ        γⱼ = (1/T) Σ_t d_t d_{t−j}
//! se  = sqrt(max(Ω, 0) / T)
//! S*  = 1.1447 · [4ρ²T / ((1−ρ)²(1+ρ)²)]^{1/3}    L = ⌊S*⌋
//! ```

use nalgebra::DMatrix;
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Relative singular-value tolerance below which a design is rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Bartlett-kernel rate constant of the Andrews plug-in bandwidth.
const ANDREWS_BARTLETT: f64 = 1.1447;
const RHO_CLAMP: f64 = 0.97;
const ANDREWS_MIN_LEN: usize = 8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InferenceError {
    #[error("design matrix is rank deficient (singular-value ratio {ratio:e})")]
    RankDeficient { ratio: f64 },
    #[error("need more observations than regressors ({rows} rows, {cols} columns)")]
    TooFewObservations { rows: usize, cols: usize },
    #[error("series too short: need at least {needed}, got {got}")]
    SeriesTooShort { needed: usize, got: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeType {
    Ols,
    White,
    NeweyWest(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionResult {
    pub coefficients: Vec<f64>,
    pub covariance: DMatrix<f64>,
    pub se_type: SeType,
    pub n_obs: usize,
    pub r_squared: f64,
    pub std_errors: Vec<f64>,
    pub t_stats: Vec<f64>,
    pub stars: Vec<&'static str>,
    pub residuals: Vec<f64>,
    /// `(XᵀX)⁻¹`, kept for sandwich estimators.
    pub xtx_inv: DMatrix<f64>,
}

impl RegressionResult {
    fn with_covariance(mut self, covariance: DMatrix<f64>, se_type: SeType) -> Self {
        self.std_errors = (0..covariance.nrows())
            .map(|i| covariance[(i, i)].max(0.0).sqrt())
            .collect();
        self.t_stats = self
            .coefficients
            .iter()
            .zip(&self.std_errors)
            .map(|(b, s)| b / s)
            .collect();
        self.stars = self.t_stats.iter().map(|&t| stars(t)).collect();
        self.covariance = covariance;
        self.se_type = se_type;
        self
    }
}

/// Least squares via Householder QR with a singular-value rank check.
///
/// `x` must already contain the intercept column if one is wanted. The
/// returned covariance is the classical `s²(XᵀX)⁻¹` with `s² = SSR/(n−p)`.
pub fn ols(y: &[f64], x: &DMatrix<f64>) -> Result<RegressionResult, InferenceError> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(InferenceError::LengthMismatch(y.len(), n));
    }
    if n <= p {
        return Err(InferenceError::TooFewObservations { rows: n, cols: p });
    }
    let qr = x.clone().qr();
    let r = qr.r();
    let sv = r.clone().svd(false, false).singular_values;
    let smax = sv.max();
    let smin = sv.min();
    let ratio = if smax > 0.0 { smin / smax } else { 0.0 };
    if !(ratio > RANK_TOLERANCE) {
        return Err(InferenceError::RankDeficient { ratio });
    }
    let yv = nalgebra::DVector::from_column_slice(y);
    let qty = qr.q().transpose() * &yv;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or(InferenceError::RankDeficient { ratio })?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or(InferenceError::RankDeficient { ratio })?;
    let xtx_inv = &r_inv * r_inv.transpose();

    let fitted = x * &beta;
    let residuals: Vec<f64> = yv.iter().zip(fitted.iter()).map(|(a, b)| a - b).collect();
    let ssr: f64 = residuals.iter().map(|e| e * e).sum();
    let mean = y.iter().sum::<f64>() / n as f64;
    let sst: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    let r_squared = if sst > 0.0 {
        (1.0 - ssr / sst).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let s2 = ssr / (n - p) as f64;
    let covariance = &xtx_inv * s2;
    let out = RegressionResult {
        coefficients: beta.iter().copied().collect(),
        covariance: DMatrix::zeros(p, p),
        se_type: SeType::Ols,
        n_obs: n,
        r_squared,
        std_errors: Vec::new(),
        t_stats: Vec::new(),
        stars: Vec::new(),
        residuals,
        xtx_inv,
    };
    Ok(out.with_covariance(covariance, SeType::Ols))
}

/// HC0 sandwich `(XᵀX)⁻¹ (Σᵢ eᵢ² xᵢxᵢᵀ) (XᵀX)⁻¹`.
pub fn white_covariance(x: &DMatrix<f64>, residuals: &[f64], xtx_inv: &DMatrix<f64>) -> DMatrix<f64> {
    let p = x.ncols();
    let mut meat = DMatrix::<f64>::zeros(p, p);
    for (i, e) in residuals.iter().enumerate() {
        let e2 = e * e;
        for a in 0..p {
            let xa = x[(i, a)] * e2;
            for b in 0..p {
                meat[(a, b)] += xa * x[(i, b)];
            }
        }
    }
    let cov = xtx_inv * meat * xtx_inv;
    // exact symmetry
    (&cov + cov.transpose()) * 0.5
}

/// OLS with White heteroskedasticity-robust standard errors.
pub fn ols_white(y: &[f64], x: &DMatrix<f64>) -> Result<RegressionResult, InferenceError> {
    let fit = ols(y, x)?;
    let cov = white_covariance(x, &fit.residuals, &fit.xtx_inv);
    Ok(fit.with_covariance(cov, SeType::White))
}

/// Builds `[1, x₁, …, x_k]` rows into a design matrix.
pub fn design_with_intercept(columns: &[&[f64]]) -> DMatrix<f64> {
    let n = columns.first().map_or(0, |c| c.len());
    DMatrix::from_fn(n, columns.len() + 1, |i, j| {
        if j == 0 {
            1.0
        } else {
            columns[j - 1][i]
        }
    })
}

fn demeaned(series: &[f64]) -> (f64, Vec<f64>) {
    let mean = series.iter().sum::<f64>() / series.len() as f64;
    (mean, series.iter().map(|v| v - mean).collect())
}

fn autocovariance(d: &[f64], lag: usize) -> f64 {
    let t = d.len();
    let s: f64 = (lag..t).map(|i| d[i] * d[i - lag]).sum();
    s / t as f64
}

/// Andrews (AR(1) plug-in) truncation lag for the Bartlett kernel.
pub fn andrews_lag(series: &[f64]) -> Result<usize, InferenceError> {
    let t = series.len();
    if t < ANDREWS_MIN_LEN {
        return Err(InferenceError::SeriesTooShort {
            needed: ANDREWS_MIN_LEN,
            got: t,
        });
    }
    let (_, d) = demeaned(series);
    let denom: f64 = d.iter().map(|v| v * v).sum();
    if denom == 0.0 {
        return Ok(0);
    }
    let num: f64 = (1..t).map(|i| d[i] * d[i - 1]).sum();
    let s_star = andrews_bandwidth(num / denom, t);
    Ok((s_star.floor() as usize).min(t - 1))
}

/// Real-valued plug-in bandwidth `S*` for a lag-1 autocorrelation `rho`
/// (clamped to ±0.97) and sample length `t`.
pub fn andrews_bandwidth(rho: f64, t: usize) -> f64 {
    let rho = rho.clamp(-RHO_CLAMP, RHO_CLAMP);
    let alpha = 4.0 * rho * rho / ((1.0 - rho).powi(2) * (1.0 + rho).powi(2));
    ANDREWS_BARTLETT * (alpha * t as f64).cbrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Lag {
    #[default]
    Auto,
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HacMeanTest {
    pub mean: f64,
    /// Long-run variance Ω.
    pub long_run_variance: f64,
    pub hac_se: f64,
    pub lag: usize,
    pub t_stat: f64,
    pub n_obs: usize,
    /// Set when the standard error is zero and the t-statistic is not a ratio.
    pub degenerate: bool,
}

/// Newey-West test of a series mean.
///
/// A zero standard error yields `t = ±∞` (sign of the mean, `0` for a zero
/// mean) with `degenerate` set.
pub fn newey_west_mean(series: &[f64], lag: Lag) -> Result<HacMeanTest, InferenceError> {
    let t = series.len();
    if t < 2 {
        return Err(InferenceError::SeriesTooShort { needed: 2, got: t });
    }
    let lag = match lag {
        Lag::Auto => andrews_lag(series)?,
        Lag::Fixed(l) => l.min(t - 1),
    };
    if series.iter().all(|v| *v == series[0]) {
        let mean = series[0];
        return Ok(HacMeanTest {
            mean,
            long_run_variance: 0.0,
            hac_se: 0.0,
            lag,
            t_stat: if mean == 0.0 { 0.0 } else { f64::INFINITY.copysign(mean) },
            n_obs: t,
            degenerate: true,
        });
    }
    let (mean, d) = demeaned(series);
    let mut omega = autocovariance(&d, 0);
    for j in 1..=lag {
        let w = 1.0 - j as f64 / (lag as f64 + 1.0);
        omega += 2.0 * w * autocovariance(&d, j);
    }
    let hac_se = (omega.max(0.0) / t as f64).sqrt();
    let (t_stat, degenerate) = if hac_se > 0.0 {
        (mean / hac_se, false)
    } else if mean == 0.0 {
        (0.0, true)
    } else {
        (f64::INFINITY.copysign(mean), true)
    };
    Ok(HacMeanTest {
        mean,
        long_run_variance: omega,
        hac_se,
        lag,
        t_stat,
        n_obs: t,
        degenerate,
    })
}

/// Two-sided critical values for the 10%, 5% and 1% levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StarThresholds {
    pub ten: f64,
    pub five: f64,
    pub one: f64,
}

impl Default for StarThresholds {
    fn default() -> Self {
        Self::NORMAL
    }
}

impl StarThresholds {
    pub const NORMAL: StarThresholds = StarThresholds {
        ten: 1.645,
        five: 1.960,
        one: 2.576,
    };

    /// Student-t critical values with `df` degrees of freedom.
    pub fn student_t(df: f64) -> Self {
        let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
        Self {
            ten: dist.inverse_cdf(0.95),
            five: dist.inverse_cdf(0.975),
            one: dist.inverse_cdf(0.995),
        }
    }

    pub fn stars(&self, t: f64) -> &'static str {
        let a = t.abs();
        if a >= self.one {
            "***"
        } else if a >= self.five {
            "**"
        } else if a >= self.ten {
            "*"
        } else {
            ""
        }
    }
}

/// Stars under the normal thresholds (1.645 / 1.960 / 2.576).
pub fn stars(t: f64) -> &'static str {
    StarThresholds::NORMAL.stars(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_fit_recovers_coefficients() {
        let x1: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        let x2: Vec<f64> = (0..50).map(|i| (i as f64 * 0.11).cos()).collect();
        let y: Vec<f64> = x1
            .iter()
            .zip(&x2)
            .map(|(a, b)| 0.5 - 2.0 * a + 3.0 * b)
            .collect();
        let fit = ols(&y, &design_with_intercept(&[&x1, &x2])).unwrap();
        for (got, want) in fit.coefficients.iter().zip([0.5, -2.0, 3.0]) {
            assert!((got - want).abs() < 1e-10);
        }
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_response_gives_zero_slope() {
        // x is antisymmetric around the center, y symmetric: Σ x(y - ȳ) = 0.
        let x: Vec<f64> = (-5..=5).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| v * v).collect();
        let fit = ols(&y, &design_with_intercept(&[&x])).unwrap();
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        assert!(fit.coefficients[1].abs() < 1e-14);
        assert!((fit.coefficients[0] - mean).abs() < 1e-12);
    }

    #[test]
    fn collinear_design_is_rejected() {
        let x1: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let x2: Vec<f64> = x1.iter().map(|v| 2.0 * v).collect();
        let y = vec![1.0; 20];
        assert!(matches!(
            ols(&y, &design_with_intercept(&[&x1, &x2])),
            Err(InferenceError::RankDeficient { .. })
        ));
        let c = vec![3.0; 20];
        assert!(matches!(
            ols(&y, &design_with_intercept(&[&c])),
            Err(InferenceError::RankDeficient { .. })
        ));
    }

    #[test]
    fn white_with_constant_abs_residuals() {
        let x1: Vec<f64> = (0..40).map(|i| (i as f64).sqrt()).collect();
        let x = design_with_intercept(&[&x1]);
        let fit = ols(&x1.iter().map(|v| 1.0 + v).collect::<Vec<_>>(), &x).unwrap();
        let c = 0.3;
        let e: Vec<f64> = (0..40).map(|i| if i % 3 == 0 { -c } else { c }).collect();
        let w = white_covariance(&x, &e, &fit.xtx_inv);
        let expect = &fit.xtx_inv * (c * c);
        assert!((w - expect).abs().max() < 1e-14);
        let zero = white_covariance(&x, &[0.0; 40], &fit.xtx_inv);
        assert_eq!(zero.abs().max(), 0.0);
    }

    #[test]
    fn andrews_example_values() {
        assert!(matches!(
            andrews_lag(&[1.0; 7]),
            Err(InferenceError::SeriesTooShort { .. })
        ));
        assert_eq!(andrews_lag(&[2.0; 10]).unwrap(), 0);
        // Alternating ±1 around zero mean has ρ̂ = -(T-1)/T, clamped to -0.97.
        let alt: Vec<f64> = (0..20).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let rho: f64 = -0.95;
        let s = 1.1447 * (4.0 * rho * rho * 20.0 / ((1.0 - rho).powi(2) * (1.0 + rho).powi(2))).cbrt();
        assert_eq!(andrews_lag(&alt).unwrap(), (s.floor() as usize).min(19));
    }

    #[test]
    fn bandwidth_hand_evaluation() {
        // rho 0.5, T 20: 1.1447 * (20 / 0.5625)^(1/3)
        let s = andrews_bandwidth(0.5, 20);
        assert!((s - 3.7644).abs() < 1e-3, "{s}");
        assert_eq!(s.floor() as usize, 3);
        assert_eq!(andrews_bandwidth(0.0, 250), 0.0);
        assert_eq!(andrews_bandwidth(0.999, 25), andrews_bandwidth(0.97, 25));
    }

    #[test]
    fn stars_thresholds() {
        assert_eq!(stars(4.26), "***");
        assert_eq!(stars(0.0), "");
        assert_eq!(stars(-2.0), "**");
        assert_eq!(stars(1.7), "*");
        assert_eq!(stars(f64::NAN), "");
        let t = StarThresholds::student_t(30.0);
        assert!((t.ten - 1.697261).abs() < 1e-5);
        assert!((t.five - 2.042272).abs() < 1e-5);
        assert!((t.one - 2.749996).abs() < 1e-5);
    }

    #[test]
    fn constant_series_has_zero_se() {
        let r = newey_west_mean(&[0.004; 19], Lag::Auto).unwrap();
        assert_eq!(r.mean, 0.004);
        assert_eq!(r.hac_se, 0.0);
        assert!(r.degenerate);
        assert_eq!(r.t_stat, f64::INFINITY);
    }

    #[test]
    fn fixed_lag_is_capped() {
        let s = [1.0, 2.0, 0.5, 3.0];
        let r = newey_west_mean(&s, Lag::Fixed(10)).unwrap();
        assert_eq!(r.lag, 3);
        assert!(newey_west_mean(&[1.0], Lag::Fixed(0)).is_err());
    }
}
