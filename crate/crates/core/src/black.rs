//! Lognormal (Black) option prices on a forward, and implied volatility.
//!
//! Prices are present values: `call = (F·N(d₁) − K·N(d₂)) / R_f` with
//! `d₁ = (ln(F/K) + ½σ²T) / (σ√T)`, `d₂ = d₁ − σ√T`, where `R_f` is the gross
//! risk-free rate over the option's life.

use statrs::function::erf::erfc;

/// Standard normal CDF, accurate in both tails.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn d1_d2(forward: f64, strike: f64, sigma: f64, t_years: f64) -> (f64, f64) {
    let s = sigma * t_years.sqrt();
    let d1 = ((forward / strike).ln() + 0.5 * s * s) / s;
    (d1, d1 - s)
}

pub fn call(forward: f64, strike: f64, rf_gross: f64, sigma: f64, t_years: f64) -> f64 {
    if sigma * t_years.sqrt() < 1e-12 {
        return (forward - strike).max(0.0) / rf_gross;
    }
    let (d1, d2) = d1_d2(forward, strike, sigma, t_years);
    ((forward * norm_cdf(d1) - strike * norm_cdf(d2)) / rf_gross).max(0.0)
}

pub fn put(forward: f64, strike: f64, rf_gross: f64, sigma: f64, t_years: f64) -> f64 {
    if sigma * t_years.sqrt() < 1e-12 {
        return (strike - forward).max(0.0) / rf_gross;
    }
    let (d1, d2) = d1_d2(forward, strike, sigma, t_years);
    ((strike * norm_cdf(-d2) - forward * norm_cdf(-d1)) / rf_gross).max(0.0)
}

/// Volatility reproducing a call price, by bisection on `[1e-6, 10]`.
/// `None` when the price is outside the no-arbitrage range.
pub fn implied_vol_call(
    price: f64,
    forward: f64,
    strike: f64,
    rf_gross: f64,
    t_years: f64,
) -> Option<f64> {
    let intrinsic = (forward - strike).max(0.0) / rf_gross;
    let upper = forward / rf_gross;
    if !(price > intrinsic && price < upper) {
        return None;
    }
    let (mut lo, mut hi) = (1e-6_f64, 10.0_f64);
    if call(forward, strike, rf_gross, hi, t_years) < price {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if call(forward, strike, rf_gross, mid, t_years) < price {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    Some(0.5 * (lo + hi))
}
