//! Deterministic synthetic panels and option surfaces with recorded truth.
//!
//! Randomness comes from ChaCha20 (`rand_chacha`): stream 0 drives the
//! factors and the attention index, stream `i + 1` drives firm `i`. Streams
//! are independent of thread scheduling, so generation parallelizes without
//! changing a single bit of output.

use std::collections::BTreeMap;
use std::io::Write;

use chrono::{Datelike, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::black;
use crate::market_data::{
    AttentionSeries, DateRange, Direction, Factor, FactorObservation, FactorSeries, Family,
    Naics, ResilienceMeasure, ReturnObservation, ReturnPanel,
};
use crate::svix::OptionSurfaceSlice;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("invalid scenario: {0}")]
    InvalidSpec(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("write failed: {0}")]
    Io(String),
}

impl From<std::io::Error> for SynthError {
    fn from(e: std::io::Error) -> Self {
        SynthError::Io(e.to_string())
    }
}

impl From<csv::Error> for SynthError {
    fn from(e: csv::Error) -> Self {
        SynthError::Io(e.to_string())
    }
}

/// Group drifts added inside a date window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrashSpec {
    pub window: DateRange,
    /// Per-day drift of low-resilience firms.
    pub low_drift: f64,
    /// Per-day drift of high-resilience firms.
    pub high_drift: f64,
    /// Added to the market factor on window days.
    pub market_drift: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub seed: u64,
    pub n_firms: usize,
    pub n_industries: usize,
    pub dates: DateRange,
    /// Daily factor volatilities in `Factor::ALL` order.
    pub factor_vol: [f64; 6],
    /// Daily factor means in `Factor::ALL` order.
    pub factor_mean: [f64; 6],
    pub rf: f64,
    /// Measure value (affected share, percent) per industry; empty means an
    /// even spread over [10, 90].
    pub industry_values: Vec<f64>,
    /// Inclusive beta ranges in `Factor::ALL` order.
    pub beta_range: [(f64, f64); 6],
    pub alpha: f64,
    pub idio_vol: f64,
    pub initial_cap: (f64, f64),
    pub crash: Option<CrashSpec>,
}

fn ymd(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).expect("valid date")
}

/// Feb 24 to Mar 20, 2020.
pub fn event_window() -> DateRange {
    DateRange::new(ymd(2020, 2, 24), ymd(2020, 3, 20))
}

impl ScenarioSpec {
    /// Crash scenario: Low firms drift by −1%/day in the event window.
    pub fn crash(seed: u64) -> Self {
        Self {
            seed,
            n_firms: 200,
            n_industries: 20,
            dates: DateRange::new(ymd(2019, 1, 2), ymd(2020, 3, 31)),
            factor_vol: [0.01, 0.005, 0.005, 0.006, 0.003, 0.003],
            factor_mean: [0.0003, 0.0, 0.0, 0.0, 0.0, 0.0],
            rf: 0.0001,
            industry_values: Vec::new(),
            beta_range: [
                (0.5, 1.5),
                (-0.5, 0.5),
                (-0.5, 0.5),
                (-0.3, 0.3),
                (-0.3, 0.3),
                (-0.3, 0.3),
            ],
            alpha: 0.0,
            idio_vol: 0.01,
            initial_cap: (100.0, 10_000.0),
            crash: Some(CrashSpec {
                window: event_window(),
                low_drift: -0.01,
                high_drift: 0.0,
                market_drift: 0.0,
            }),
        }
    }

    /// Same as [`ScenarioSpec::crash`] with all drifts zero.
    pub fn null(seed: u64) -> Self {
        let mut s = Self::crash(seed);
        if let Some(c) = s.crash.as_mut() {
            c.low_drift = 0.0;
            c.high_drift = 0.0;
        }
        s
    }

    pub fn by_name(name: &str, seed: u64) -> Result<Self, SynthError> {
        match name {
            "crash" => Ok(Self::crash(seed)),
            "null" => Ok(Self::null(seed)),
            other => Err(SynthError::InvalidSpec(format!(
                "unknown scenario {other:?} (expected crash or null)"
            ))),
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidSpec(m.to_string()));
        if self.n_firms < 2 {
            return bad("need at least two firms");
        }
        if self.n_industries == 0 || self.n_industries > 900 {
            return bad("n_industries must be in 1..=900");
        }
        if !self.industry_values.is_empty() && self.industry_values.len() != self.n_industries {
            return bad("industry_values length must equal n_industries");
        }
        if self.dates.is_empty() || trading_days(self.dates).is_empty() {
            return bad("date range holds no weekdays");
        }
        if self.factor_vol.iter().any(|v| !(v.is_finite() && *v >= 0.0))
            || !(self.idio_vol.is_finite() && self.idio_vol >= 0.0)
        {
            return bad("volatilities must be finite and nonnegative");
        }
        if self.beta_range.iter().any(|(lo, hi)| !(lo <= hi)) {
            return bad("beta ranges must satisfy lo <= hi");
        }
        if !(self.initial_cap.0 > 0.0 && self.initial_cap.0 <= self.initial_cap.1) {
            return bad("initial cap range must be positive and ordered");
        }
        Ok(())
    }

    pub fn industry_value(&self, k: usize) -> f64 {
        if !self.industry_values.is_empty() {
            return self.industry_values[k];
        }
        if self.n_industries == 1 {
            50.0
        } else {
            10.0 + 80.0 * k as f64 / (self.n_industries - 1) as f64
        }
    }
}

/// Weekdays in the range; no holiday calendar.
pub fn trading_days(range: DateRange) -> Vec<NaiveDate> {
    range
        .start
        .iter_days()
        .take_while(|d| *d <= range.end)
        .filter(|d| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun))
        .collect()
}

// Three-digit codes used for synthetic industries.
const INDUSTRY_CODES: [&str; 25] = [
    "211", "212", "213", "221", "311", "325", "332", "333", "334", "335", "336", "339", "423",
    "424", "483", "511", "515", "518", "519", "523", "524", "531", "541", "561", "722",
];

pub fn industry_code(k: usize) -> String {
    INDUSTRY_CODES
        .get(k)
        .map(|s| s.to_string())
        .unwrap_or_else(|| format!("{}", 100 + k))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FirmTruth {
    pub firm_id: String,
    pub naics: Naics,
    pub value: f64,
    /// Strictly above the lower median of firm-level values.
    pub low_group: bool,
    pub alpha: f64,
    /// In `Factor::ALL` order.
    pub betas: [f64; 6],
    pub idio_vol: f64,
}

impl FirmTruth {
    pub fn beta(&self, f: Factor) -> f64 {
        let i = Factor::ALL.iter().position(|x| *x == f).expect("known factor");
        self.betas[i]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub seed: u64,
    pub firms: Vec<FirmTruth>,
    pub crash: Option<CrashSpec>,
}

impl Truth {
    /// Planted drift of a firm on a date.
    pub fn drift(&self, firm: &FirmTruth, date: NaiveDate) -> f64 {
        match &self.crash {
            Some(c) if c.window.contains(date) => {
                if firm.low_group {
                    c.low_drift
                } else {
                    c.high_drift
                }
            }
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticPanel {
    pub returns: ReturnPanel,
    pub factors: FactorSeries,
    pub measure: ResilienceMeasure,
    pub attention: AttentionSeries,
    pub truth: Truth,
}

fn normal(rng: &mut ChaCha20Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn stream(seed: u64, id: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

pub fn generate_panel(spec: &ScenarioSpec) -> Result<SyntheticPanel, SynthError> {
    spec.validate()?;
    let dates = trading_days(spec.dates);

    let mut rng = stream(spec.seed, 0);
    let mut factor_obs = Vec::with_capacity(dates.len());
    let mut attention = Vec::with_capacity(dates.len());
    let mut level: f64 = 1.0;
    for &d in &dates {
        let mut f = [0.0; 6];
        for (i, v) in f.iter_mut().enumerate() {
            *v = spec.factor_mean[i] + spec.factor_vol[i] * normal(&mut rng);
        }
        if let Some(c) = &spec.crash {
            if c.window.contains(d) {
                f[0] += c.market_drift;
            }
        }
        factor_obs.push(FactorObservation {
            date: d,
            mktrf: f[0],
            smb: f[1],
            hml: f[2],
            mom: f[3],
            rmw: f[4],
            cma: f[5],
            rf: spec.rf,
        });
        // Attention ramps up through the window and decays afterwards.
        let target = match &spec.crash {
            Some(c) if c.window.contains(d) => 100.0,
            Some(c) if d > c.window.end => 60.0,
            _ => 1.0,
        };
        level += 0.3 * (target - level) + normal(&mut rng);
        level = level.max(0.0);
        attention.push((d, level));
    }

    let mut values: Vec<f64> = (0..spec.n_firms)
        .map(|i| spec.industry_value(i % spec.n_industries))
        .collect();
    let threshold = {
        values.sort_by(f64::total_cmp);
        values[values.len().div_ceil(2) - 1]
    };

    let firms: Vec<(FirmTruth, Vec<ReturnObservation>)> = (0..spec.n_firms)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(spec.seed, i as u64 + 1);
            let k = i % spec.n_industries;
            let value = spec.industry_value(k);
            let mut betas = [0.0; 6];
            for (j, b) in betas.iter_mut().enumerate() {
                let (lo, hi) = spec.beta_range[j];
                *b = if hi > lo { rng.random_range(lo..=hi) } else { lo };
            }
            let (cap_lo, cap_hi) = spec.initial_cap;
            let mut cap = if cap_hi > cap_lo {
                rng.random_range(cap_lo..=cap_hi)
            } else {
                cap_lo
            };
            let truth = FirmTruth {
                firm_id: format!("F{:04}", i + 1),
                naics: Naics::new(&format!("{}110", industry_code(k))).expect("six digits"),
                value,
                low_group: value > threshold,
                alpha: spec.alpha,
                betas,
                idio_vol: spec.idio_vol,
            };
            let mut rows = Vec::with_capacity(factor_obs.len());
            for f in &factor_obs {
                let systematic: f64 = Factor::ALL
                    .iter()
                    .zip(&betas)
                    .map(|(fac, b)| b * f.get(*fac))
                    .sum();
                let drift = match &spec.crash {
                    Some(c) if c.window.contains(f.date) => {
                        if truth.low_group {
                            c.low_drift
                        } else {
                            c.high_drift
                        }
                    }
                    _ => 0.0,
                };
                let excess = truth.alpha + systematic + drift + spec.idio_vol * normal(&mut rng);
                let raw = excess + f.rf;
                cap *= 1.0 + raw;
                rows.push(ReturnObservation {
                    date: f.date,
                    firm_id: truth.firm_id.clone(),
                    // Same arithmetic as ingestion of a raw return.
                    excess_return: raw - f.rf,
                    raw_return: raw,
                    market_cap: cap,
                    naics: truth.naics.clone(),
                });
            }
            (truth, rows)
        })
        .collect();

    let mut truths = Vec::with_capacity(firms.len());
    let mut rows = Vec::with_capacity(firms.len() * dates.len());
    for (t, r) in firms {
        truths.push(t);
        rows.extend(r);
    }
    let returns = ReturnPanel::new(rows).map_err(|e| SynthError::InvalidSpec(e.to_string()))?;
    let factors =
        FactorSeries::new(factor_obs).map_err(|e| SynthError::InvalidSpec(e.to_string()))?;
    let entries: BTreeMap<String, f64> = (0..spec.n_industries)
        .map(|k| (industry_code(k), spec.industry_value(k)))
        .collect();
    let measure = ResilienceMeasure::new(
        Family::KP,
        "affected_share",
        3,
        Direction::HigherValueMeansLowResilience,
        entries,
    )
    .map_err(|e| SynthError::InvalidSpec(e.to_string()))?;
    let attention =
        AttentionSeries::new(attention).map_err(|e| SynthError::InvalidSpec(e.to_string()))?;
    Ok(SyntheticPanel {
        returns,
        factors,
        measure,
        attention,
        truth: Truth {
            seed: spec.seed,
            firms: truths,
            crash: spec.crash,
        },
    })
}

/// Strike grid as multiples of the forward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub n_strikes: usize,
    pub lo_mult: f64,
    pub hi_mult: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            n_strikes: 800,
            lo_mult: 0.01,
            hi_mult: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSurface {
    pub slice: OptionSurfaceSlice,
    /// `e^{σ²T} − 1`.
    pub svix2_truth: f64,
}

/// Lognormal prices with `F = S·e^{rT}` and `R_f = e^{rT}`, `T = days/365`.
/// The out-of-the-money side is priced directly and the other side follows
/// from parity, so parity and nonnegativity hold by construction.
pub fn generate_surface(
    id: &str,
    date: NaiveDate,
    days: u32,
    spot: f64,
    rate: f64,
    sigma: f64,
    grid: GridSpec,
) -> Result<SyntheticSurface, SynthError> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(SynthError::InvalidSpec("sigma must be positive".into()));
    }
    if !(spot > 0.0 && rate.is_finite()) {
        return Err(SynthError::InvalidSpec("spot must be positive".into()));
    }
    if grid.n_strikes < 2 || !(grid.lo_mult > 0.0 && grid.lo_mult < grid.hi_mult) {
        return Err(SynthError::InvalidGrid(format!("{grid:?}")));
    }
    let t = days as f64 / 365.0;
    let rf_gross = (rate * t).exp();
    let forward = spot * rf_gross;
    let step = (grid.hi_mult - grid.lo_mult) / (grid.n_strikes - 1) as f64;
    let strikes: Vec<f64> = (0..grid.n_strikes)
        .map(|i| forward * (grid.lo_mult + step * i as f64))
        .collect();
    let mut calls = Vec::with_capacity(strikes.len());
    let mut puts = Vec::with_capacity(strikes.len());
    for &k in &strikes {
        if k < forward {
            let p = black::put(forward, k, rf_gross, sigma, t);
            puts.push(p);
            calls.push(p + (forward - k) / rf_gross);
        } else {
            let c = black::call(forward, k, rf_gross, sigma, t);
            calls.push(c);
            puts.push(c + (k - forward) / rf_gross);
        }
    }
    Ok(SyntheticSurface {
        slice: OptionSurfaceSlice {
            underlying_id: id.to_string(),
            date,
            maturity_days: days,
            spot,
            forward,
            rf_gross,
            strikes,
            calls,
            puts,
        },
        svix2_truth: (sigma * sigma * t).exp_m1(),
    })
}

pub fn write_truth<W: Write>(truth: &Truth, mut out: W) -> Result<(), SynthError> {
    writeln!(out, "# seed={}", truth.seed)?;
    if let Some(c) = &truth.crash {
        writeln!(
            out,
            "# crash_window={}:{} low_drift={} high_drift={} market_drift={}",
            c.window.start, c.window.end, c.low_drift, c.high_drift, c.market_drift
        )?;
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![
        "firm_id".to_string(),
        "naics".into(),
        "value".into(),
        "group".into(),
        "alpha".into(),
    ];
    header.extend(Factor::ALL.iter().map(|f| format!("beta_{}", f.as_str())));
    header.push("idio_vol".into());
    w.write_record(&header)?;
    for f in &truth.firms {
        let mut rec = vec![
            f.firm_id.clone(),
            f.naics.as_str().to_string(),
            crate::float(f.value),
            if f.low_group { "Low" } else { "High" }.to_string(),
            crate::float(f.alpha),
        ];
        rec.extend(f.betas.iter().map(|b| crate::float(*b)));
        rec.push(crate::float(f.idio_vol));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_attention<W: Write>(attention: &AttentionSeries, out: W) -> Result<(), SynthError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["date", "value"])?;
    for (d, v) in attention.iter() {
        w.write_record([d.to_string(), crate::float(v)])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weekdays_only() {
        let d = trading_days(event_window());
        assert_eq!(d.len(), 20);
        assert!(d.iter().all(|x| x.weekday().number_from_monday() <= 5));
    }

    #[test]
    fn atm_call_equals_put() {
        let s = generate_surface(
            "X",
            ymd(2020, 3, 31),
            365,
            100.0,
            0.0,
            0.3,
            GridSpec {
                n_strikes: 3,
                lo_mult: 0.5,
                hi_mult: 1.5,
            },
        )
        .unwrap();
        assert_eq!(s.slice.strikes[1], s.slice.forward);
        assert!((s.slice.calls[1] - s.slice.puts[1]).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_inputs() {
        let g = GridSpec::default();
        assert!(generate_surface("X", ymd(2020, 1, 2), 30, 100.0, 0.0, 0.0, g).is_err());
        let narrow = GridSpec {
            n_strikes: 1,
            ..g
        };
        assert!(generate_surface("X", ymd(2020, 1, 2), 30, 100.0, 0.0, 0.2, narrow).is_err());
        let mut s = ScenarioSpec::crash(1);
        s.n_firms = 1;
        assert!(generate_panel(&s).is_err());
        assert!(ScenarioSpec::by_name("boom", 1).is_err());
    }

    #[test]
    fn groups_split_at_firm_median() {
        let mut s = ScenarioSpec::crash(3);
        s.n_firms = 40;
        s.dates = DateRange::new(ymd(2020, 1, 2), ymd(2020, 1, 10));
        let p = generate_panel(&s).unwrap();
        let low = p.truth.firms.iter().filter(|f| f.low_group).count();
        assert_eq!(low, 20);
        assert_eq!(p.returns.firms().len(), 40);
    }
}
