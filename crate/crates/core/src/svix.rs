//! Risk-neutral variance (SVIX²) from option prices and the option-implied
//! expected-return decomposition.
//!
//! ```text
//! SVIX²  = 2 / (R_f S²) · [ ∫₀^F put(K) dK + ∫_F^∞ call(K) dK ]
//! SVIX̄²  = Σᵢ wᵢ SVIXᵢ²
//! (E Rᵢ − R_f) / R_f = SVIX_m² + ½ (SVIXᵢ² − SVIX̄²)
//! ```
//!
//! The integral is a composite trapezoid over the quoted strikes with the
//! forward inserted as a node. Below the lowest strike the put is taken
//! linear down to `put(0) = 0`; above the highest strike calls are priced at
//! the last quote's implied volatility and integrated in closed form. Both
//! tail pieces are reported so their weight in the total can be audited.

use std::collections::BTreeMap;

use chrono::NaiveDate;

use crate::black;
use crate::market_data::MatchedPanel;
use crate::portfolio::{split_at_median, CapBook, PortfolioError, TieRule};

/// Supported option horizons in calendar days.
pub const MATURITIES: [u32; 5] = [30, 91, 182, 365, 730];

const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SvixError {
    #[error("maturity {0} days is not one of 30, 91, 182, 365, 730")]
    UnsupportedMaturity(u32),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("negative or non-finite option price at strike {strike}")]
    NegativePrice { strike: f64 },
    #[error("{kind} prices violate monotonicity at strike {strike}")]
    Arbitrage { strike: f64, kind: &'static str },
    #[error("put-call parity gap {gap:e} at strike {strike}")]
    Parity { strike: f64, gap: f64 },
    #[error("strike grid [{lowest}, {highest}] does not span [0.5F, 2F] with F = {forward}")]
    GridTooNarrow {
        lowest: f64,
        highest: f64,
        forward: f64,
    },
    #[error("inputs disagree on maturity or date")]
    MaturityMismatch,
    #[error("weights must be positive and sum to one (sum = {sum})")]
    WeightMismatch { sum: f64 },
    #[error("no values to aggregate")]
    Empty,
    #[error(transparent)]
    Portfolio(#[from] PortfolioError),
}

/// Calls and puts on one underlying, date and maturity.
#[derive(Debug, Clone, PartialEq)]
pub struct OptionSurfaceSlice {
    pub underlying_id: String,
    pub date: NaiveDate,
    pub maturity_days: u32,
    pub spot: f64,
    pub forward: f64,
    /// Gross risk-free return over the option's life.
    pub rf_gross: f64,
    pub strikes: Vec<f64>,
    pub calls: Vec<f64>,
    pub puts: Vec<f64>,
}

/// Validation tolerances, relative to spot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceTolerance {
    pub monotonicity: f64,
    pub parity: f64,
}

impl Default for SliceTolerance {
    fn default() -> Self {
        Self {
            monotonicity: 1e-8,
            parity: 1e-6,
        }
    }
}

impl OptionSurfaceSlice {
    pub fn years(&self) -> f64 {
        self.maturity_days as f64 / 365.0
    }

    pub fn validate(&self, tol: &SliceTolerance) -> Result<(), SvixError> {
        if !MATURITIES.contains(&self.maturity_days) {
            return Err(SvixError::UnsupportedMaturity(self.maturity_days));
        }
        let n = self.strikes.len();
        if n < 2 || self.calls.len() != n || self.puts.len() != n {
            return Err(SvixError::InvalidGrid(format!(
                "{n} strikes, {} calls, {} puts",
                self.calls.len(),
                self.puts.len()
            )));
        }
        for (name, v) in [
            ("spot", self.spot),
            ("forward", self.forward),
            ("rf_gross", self.rf_gross),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(SvixError::InvalidGrid(format!("{name} must be positive")));
            }
        }
        if !(self.strikes[0] > 0.0) || self.strikes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(SvixError::InvalidGrid(
                "strikes must be positive and strictly increasing".into(),
            ));
        }
        for i in 0..n {
            for p in [self.calls[i], self.puts[i]] {
                if !(p.is_finite() && p >= 0.0) {
                    return Err(SvixError::NegativePrice {
                        strike: self.strikes[i],
                    });
                }
            }
        }
        let mono = tol.monotonicity * self.spot;
        for i in 1..n {
            if self.calls[i] > self.calls[i - 1] + mono {
                return Err(SvixError::Arbitrage {
                    strike: self.strikes[i],
                    kind: "call",
                });
            }
            if self.puts[i] + mono < self.puts[i - 1] {
                return Err(SvixError::Arbitrage {
                    strike: self.strikes[i],
                    kind: "put",
                });
            }
        }
        let parity = tol.parity * self.spot;
        for i in 0..n {
            let k = self.strikes[i];
            let gap = self.calls[i] - self.puts[i] - (self.forward - k) / self.rf_gross;
            if gap.abs() > parity {
                return Err(SvixError::Parity { strike: k, gap });
            }
        }
        Ok(())
    }
}

/// Annualization factor `365 / days`.
pub fn annualization(days: u32) -> f64 {
    365.0 / days as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvixValue {
    pub underlying_id: String,
    pub date: NaiveDate,
    pub maturity_days: u32,
    /// Per-horizon value.
    pub svix2_raw: f64,
    /// `svix2_raw · 365 / maturity_days`.
    pub svix2_annualized: f64,
}

impl SvixValue {
    pub fn new(underlying_id: impl Into<String>, date: NaiveDate, maturity_days: u32, raw: f64) -> Self {
        Self {
            underlying_id: underlying_id.into(),
            date,
            maturity_days,
            svix2_raw: raw,
            svix2_annualized: raw * annualization(maturity_days),
        }
    }
}

/// SVIX² with its quadrature pieces, each already in SVIX² units.
#[derive(Debug, Clone, PartialEq)]
pub struct SvixEstimate {
    pub value: SvixValue,
    pub body: f64,
    pub lower_tail: f64,
    pub upper_tail: f64,
}

impl SvixEstimate {
    /// Fraction of the total contributed by the extrapolated tails.
    pub fn tail_share(&self) -> f64 {
        let total = self.value.svix2_raw;
        if total > 0.0 {
            (self.lower_tail + self.upper_tail) / total
        } else {
            0.0
        }
    }
}

fn interpolate(x0: f64, y0: f64, x1: f64, y1: f64, x: f64) -> f64 {
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

fn trapezoid(nodes: &[(f64, f64)]) -> f64 {
    nodes
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
        .sum()
}

/// SVIX² of one slice; the slice is validated with default tolerances.
pub fn svix_squared(slice: &OptionSurfaceSlice) -> Result<SvixEstimate, SvixError> {
    svix_squared_with(slice, &SliceTolerance::default())
}

pub fn svix_squared_with(
    slice: &OptionSurfaceSlice,
    tol: &SliceTolerance,
) -> Result<SvixEstimate, SvixError> {
    slice.validate(tol)?;
    let f = slice.forward;
    let k = &slice.strikes;
    let n = k.len();
    if k[0] > 0.5 * f || k[n - 1] < 2.0 * f {
        return Err(SvixError::GridTooNarrow {
            lowest: k[0],
            highest: k[n - 1],
            forward: f,
        });
    }

    // Out-of-the-money value at F, where call and put coincide under parity.
    let j = k.partition_point(|&x| x < f);
    let at_forward = if j < n && k[j] == f {
        0.5 * (slice.calls[j] + slice.puts[j])
    } else {
        let c = interpolate(k[j - 1], slice.calls[j - 1], k[j], slice.calls[j], f);
        let p = interpolate(k[j - 1], slice.puts[j - 1], k[j], slice.puts[j], f);
        0.5 * (c + p)
    };

    let mut put_nodes: Vec<(f64, f64)> = (0..j).map(|i| (k[i], slice.puts[i])).collect();
    put_nodes.push((f, at_forward));
    let mut call_nodes = vec![(f, at_forward)];
    let first_call = if j < n && k[j] == f { j + 1 } else { j };
    call_nodes.extend((first_call..n).map(|i| (k[i], slice.calls[i])));

    let body = trapezoid(&put_nodes) + trapezoid(&call_nodes);
    let lower = 0.5 * k[0] * slice.puts[0];
    let upper = upper_tail(slice);

    let scale = 2.0 / (slice.rf_gross * slice.spot * slice.spot);
    let (body, lower, upper) = (scale * body, scale * lower, scale * upper);
    Ok(SvixEstimate {
        value: SvixValue::new(
            slice.underlying_id.clone(),
            slice.date,
            slice.maturity_days,
            body + lower + upper,
        ),
        body,
        lower_tail: lower,
        upper_tail: upper,
    })
}

/// Call integral above the last strike at the last quote's implied vol:
/// `∫_K^∞ call(k) dk = E[(S_T − K)⁺²] / (2 R_f)` in closed form.
fn upper_tail(slice: &OptionSurfaceSlice) -> f64 {
    let n = slice.strikes.len();
    let k = slice.strikes[n - 1];
    let last = slice.calls[n - 1];
    if last <= 0.0 {
        return 0.0;
    }
    let t = slice.years();
    let f = slice.forward;
    let Some(sigma) = black::implied_vol_call(last, f, k, slice.rf_gross, t) else {
        return 0.0;
    };
    let v = sigma * t.sqrt();
    let d1 = ((f / k).ln() + 0.5 * v * v) / v;
    let second_moment = f * f * (v * v).exp() * black::norm_cdf(d1 + v)
        - 2.0 * k * f * black::norm_cdf(d1)
        + k * k * black::norm_cdf(d1 - v);
    (0.5 * second_moment / slice.rf_gross).max(0.0)
}

/// `Σ wᵢ SVIXᵢ²` over values sharing a date and maturity.
pub fn svix_bar(values: &[(SvixValue, f64)]) -> Result<SvixValue, SvixError> {
    let (first, _) = values.first().ok_or(SvixError::Empty)?;
    let mut sum_w = 0.0;
    let mut raw = 0.0;
    for (v, w) in values {
        if v.maturity_days != first.maturity_days || v.date != first.date {
            return Err(SvixError::MaturityMismatch);
        }
        if !(*w > 0.0) {
            return Err(SvixError::WeightMismatch { sum: f64::NAN });
        }
        sum_w += w;
        raw += w * v.svix2_raw;
    }
    if (sum_w - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
        return Err(SvixError::WeightMismatch { sum: sum_w });
    }
    Ok(SvixValue::new("BAR", first.date, first.maturity_days, raw))
}

/// Normalizes positive caps into weights.
pub fn cap_weights(caps: &[f64]) -> Vec<f64> {
    let total: f64 = caps.iter().sum();
    caps.iter().map(|c| c / total).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedReturn {
    pub underlying_id: String,
    pub date: NaiveDate,
    pub maturity_days: u32,
    /// `(E R − R_f) / R_f` over the horizon.
    pub relative_premium: f64,
    /// `E R − R_f` over the horizon.
    pub excess_return: f64,
    /// `relative_premium · 365 / days`.
    pub relative_premium_pa: f64,
}

pub fn expected_return(
    stock: &SvixValue,
    market: &SvixValue,
    bar: &SvixValue,
    rf_gross: f64,
) -> Result<ExpectedReturn, SvixError> {
    for other in [market, bar] {
        if other.maturity_days != stock.maturity_days || other.date != stock.date {
            return Err(SvixError::MaturityMismatch);
        }
    }
    let relative = market.svix2_raw + 0.5 * (stock.svix2_raw - bar.svix2_raw);
    Ok(ExpectedReturn {
        underlying_id: stock.underlying_id.clone(),
        date: stock.date,
        maturity_days: stock.maturity_days,
        relative_premium: relative,
        excess_return: relative * rf_gross,
        relative_premium_pa: relative * annualization(stock.maturity_days),
    })
}

/// Value-weighted SVIX² of the High and Low resilience groups on one date.
#[derive(Debug, Clone, PartialEq)]
pub struct ResilienceIndexPoint {
    pub date: NaiveDate,
    pub maturity_days: u32,
    pub high: f64,
    pub low: f64,
    pub n_high: usize,
    pub n_low: usize,
}

impl ResilienceIndexPoint {
    /// Expected return of low- over high-resilience stocks, per horizon.
    pub fn low_minus_high(&self) -> f64 {
        self.low - self.high
    }

    pub fn low_minus_high_pa(&self) -> f64 {
        self.low_minus_high() * annualization(self.maturity_days)
    }
}

/// Per date and maturity: split the firms that have both an SVIX² value and
/// a measure value at the median, then cap-weight SVIX² within each group.
pub fn resilience_svix_indices(
    values: &[SvixValue],
    matched: &MatchedPanel,
    tie: TieRule,
) -> Result<Vec<ResilienceIndexPoint>, SvixError> {
    let caps = CapBook::new(matched.panel());
    let mut measure: BTreeMap<(NaiveDate, &str), f64> = BTreeMap::new();
    for (o, _, v) in matched.rows() {
        measure.insert((o.date, o.firm_id.as_str()), v);
    }
    let mut groups: BTreeMap<(NaiveDate, u32), Vec<&SvixValue>> = BTreeMap::new();
    for v in values {
        groups.entry((v.date, v.maturity_days)).or_default().push(v);
    }
    let mut out = Vec::new();
    for ((date, days), vals) in groups {
        let mut members = Vec::new();
        let mut svix: BTreeMap<&str, f64> = BTreeMap::new();
        for v in vals {
            if let Some(m) = measure.get(&(date, v.underlying_id.as_str())) {
                members.push((v.underlying_id.as_str(), *m));
                svix.insert(v.underlying_id.as_str(), v.svix2_raw);
            }
        }
        if members.len() < 2 {
            continue;
        }
        let split = split_at_median(date, &members, matched.direction(), tie)?;
        let index = |firms: &[String]| -> Result<f64, SvixError> {
            let caps: Vec<f64> = firms
                .iter()
                .map(|f| {
                    caps.weight_cap(date, f)
                        .map(|c| c.0)
                        .ok_or_else(|| PortfolioError::MissingCap {
                            firm_id: f.clone(),
                            date,
                        })
                })
                .collect::<Result<_, _>>()?;
            let w = cap_weights(&caps);
            Ok(firms.iter().zip(&w).map(|(f, w)| w * svix[f.as_str()]).sum())
        };
        if split.high.is_empty() || split.low.is_empty() {
            continue;
        }
        out.push(ResilienceIndexPoint {
            date,
            maturity_days: days,
            high: index(&split.high)?,
            low: index(&split.low)?,
            n_high: split.high.len(),
            n_low: split.low.len(),
        });
    }
    Ok(out)
}

/// Reads `surface.csv` (`date,underlying_id,days,spot,forward,rf_gross,strike,call,put`),
/// one row per strike, into slices ordered by (date, id, days). Slices are
/// not validated here.
pub fn read_surface<R: std::io::Read>(input: R) -> Result<Vec<OptionSurfaceSlice>, SurfaceReadError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input);
    let headers = rdr.headers()?.clone();
    let col = |name: &'static str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or(SurfaceReadError::MissingColumn(name))
    };
    let idx = [
        col("date")?,
        col("underlying_id")?,
        col("days")?,
        col("spot")?,
        col("forward")?,
        col("rf_gross")?,
        col("strike")?,
        col("call")?,
        col("put")?,
    ];
    let mut slices: BTreeMap<(NaiveDate, String, u32), OptionSurfaceSlice> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let bad = |what: &str| SurfaceReadError::BadRow {
            line,
            message: what.to_string(),
        };
        let get = |i: usize| rec.get(idx[i]).unwrap_or("");
        let num = |i: usize, name: &str| -> Result<f64, SurfaceReadError> {
            get(i)
                .parse::<f64>()
                .map_err(|_| bad(&format!("{name} is not a number")))
        };
        let date: NaiveDate = get(0).parse().map_err(|_| bad("bad date"))?;
        let id = get(1).to_string();
        let days: u32 = get(2).parse().map_err(|_| bad("days is not an integer"))?;
        let (spot, forward, rf) = (num(3, "spot")?, num(4, "forward")?, num(5, "rf_gross")?);
        let slice = slices
            .entry((date, id.clone(), days))
            .or_insert_with(|| OptionSurfaceSlice {
                underlying_id: id,
                date,
                maturity_days: days,
                spot,
                forward,
                rf_gross: rf,
                strikes: Vec::new(),
                calls: Vec::new(),
                puts: Vec::new(),
            });
        if slice.spot != spot || slice.forward != forward || slice.rf_gross != rf {
            return Err(bad("spot, forward or rf_gross differs within a slice"));
        }
        slice.strikes.push(num(6, "strike")?);
        slice.calls.push(num(7, "call")?);
        slice.puts.push(num(8, "put")?);
    }
    Ok(slices.into_values().collect())
}

pub fn write_surface<W: std::io::Write>(
    slices: &[OptionSurfaceSlice],
    out: W,
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "date",
        "underlying_id",
        "days",
        "spot",
        "forward",
        "rf_gross",
        "strike",
        "call",
        "put",
    ])?;
    for s in slices {
        for i in 0..s.strikes.len() {
            w.write_record([
                s.date.to_string(),
                s.underlying_id.clone(),
                s.maturity_days.to_string(),
                crate::float(s.spot),
                crate::float(s.forward),
                crate::float(s.rf_gross),
                crate::float(s.strikes[i]),
                crate::float(s.calls[i]),
                crate::float(s.puts[i]),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, thiserror::Error)]
pub enum SurfaceReadError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("surface file lacks column {0}")]
    MissingColumn(&'static str),
    #[error("surface line {line}: {message}")]
    BadRow { line: u64, message: String },
}

#[cfg(test)]
mod tests {
    use super::*;

    fn date() -> NaiveDate {
        NaiveDate::from_ymd_opt(2020, 3, 31).unwrap()
    }

    fn flat_slice(price: f64) -> OptionSurfaceSlice {
        let strikes: Vec<f64> = (1..=30).map(|i| i as f64 * 10.0).collect();
        OptionSurfaceSlice {
            underlying_id: "X".into(),
            date: date(),
            maturity_days: 365,
            spot: 100.0,
            forward: 100.0,
            rf_gross: 1.0,
            calls: strikes.iter().map(|k| (100.0 - k).max(0.0) + price).collect(),
            puts: strikes.iter().map(|k| (k - 100.0).max(0.0) + price).collect(),
            strikes,
        }
    }

    #[test]
    fn zero_prices_give_zero() {
        let mut s = flat_slice(0.0);
        s.calls = vec![0.0; s.strikes.len()];
        s.puts = vec![0.0; s.strikes.len()];
        s.forward = 100.0;
        // parity cannot hold with all-zero quotes unless F is ignored; relax it.
        let tol = SliceTolerance {
            parity: f64::INFINITY,
            ..SliceTolerance::default()
        };
        let est = svix_squared_with(&s, &tol).unwrap();
        assert_eq!(est.value.svix2_raw, 0.0);
        assert_eq!(est.tail_share(), 0.0);
    }

    #[test]
    fn rejects_bad_slices() {
        let mut s = flat_slice(0.0);
        s.maturity_days = 60;
        assert_eq!(
            svix_squared(&s).unwrap_err(),
            SvixError::UnsupportedMaturity(60)
        );
        let mut s = flat_slice(0.0);
        s.puts[3] = -1.0;
        assert!(matches!(
            svix_squared(&s).unwrap_err(),
            SvixError::NegativePrice { .. }
        ));
        let mut s = flat_slice(0.0);
        s.strikes.truncate(15);
        s.calls.truncate(15);
        s.puts.truncate(15);
        assert!(matches!(
            svix_squared(&s).unwrap_err(),
            SvixError::GridTooNarrow { .. }
        ));
        let mut s = flat_slice(0.0);
        s.calls[20] += 1.0;
        assert!(matches!(
            svix_squared(&s).unwrap_err(),
            SvixError::Arbitrage { kind: "call", .. } | SvixError::Parity { .. }
        ));
        let mut s = flat_slice(0.0);
        s.forward = 101.0;
        assert!(matches!(
            svix_squared(&s).unwrap_err(),
            SvixError::Parity { .. }
        ));
    }

    #[test]
    fn bar_arithmetic() {
        let a = SvixValue::new("A", date(), 365, 0.04);
        let b = SvixValue::new("B", date(), 365, 0.08);
        let bar = svix_bar(&[(a.clone(), 0.25), (b.clone(), 0.75)]).unwrap();
        assert!((bar.svix2_raw - 0.07).abs() < 1e-16);
        assert_eq!(svix_bar(&[(a.clone(), 1.0)]).unwrap().svix2_raw, 0.04);
        assert!(matches!(
            svix_bar(&[(a.clone(), 0.5), (b, 0.4)]),
            Err(SvixError::WeightMismatch { .. })
        ));
        let c = SvixValue::new("C", date(), 30, 0.01);
        assert_eq!(
            svix_bar(&[(a, 0.5), (c, 0.5)]).unwrap_err(),
            SvixError::MaturityMismatch
        );
    }

    #[test]
    fn expected_return_arithmetic() {
        let m = SvixValue::new("M", date(), 365, 0.04);
        let i = SvixValue::new("I", date(), 365, 0.10);
        let bar = SvixValue::new("BAR", date(), 365, 0.06);
        let r = expected_return(&i, &m, &bar, 1.01).unwrap();
        assert!((r.relative_premium - 0.06).abs() < 1e-16);
        assert!((r.excess_return - 0.0606).abs() < 1e-16);
        let same = expected_return(&bar, &m, &bar, 1.0).unwrap();
        assert_eq!(same.relative_premium, 0.04);
        let short = SvixValue::new("M", date(), 30, 0.04);
        assert_eq!(
            expected_return(&i, &short, &bar, 1.0).unwrap_err(),
            SvixError::MaturityMismatch
        );
    }

    #[test]
    fn surface_round_trip() {
        let s = flat_slice(0.5);
        let mut buf = Vec::new();
        write_surface(std::slice::from_ref(&s), &mut buf).unwrap();
        let back = read_surface(buf.as_slice()).unwrap();
        assert_eq!(back, vec![s]);
        let bad = "date,underlying_id,days,spot,forward,rf_gross,strike,call\n";
        assert!(matches!(
            read_surface(bad.as_bytes()),
            Err(SurfaceReadError::MissingColumn("put"))
        ));
    }

    #[test]
    fn annualized_value_scales_raw() {
        let v = SvixValue::new("A", date(), 30, 0.01);
        assert!((v.svix2_annualized - 0.01 * 365.0 / 30.0).abs() < 1e-17);
        let y = SvixValue::new("A", date(), 365, 0.0123);
        assert_eq!(y.svix2_annualized, y.svix2_raw);
    }
}
