//! Daily median-split High/Low resilience portfolios, value-weighted
//! returns, cumulation, industry portfolios and the attention regression.
//!
//! Each day, firms are ranked by a *low-resilience score*: the measure value
//! when a high value means low resilience, its negation otherwise. Firms
//! strictly below the lower median of that score go to High, strictly above
//! to Low, and firms at the median follow the [`TieRule`]. Weights are the
//! previous trading day's market caps.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use chrono::NaiveDate;

use crate::factor_lab::{AdjustedPanel, ModelSpec};
use crate::inference::{self, HacMeanTest, InferenceError, Lag, StarThresholds};
use crate::market_data::{
    AttentionSeries, DateRange, Direction, MatchedPanel, Naics, ReturnPanel,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PortfolioError {
    #[error("fewer than two firms with measure values on {date} ({n_firms})")]
    EmptyUniverse { date: NaiveDate, n_firms: usize },
    #[error("no market cap for firm {firm_id} on {date}")]
    MissingCap { firm_id: String, date: NaiveDate },
    #[error("window {window:?} is not covered by the series ({first:?} to {last:?})")]
    WindowOutOfRange {
        window: DateRange,
        first: Option<NaiveDate>,
        last: Option<NaiveDate>,
    },
    #[error("only {got} overlapping dates, need at least {needed}")]
    InsufficientOverlap { got: usize, needed: usize },
    #[error(transparent)]
    Inference(#[from] InferenceError),
}

/// Which side firms exactly at the median join.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieRule {
    #[default]
    High,
    Low,
}

impl std::str::FromStr for TieRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "high" => Ok(TieRule::High),
            "low" => Ok(TieRule::Low),
            other => Err(format!("unknown tie rule {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    High,
    Low,
    HighMinusLow,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::High => "High",
            Label::Low => "Low",
            Label::HighMinusLow => "HminusL",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Score that increases as resilience decreases.
pub fn low_resilience_score(value: f64, direction: Direction) -> f64 {
    match direction {
        Direction::HigherValueMeansLowResilience => value,
        Direction::HigherValueMeansHighResilience => -value,
    }
}

/// Lower median: the order statistic of rank ⌊(n+1)/2⌋.
pub fn lower_median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(v[v.len().div_ceil(2) - 1])
}

/// High/Low membership on one date.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub date: NaiveDate,
    /// Median of the low-resilience score.
    pub median_score: f64,
    pub high: Vec<String>,
    pub low: Vec<String>,
}

/// Median split of `(firm, measure value)` pairs.
pub fn split_at_median(
    date: NaiveDate,
    members: &[(&str, f64)],
    direction: Direction,
    tie: TieRule,
) -> Result<Assignment, PortfolioError> {
    if members.len() < 2 {
        return Err(PortfolioError::EmptyUniverse {
            date,
            n_firms: members.len(),
        });
    }
    let scores: Vec<f64> = members
        .iter()
        .map(|(_, v)| low_resilience_score(*v, direction))
        .collect();
    let median = lower_median(&scores).expect("non-empty");
    let mut high = Vec::new();
    let mut low = Vec::new();
    for ((firm, _), s) in members.iter().zip(&scores) {
        let to_high = if *s < median {
            true
        } else if *s > median {
            false
        } else {
            tie == TieRule::High
        };
        if to_high {
            high.push(firm.to_string());
        } else {
            low.push(firm.to_string());
        }
    }
    Ok(Assignment {
        date,
        median_score: median,
        high,
        low,
    })
}

/// Median split of all firms present in `matched` on `date`.
pub fn assign_portfolios(
    matched: &MatchedPanel,
    date: NaiveDate,
    tie: TieRule,
) -> Result<Assignment, PortfolioError> {
    let members: Vec<(&str, f64)> = matched
        .rows()
        .filter(|(o, _, _)| o.date == date)
        .map(|(o, _, v)| (o.firm_id.as_str(), v))
        .collect();
    split_at_median(date, &members, matched.direction(), tie)
}

/// Lagged market caps: for each panel date, the previous panel date's caps.
#[derive(Debug, Clone)]
pub struct CapBook {
    dates: Vec<NaiveDate>,
    caps: Vec<HashMap<String, f64>>,
}

impl CapBook {
    pub fn new(panel: &ReturnPanel) -> Self {
        let mut dates = Vec::new();
        let mut caps = Vec::new();
        for (d, rows) in panel.by_date() {
            dates.push(d);
            caps.push(
                rows.iter()
                    .map(|o| (o.firm_id.clone(), o.market_cap))
                    .collect(),
            );
        }
        Self { dates, caps }
    }

    fn index(&self, date: NaiveDate) -> Option<usize> {
        self.dates.binary_search(&date).ok()
    }

    pub fn same_day(&self, date: NaiveDate, firm_id: &str) -> Option<f64> {
        self.caps[self.index(date)?].get(firm_id).copied()
    }

    /// Weighting cap for `firm_id` on `date`: the previous trading date's cap
    /// when available (`false`), else the same-date cap (`true`).
    pub fn weight_cap(&self, date: NaiveDate, firm_id: &str) -> Option<(f64, bool)> {
        let i = match self.index(date) {
            Some(i) => i,
            // Dates outside the panel: use the last cap strictly before.
            None => {
                let j = self.dates.partition_point(|d| *d < date);
                return self.caps.get(j.checked_sub(1)?)?.get(firm_id).map(|c| (*c, false));
            }
        };
        if i > 0 {
            if let Some(c) = self.caps[i - 1].get(firm_id) {
                return Some((*c, false));
            }
        }
        self.caps[i].get(firm_id).map(|c| (*c, true))
    }
}

/// One constituent of a value-weighted portfolio.
#[derive(Debug, Clone, PartialEq)]
pub struct Holding<'a> {
    pub firm_id: &'a str,
    pub cap: Option<f64>,
    pub ret: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedReturn {
    pub ret: f64,
    pub weights: Vec<f64>,
}

/// `Σ wᵢ rᵢ` with `wᵢ = capᵢ / Σ cap`.
pub fn value_weighted_return(
    date: NaiveDate,
    holdings: &[Holding<'_>],
) -> Result<WeightedReturn, PortfolioError> {
    if holdings.is_empty() {
        return Err(PortfolioError::EmptyUniverse { date, n_firms: 0 });
    }
    let mut caps = Vec::with_capacity(holdings.len());
    for h in holdings {
        match h.cap {
            Some(c) if c > 0.0 && c.is_finite() => caps.push(c),
            _ => {
                return Err(PortfolioError::MissingCap {
                    firm_id: h.firm_id.to_owned(),
                    date,
                })
            }
        }
    }
    let total: f64 = caps.iter().sum();
    let weights: Vec<f64> = caps.iter().map(|c| c / total).collect();
    let ret = weights.iter().zip(holdings).map(|(w, h)| w * h.ret).sum();
    Ok(WeightedReturn { ret, weights })
}

/// Daily portfolio returns for one label.
#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioSeries {
    pub label: Label,
    pub dates: Vec<NaiveDate>,
    pub daily_return: Vec<f64>,
    pub constituents_count: Vec<usize>,
    /// Constituents weighted with their same-date cap (no prior-day cap).
    pub same_day_weighted: Vec<usize>,
}

impl PortfolioSeries {
    pub fn new(label: Label) -> Self {
        Self {
            label,
            dates: Vec::new(),
            daily_return: Vec::new(),
            constituents_count: Vec::new(),
            same_day_weighted: Vec::new(),
        }
    }

    /// Daily returns dated inside `window`.
    pub fn window(&self, window: DateRange) -> Vec<(NaiveDate, f64)> {
        self.dates
            .iter()
            .zip(&self.daily_return)
            .filter(|(d, _)| window.contains(**d))
            .map(|(d, r)| (*d, *r))
            .collect()
    }

    pub fn get(&self, date: NaiveDate) -> Option<f64> {
        self.dates
            .binary_search(&date)
            .ok()
            .map(|i| self.daily_return[i])
    }
}

/// Which return a portfolio aggregates.
#[derive(Debug, Clone, Copy)]
pub enum ReturnField<'a> {
    Excess,
    Adjusted(&'a AdjustedPanel),
}

impl ReturnField<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            ReturnField::Excess => "ret",
            ReturnField::Adjusted(a) => a.model.as_str(),
        }
    }
}

/// Weights of one portfolio side on one date.
#[derive(Debug, Clone, PartialEq)]
pub struct DailyBook {
    pub date: NaiveDate,
    pub high: Vec<(String, f64)>,
    pub low: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HighLowSeries {
    pub high: PortfolioSeries,
    pub low: PortfolioSeries,
    pub high_minus_low: PortfolioSeries,
    pub books: Vec<DailyBook>,
    /// Dates skipped because fewer than two firms had the requested return.
    pub skipped: Vec<NaiveDate>,
}

impl HighLowSeries {
    pub fn series(&self, label: Label) -> &PortfolioSeries {
        match label {
            Label::High => &self.high,
            Label::Low => &self.low,
            Label::HighMinusLow => &self.high_minus_low,
        }
    }
}

/// Re-sorts daily and builds value-weighted High, Low and High-minus-Low
/// series over `period` (all dates when `None`).
pub fn build_high_low(
    matched: &MatchedPanel,
    field: ReturnField<'_>,
    period: Option<DateRange>,
    tie: TieRule,
) -> Result<HighLowSeries, PortfolioError> {
    let caps = CapBook::new(matched.panel());
    let mut out = HighLowSeries {
        high: PortfolioSeries::new(Label::High),
        low: PortfolioSeries::new(Label::Low),
        high_minus_low: PortfolioSeries::new(Label::HighMinusLow),
        books: Vec::new(),
        skipped: Vec::new(),
    };
    for (date, rows) in matched.by_date() {
        if period.is_some_and(|p| !p.contains(date)) {
            continue;
        }
        let mut members: Vec<(&str, f64)> = Vec::with_capacity(rows.len());
        let mut returns: HashMap<&str, f64> = HashMap::with_capacity(rows.len());
        for (o, _, v) in &rows {
            let r = match field {
                ReturnField::Excess => Some(o.excess_return),
                ReturnField::Adjusted(a) => a.get(date, &o.firm_id),
            };
            if let Some(r) = r {
                members.push((o.firm_id.as_str(), *v));
                returns.insert(o.firm_id.as_str(), r);
            }
        }
        if members.len() < 2 {
            out.skipped.push(date);
            continue;
        }
        let split = split_at_median(date, &members, matched.direction(), tie)?;
        let side = |firms: &[String], series: &mut PortfolioSeries| {
            let mut same_day = 0;
            let holdings: Vec<Holding> = firms
                .iter()
                .map(|f| {
                    let cap = caps.weight_cap(date, f).map(|(c, sd)| {
                        same_day += sd as usize;
                        c
                    });
                    Holding {
                        firm_id: f,
                        cap,
                        ret: returns[f.as_str()],
                    }
                })
                .collect();
            let w = value_weighted_return(date, &holdings)?;
            series.dates.push(date);
            series.daily_return.push(w.ret);
            series.constituents_count.push(firms.len());
            series.same_day_weighted.push(same_day);
            Ok::<_, PortfolioError>(
                firms
                    .iter()
                    .cloned()
                    .zip(w.weights)
                    .collect::<Vec<(String, f64)>>(),
            )
        };
        let high_book = side(&split.high, &mut out.high)?;
        let low_book = side(&split.low, &mut out.low)?;
        let h = *out.high.daily_return.last().expect("pushed");
        let l = *out.low.daily_return.last().expect("pushed");
        out.high_minus_low.dates.push(date);
        out.high_minus_low.daily_return.push(h - l);
        out.high_minus_low
            .constituents_count
            .push(split.high.len() + split.low.len());
        out.high_minus_low.same_day_weighted.push(
            out.high.same_day_weighted.last().unwrap() + out.low.same_day_weighted.last().unwrap(),
        );
        out.books.push(DailyBook {
            date,
            high: high_book,
            low: low_book,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CumulationMode {
    #[default]
    ArithmeticSum,
    GeometricCompound,
}

impl std::str::FromStr for CumulationMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "arithmetic" | "arithmetic_sum" | "sum" => Ok(CumulationMode::ArithmeticSum),
            "geometric" | "geometric_compound" | "compound" => {
                Ok(CumulationMode::GeometricCompound)
            }
            other => Err(format!("unknown cumulation mode {other:?}")),
        }
    }
}

/// Running cumulative return (decimal fractions).
pub fn cumulative_series(daily: &[f64], mode: CumulationMode) -> Vec<f64> {
    match mode {
        CumulationMode::ArithmeticSum => daily
            .iter()
            .scan(0.0, |acc, r| {
                *acc += r;
                Some(*acc)
            })
            .collect(),
        CumulationMode::GeometricCompound => daily
            .iter()
            .scan(1.0, |acc, r| {
                *acc *= 1.0 + r;
                Some(*acc - 1.0)
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowStats {
    pub label: Label,
    pub window: DateRange,
    pub test: HacMeanTest,
    pub stars: &'static str,
}

/// Mean daily return over `window` with a Newey-West t-statistic.
pub fn event_window_stats(
    series: &PortfolioSeries,
    window: DateRange,
    lag: Lag,
    thresholds: &StarThresholds,
) -> Result<WindowStats, PortfolioError> {
    let first = series.dates.first().copied();
    let last = series.dates.last().copied();
    let covered = matches!((first, last), (Some(f), Some(l)) if f <= window.start && window.end <= l);
    let values: Vec<f64> = series.window(window).into_iter().map(|(_, r)| r).collect();
    if !covered || values.is_empty() {
        return Err(PortfolioError::WindowOutOfRange {
            window,
            first,
            last,
        });
    }
    let test = inference::newey_west_mean(&values, lag)?;
    Ok(WindowStats {
        label: series.label,
        window,
        stars: thresholds.stars(test.t_stat),
        test,
    })
}

/// One industry's value-weighted portfolio over the window.
#[derive(Debug, Clone, PartialEq)]
pub struct IndustryPortfolio {
    pub naics: Naics,
    pub description: String,
    pub n_firms: usize,
    /// Resilience score in percent.
    pub resilience: f64,
    /// Arithmetic cumulative adjusted return in percent, per model.
    pub cumulative: BTreeMap<ModelSpec, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndustryCrossSection {
    pub window: DateRange,
    pub rows: Vec<IndustryPortfolio>,
}

impl IndustryCrossSection {
    /// `(resilience, cumulative return)` pairs for one model.
    pub fn regression_input(&self, model: ModelSpec) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter_map(|r| r.cumulative.get(&model).map(|c| (r.resilience, *c)))
            .collect()
    }
}

/// Value-weighted industry portfolios for the `top_n` industries by firm
/// count (ties broken by code), cumulated arithmetically over `window`.
pub fn industry_cross_section(
    matched: &MatchedPanel,
    adjusted: &[&AdjustedPanel],
    window: DateRange,
    top_n: usize,
    describe: impl Fn(&Naics) -> String,
) -> Result<IndustryCrossSection, PortfolioError> {
    let caps = CapBook::new(matched.panel());
    let mut firms: BTreeMap<&Naics, BTreeSet<&str>> = BTreeMap::new();
    let mut value: BTreeMap<&Naics, f64> = BTreeMap::new();
    for (o, n, v) in matched.rows() {
        if window.contains(o.date) {
            firms.entry(n).or_default().insert(o.firm_id.as_str());
            value.insert(n, v);
        }
    }
    let mut ranked: Vec<(&Naics, usize)> = firms.iter().map(|(n, f)| (*n, f.len())).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.truncate(top_n);

    let by_date = matched.by_date();
    let mut rows = Vec::with_capacity(ranked.len());
    for (naics, n_firms) in ranked {
        let mut cumulative = BTreeMap::new();
        for adj in adjusted {
            let mut total = 0.0;
            for (date, day_rows) in &by_date {
                if !window.contains(*date) {
                    continue;
                }
                let holdings: Vec<Holding> = day_rows
                    .iter()
                    .filter(|(_, n, _)| *n == naics)
                    .filter_map(|(o, _, _)| {
                        adj.get(*date, &o.firm_id).map(|r| Holding {
                            firm_id: &o.firm_id,
                            cap: caps.weight_cap(*date, &o.firm_id).map(|c| c.0),
                            ret: r,
                        })
                    })
                    .collect();
                if holdings.is_empty() {
                    continue;
                }
                total += value_weighted_return(*date, &holdings)?.ret;
            }
            cumulative.insert(adj.model, 100.0 * total);
        }
        rows.push(IndustryPortfolio {
            description: describe(naics),
            naics: naics.clone(),
            n_firms,
            resilience: matched.measure().resilience_score(value[naics]),
            cumulative,
        });
    }
    Ok(IndustryCrossSection { window, rows })
}

/// Cross-sectional OLS of cumulative return on resilience with White SEs.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossSectionFit {
    pub model: ModelSpec,
    pub intercept: f64,
    pub slope: f64,
    /// Change in cumulative return (percent) per 10 resilience points.
    pub slope_per_10: f64,
    pub intercept_t: f64,
    pub slope_t: f64,
    pub slope_stars: &'static str,
    pub r_squared: f64,
    pub n_obs: usize,
}

pub fn industry_regression(
    xs: &IndustryCrossSection,
    model: ModelSpec,
) -> Result<CrossSectionFit, PortfolioError> {
    let pairs = xs.regression_input(model);
    let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let design = inference::design_with_intercept(&[&x]);
    let fit = inference::ols_white(&y, &design)?;
    Ok(CrossSectionFit {
        model,
        intercept: fit.coefficients[0],
        slope: fit.coefficients[1],
        slope_per_10: 10.0 * fit.coefficients[1],
        intercept_t: fit.t_stats[0],
        slope_t: fit.t_stats[1],
        slope_stars: fit.stars[1],
        r_squared: fit.r_squared,
        n_obs: fit.n_obs,
    })
}

pub const MIN_ATTENTION_OVERLAP: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_obs: usize,
}

/// OLS of daily High-minus-Low returns on the first difference of the
/// attention index.
pub fn attention_regression(
    hl: &PortfolioSeries,
    attention: &AttentionSeries,
) -> Result<AttentionFit, PortfolioError> {
    let diffs = attention.differences();
    let (x, y): (Vec<f64>, Vec<f64>) = hl
        .dates
        .iter()
        .zip(&hl.daily_return)
        .filter_map(|(d, r)| diffs.get(d).map(|dx| (*dx, *r)))
        .unzip();
    if x.len() < MIN_ATTENTION_OVERLAP {
        return Err(PortfolioError::InsufficientOverlap {
            got: x.len(),
            needed: MIN_ATTENTION_OVERLAP,
        });
    }
    if x.iter().all(|v| *v == x[0]) {
        return Ok(AttentionFit {
            slope: 0.0,
            intercept: y.iter().sum::<f64>() / y.len() as f64,
            r_squared: 0.0,
            n_obs: x.len(),
        });
    }
    let fit = inference::ols(&y, &inference::design_with_intercept(&[&x]))?;
    Ok(AttentionFit {
        slope: fit.coefficients[1],
        intercept: fit.coefficients[0],
        r_squared: fit.r_squared,
        n_obs: fit.n_obs,
    })
}
