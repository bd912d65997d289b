//! End-to-end stages shared by the command-line tool and the tests.

use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDate};
use rayon::prelude::*;

use crate::factor_lab::{
    self, AdjustedPanel, ExposureEstimates, ModelSpec, DEFAULT_MIN_OBS,
};
use crate::inference::{Lag, StarThresholds};
use crate::market_data::{
    apply_universe_filter, match_resilience, AttentionSeries, DateRange, FactorSeries,
    MatchedPanel, Naics, ResilienceMeasure, ReturnPanel,
};
use crate::portfolio::{
    self, build_high_low, cumulative_series, event_window_stats, CapBook, CrossSectionFit,
    CumulationMode, HighLowSeries, IndustryCrossSection, Label, ReturnField, TieRule,
    WindowStats,
};
use crate::svix::{self, ExpectedReturn, OptionSurfaceSlice, ResilienceIndexPoint, SvixEstimate};
use crate::Error;

fn ymd(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).expect("valid date")
}

/// Identifier of the market-index slice in option inputs.
pub const MARKET_ID: &str = "MARKET";

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub models: Vec<ModelSpec>,
    /// Exposures are estimated here and applied to every later date.
    pub estimation: DateRange,
    pub window: DateRange,
    pub tie: TieRule,
    pub min_obs: usize,
    pub min_cap: f64,
    pub lag: Lag,
    pub thresholds: StarThresholds,
    pub top_n: usize,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            models: vec![
                ModelSpec::Capm,
                ModelSpec::Ff3,
                ModelSpec::Ff4,
                ModelSpec::Ff5,
                ModelSpec::Ff6,
            ],
            estimation: DateRange::calendar_year(2019),
            window: DateRange::new(ymd(2020, 2, 24), ymd(2020, 3, 20)),
            tie: TieRule::High,
            min_obs: DEFAULT_MIN_OBS,
            min_cap: 0.0,
            lag: Lag::Auto,
            thresholds: StarThresholds::NORMAL,
            top_n: 25,
        }
    }
}

impl StudyConfig {
    /// Dates after the estimation window.
    pub fn application_period(&self) -> DateRange {
        DateRange::new(
            self.estimation.end.succ_opt().expect("date in range"),
            NaiveDate::MAX,
        )
    }
}

/// Matched universe plus per-model exposures and adjusted returns.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub matched: MatchedPanel,
    pub exposures: Vec<(ModelSpec, ExposureEstimates)>,
    pub adjusted: Vec<AdjustedPanel>,
}

impl Prepared {
    pub fn adjusted(&self, model: ModelSpec) -> Option<&AdjustedPanel> {
        self.adjusted.iter().find(|a| a.model == model)
    }
}

pub fn prepare(
    returns: &ReturnPanel,
    factors: &FactorSeries,
    measure: &ResilienceMeasure,
    config: &StudyConfig,
) -> Result<Prepared, Error> {
    let filtered = apply_universe_filter(returns, config.min_cap);
    let matched = match_resilience(&filtered, measure)?;
    let period = config.application_period();
    let mut exposures = Vec::with_capacity(config.models.len());
    let mut adjusted = Vec::with_capacity(config.models.len());
    for &model in &config.models {
        let est = factor_lab::estimate_exposures(
            matched.panel(),
            factors,
            model,
            config.estimation,
            config.min_obs,
        )?;
        adjusted.push(factor_lab::adjusted_panel(
            matched.panel(),
            factors,
            model,
            &est,
            period,
        )?);
        exposures.push((model, est));
    }
    Ok(Prepared {
        matched,
        exposures,
        adjusted,
    })
}

/// One column of the event-study table.
#[derive(Debug, Clone)]
pub struct StudyColumn {
    /// `ret` or a model name.
    pub name: &'static str,
    pub series: HighLowSeries,
    /// High, Low, High-minus-Low.
    pub stats: [WindowStats; 3],
}

impl StudyColumn {
    pub fn stat(&self, label: Label) -> &WindowStats {
        match label {
            Label::High => &self.stats[0],
            Label::Low => &self.stats[1],
            Label::HighMinusLow => &self.stats[2],
        }
    }
}

#[derive(Debug, Clone)]
pub struct EventStudy {
    pub window: DateRange,
    pub columns: Vec<StudyColumn>,
}

impl EventStudy {
    pub fn column(&self, name: &str) -> Option<&StudyColumn> {
        self.columns.iter().find(|c| c.name == name)
    }
}

fn study_column(
    prepared: &Prepared,
    field: ReturnField<'_>,
    config: &StudyConfig,
) -> Result<StudyColumn, Error> {
    let series = build_high_low(
        &prepared.matched,
        field,
        Some(config.application_period()),
        config.tie,
    )?;
    let stat = |label| {
        event_window_stats(
            series.series(label),
            config.window,
            config.lag,
            &config.thresholds,
        )
    };
    let stats = [
        stat(Label::High)?,
        stat(Label::Low)?,
        stat(Label::HighMinusLow)?,
    ];
    Ok(StudyColumn {
        name: field.name(),
        series,
        stats,
    })
}

/// Raw excess returns plus one column per configured model.
pub fn event_study(prepared: &Prepared, config: &StudyConfig) -> Result<EventStudy, Error> {
    let mut fields = vec![ReturnField::Excess];
    fields.extend(prepared.adjusted.iter().map(ReturnField::Adjusted));
    let columns = fields
        .into_iter()
        .map(|f| study_column(prepared, f, config))
        .collect::<Result<_, _>>()?;
    Ok(EventStudy {
        window: config.window,
        columns,
    })
}

#[derive(Debug, Clone)]
pub struct IndustryStudy {
    pub cross_section: IndustryCrossSection,
    pub fits: Vec<CrossSectionFit>,
}

/// Industry portfolios and cross-sectional regressions for `models`
/// (each must have been prepared).
pub fn industry_study(
    prepared: &Prepared,
    config: &StudyConfig,
    models: &[ModelSpec],
    describe: impl Fn(&Naics) -> String,
) -> Result<IndustryStudy, Error> {
    let panels: Vec<&AdjustedPanel> = models
        .iter()
        .map(|m| {
            prepared
                .adjusted(*m)
                .ok_or_else(|| Error::Config(format!("model {m} was not estimated")))
        })
        .collect::<Result<_, _>>()?;
    let xs = portfolio::industry_cross_section(
        &prepared.matched,
        &panels,
        config.window,
        config.top_n,
        describe,
    )?;
    let fits = models
        .iter()
        .map(|m| portfolio::industry_regression(&xs, *m))
        .collect::<Result<_, _>>()?;
    Ok(IndustryStudy {
        cross_section: xs,
        fits,
    })
}

/// Cumulative High, Low and High-minus-Low paths.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulativePaths {
    pub name: String,
    pub dates: Vec<NaiveDate>,
    pub high: Vec<f64>,
    pub low: Vec<f64>,
    pub high_minus_low: Vec<f64>,
}

pub fn cumulative_paths(
    name: &str,
    series: &HighLowSeries,
    period: DateRange,
    mode: CumulationMode,
) -> CumulativePaths {
    let pick = |label| -> Vec<f64> {
        let s: Vec<f64> = series
            .series(label)
            .window(period)
            .into_iter()
            .map(|(_, r)| r)
            .collect();
        cumulative_series(&s, mode)
    };
    CumulativePaths {
        name: name.to_string(),
        dates: series
            .high
            .window(period)
            .into_iter()
            .map(|(d, _)| d)
            .collect(),
        high: pick(Label::High),
        low: pick(Label::Low),
        high_minus_low: pick(Label::HighMinusLow),
    }
}

/// Market factor level path (`mktrf + rf`, compounded) and attention.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionPanel {
    pub dates: Vec<NaiveDate>,
    pub market_cumulative: Vec<f64>,
    pub attention: Vec<Option<f64>>,
}

pub fn attention_panel(
    factors: &FactorSeries,
    attention: &AttentionSeries,
    period: DateRange,
) -> AttentionPanel {
    let obs: Vec<_> = factors
        .observations()
        .iter()
        .filter(|o| period.contains(o.date))
        .collect();
    let daily: Vec<f64> = obs.iter().map(|o| o.mktrf + o.rf).collect();
    AttentionPanel {
        dates: obs.iter().map(|o| o.date).collect(),
        market_cumulative: cumulative_series(&daily, CumulationMode::GeometricCompound),
        attention: obs.iter().map(|o| attention.get(o.date)).collect(),
    }
}

/// High/Low series under calendar-year rolling exposures: each year's
/// estimates are applied to the following year.
pub fn rolling_high_low(
    returns: &ReturnPanel,
    factors: &FactorSeries,
    measure: &ResilienceMeasure,
    model: ModelSpec,
    config: &StudyConfig,
) -> Result<HighLowSeries, Error> {
    let filtered = apply_universe_filter(returns, config.min_cap);
    let matched = match_resilience(&filtered, measure)?;
    let years: Vec<i32> = {
        let mut y: Vec<i32> = factors.dates().map(|d| d.year()).collect();
        y.dedup();
        y
    };
    if years.len() < 2 {
        return Err(Error::Config(
            "rolling exposures need at least two calendar years of factors".into(),
        ));
    }
    let rolling = factor_lab::rolling_adjusted_panel(
        matched.panel(),
        factors,
        model,
        &years[..years.len() - 1],
        config.min_obs,
    )?;
    Ok(build_high_low(
        &matched,
        ReturnField::Adjusted(&rolling.adjusted),
        None,
        config.tie,
    )?)
}

/// Attention regression on the event-window High-minus-Low series.
pub fn attention_fit(
    column: &StudyColumn,
    attention: &AttentionSeries,
    window: DateRange,
) -> Result<portfolio::AttentionFit, Error> {
    let hl = column.series.series(Label::HighMinusLow);
    let mut windowed = portfolio::PortfolioSeries::new(Label::HighMinusLow);
    for (i, d) in hl.dates.iter().enumerate() {
        if window.contains(*d) {
            windowed.dates.push(*d);
            windowed.daily_return.push(hl.daily_return[i]);
            windowed.constituents_count.push(hl.constituents_count[i]);
            windowed.same_day_weighted.push(hl.same_day_weighted[i]);
        }
    }
    Ok(portfolio::attention_regression(&windowed, attention)?)
}

/// SVIX² for every slice; order follows the input.
pub fn svix_all(slices: &[OptionSurfaceSlice]) -> Result<Vec<SvixEstimate>, Error> {
    let out: Vec<Result<SvixEstimate, svix::SvixError>> =
        slices.par_iter().map(svix::svix_squared).collect();
    out.into_iter()
        .zip(slices)
        .map(|(r, s)| {
            r.map_err(|e| Error::SvixSlice {
                context: format!("{} {} {}d", s.underlying_id, s.date, s.maturity_days),
                source: e,
            })
        })
        .collect()
}

/// Option-implied expected returns for every non-market name on every
/// (date, maturity) that has a market slice. Average-stock variance uses
/// lagged market-cap weights over the names present that day.
pub fn expected_returns(
    slices: &[OptionSurfaceSlice],
    estimates: &[SvixEstimate],
    returns: &ReturnPanel,
) -> Result<Vec<ExpectedReturn>, Error> {
    let caps = CapBook::new(returns);
    let mut groups: BTreeMap<(NaiveDate, u32), Vec<(&OptionSurfaceSlice, &SvixEstimate)>> =
        BTreeMap::new();
    for (s, e) in slices.iter().zip(estimates) {
        groups.entry((s.date, s.maturity_days)).or_default().push((s, e));
    }
    let mut out = Vec::new();
    for ((date, _), group) in groups {
        let Some((_, market)) = group.iter().find(|(s, _)| s.underlying_id == MARKET_ID) else {
            continue;
        };
        let stocks: Vec<_> = group
            .iter()
            .filter(|(s, _)| s.underlying_id != MARKET_ID)
            .filter_map(|(s, e)| {
                caps.weight_cap(date, &s.underlying_id)
                    .map(|(c, _)| (*s, *e, c))
            })
            .collect();
        if stocks.is_empty() {
            continue;
        }
        let weights = svix::cap_weights(&stocks.iter().map(|x| x.2).collect::<Vec<_>>());
        let weighted: Vec<_> = stocks
            .iter()
            .zip(&weights)
            .map(|((_, e, _), w)| (e.value.clone(), *w))
            .collect();
        let bar = svix::svix_bar(&weighted)?;
        for (s, e, _) in &stocks {
            out.push(svix::expected_return(
                &e.value,
                &market.value,
                &bar,
                s.rf_gross,
            )?);
        }
    }
    Ok(out)
}

/// High/Low SVIX² indices from the single-name slices.
pub fn svix_indices(
    estimates: &[SvixEstimate],
    matched: &MatchedPanel,
    tie: TieRule,
) -> Result<Vec<ResilienceIndexPoint>, Error> {
    let values: Vec<_> = estimates
        .iter()
        .filter(|e| e.value.underlying_id != MARKET_ID)
        .map(|e| e.value.clone())
        .collect();
    Ok(svix::resilience_svix_indices(&values, matched, tie)?)
}
