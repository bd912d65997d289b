//! Per-firm factor exposures and factor-model-adjusted returns.
//!
//! Exposures come from an OLS of daily excess returns on an intercept and the
//! model's factors over an estimation window. Out of window, the adjusted
//! return is `excess − Σ β_f · f_t`; the intercept is not subtracted.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use rayon::prelude::*;

use crate::inference::{self, InferenceError};
use crate::market_data::{
    DateRange, Factor, FactorObservation, FactorSeries, ReturnObservation, ReturnPanel,
};

/// Minimum number of in-window daily observations for an exposure estimate.
pub const DEFAULT_MIN_OBS: usize = 127;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelSpec {
    Capm,
    Ff3,
    Ff4,
    Ff5,
    Ff6,
}

impl ModelSpec {
    pub const ALL: [ModelSpec; 5] = [
        ModelSpec::Capm,
        ModelSpec::Ff3,
        ModelSpec::Ff4,
        ModelSpec::Ff5,
        ModelSpec::Ff6,
    ];

    pub fn factors(self) -> &'static [Factor] {
        use Factor::*;
        match self {
            ModelSpec::Capm => &[MktRf],
            ModelSpec::Ff3 => &[MktRf, Smb, Hml],
            ModelSpec::Ff4 => &[MktRf, Smb, Hml, Mom],
            ModelSpec::Ff5 => &[MktRf, Smb, Hml, Rmw, Cma],
            ModelSpec::Ff6 => &[MktRf, Smb, Hml, Rmw, Cma, Mom],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelSpec::Capm => "capm",
            ModelSpec::Ff3 => "ff3",
            ModelSpec::Ff4 => "ff4",
            ModelSpec::Ff5 => "ff5",
            ModelSpec::Ff6 => "ff6",
        }
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "capm" => Ok(ModelSpec::Capm),
            "ff3" => Ok(ModelSpec::Ff3),
            "ff4" => Ok(ModelSpec::Ff4),
            "ff5" => Ok(ModelSpec::Ff5),
            "ff6" => Ok(ModelSpec::Ff6),
            other => Err(format!("unknown model {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FactorLabError {
    #[error("firm {firm_id}: factor design is rank deficient over the estimation window")]
    RankDeficientDesign { firm_id: String },
    #[error("estimation window {0:?} is empty")]
    EmptyWindow(DateRange),
    #[error("no factor returns for {0}")]
    MissingFactorDate(NaiveDate),
    #[error("years must be non-empty and consecutive")]
    InvalidYears,
    #[error("factor series has no observations in {0}")]
    FactorCoverage(i32),
    #[error(transparent)]
    Inference(#[from] InferenceError),
}

/// Estimated alpha and betas for one firm under one model.
#[derive(Debug, Clone, PartialEq)]
pub struct ExposureSet {
    pub firm_id: String,
    pub model: ModelSpec,
    pub alpha: f64,
    /// In `model.factors()` order.
    pub betas: Vec<(Factor, f64)>,
    pub alpha_se: f64,
    /// Classical OLS standard errors, aligned with `betas`.
    pub beta_se: Vec<f64>,
    pub n_obs: usize,
    pub window: DateRange,
}

impl ExposureSet {
    pub fn beta(&self, factor: Factor) -> Option<f64> {
        self.betas.iter().find(|(f, _)| *f == factor).map(|(_, b)| *b)
    }
}

/// Exposure estimates plus firms omitted for too few observations.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExposureEstimates {
    pub exposures: Vec<ExposureSet>,
    /// `(firm_id, in-window observation count)`.
    pub omitted: Vec<(String, usize)>,
}

impl ExposureEstimates {
    pub fn by_firm(&self) -> HashMap<&str, &ExposureSet> {
        self.exposures
            .iter()
            .map(|e| (e.firm_id.as_str(), e))
            .collect()
    }
}

fn estimate_one(
    firm_id: &str,
    rows: &[(&ReturnObservation, &FactorObservation)],
    model: ModelSpec,
    window: DateRange,
    min_obs: usize,
) -> Result<Result<ExposureSet, usize>, FactorLabError> {
    let n = rows.len();
    if n < min_obs {
        return Ok(Err(n));
    }
    let fs = model.factors();
    let x = nalgebra::DMatrix::from_fn(n, fs.len() + 1, |i, j| {
        if j == 0 {
            1.0
        } else {
            rows[i].1.get(fs[j - 1])
        }
    });
    let y: Vec<f64> = rows.iter().map(|(o, _)| o.excess_return).collect();
    let fit = inference::ols(&y, &x).map_err(|e| match e {
        InferenceError::RankDeficient { .. } | InferenceError::TooFewObservations { .. } => {
            FactorLabError::RankDeficientDesign {
                firm_id: firm_id.to_owned(),
            }
        }
        other => other.into(),
    })?;
    Ok(Ok(ExposureSet {
        firm_id: firm_id.to_owned(),
        model,
        alpha: fit.coefficients[0],
        betas: fs
            .iter()
            .copied()
            .zip(fit.coefficients[1..].iter().copied())
            .collect(),
        alpha_se: fit.std_errors[0],
        beta_se: fit.std_errors[1..].to_vec(),
        n_obs: n,
        window,
    }))
}

/// OLS exposures for every firm with at least `min_obs` factor-matched
/// observations inside `window`. Results are ordered by firm id and do not
/// depend on the thread count.
pub fn estimate_exposures(
    panel: &ReturnPanel,
    factors: &FactorSeries,
    model: ModelSpec,
    window: DateRange,
    min_obs: usize,
) -> Result<ExposureEstimates, FactorLabError> {
    if window.is_empty() {
        return Err(FactorLabError::EmptyWindow(window));
    }
    let obs = panel.observations();
    let mut per_firm: BTreeMap<&str, Vec<(&ReturnObservation, &FactorObservation)>> =
        BTreeMap::new();
    for o in obs {
        per_firm.entry(o.firm_id.as_str()).or_default();
        if !window.contains(o.date) {
            continue;
        }
        if let Some(f) = factors.get(o.date) {
            per_firm.entry(o.firm_id.as_str()).or_default().push((o, f));
        }
    }
    let firms: Vec<_> = per_firm.into_iter().collect();
    let results: Vec<_> = firms
        .par_iter()
        .map(|(firm, rows)| estimate_one(firm, rows, model, window, min_obs))
        .collect();
    let mut out = ExposureEstimates::default();
    for ((firm, _), r) in firms.iter().zip(results) {
        match r? {
            Ok(e) => out.exposures.push(e),
            Err(n) => out.omitted.push((firm.to_string(), n)),
        }
    }
    Ok(out)
}

/// `excess − Σ β_f · f` for one day.
pub fn adjust(excess_return: f64, exposure: &ExposureSet, factors_on_date: &FactorObservation) -> f64 {
    let loading: f64 = exposure
        .betas
        .iter()
        .map(|(f, b)| b * factors_on_date.get(*f))
        .sum();
    excess_return - loading
}

/// Factor-model-adjusted return of one observation.
pub fn risk_adjusted_return(
    obs: &ReturnObservation,
    exposure: &ExposureSet,
    factors: &FactorSeries,
) -> Result<f64, FactorLabError> {
    let f = factors
        .get(obs.date)
        .ok_or(FactorLabError::MissingFactorDate(obs.date))?;
    Ok(adjust(obs.excess_return, exposure, f))
}

/// Adjusted daily returns keyed by (date, firm) for one model.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjustedPanel {
    pub model: ModelSpec,
    values: BTreeMap<NaiveDate, BTreeMap<String, f64>>,
}

impl AdjustedPanel {
    pub fn new(model: ModelSpec) -> Self {
        Self {
            model,
            values: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, date: NaiveDate, firm_id: &str, value: f64) {
        self.values
            .entry(date)
            .or_default()
            .insert(firm_id.to_owned(), value);
    }

    pub fn get(&self, date: NaiveDate, firm_id: &str) -> Option<f64> {
        self.values.get(&date)?.get(firm_id).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NaiveDate, &str, f64)> {
        self.values
            .iter()
            .flat_map(|(d, m)| m.iter().map(move |(f, v)| (*d, f.as_str(), *v)))
    }

    pub fn len(&self) -> usize {
        self.values.values().map(|m| m.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn extend(&mut self, other: AdjustedPanel) {
        for (d, m) in other.values {
            self.values.entry(d).or_default().extend(m);
        }
    }
}

/// Applies `exposures` to every panel observation dated inside `period`.
/// Firms without an exposure get no adjusted return.
pub fn adjusted_panel(
    panel: &ReturnPanel,
    factors: &FactorSeries,
    model: ModelSpec,
    exposures: &ExposureEstimates,
    period: DateRange,
) -> Result<AdjustedPanel, FactorLabError> {
    let by_firm = exposures.by_firm();
    let mut out = AdjustedPanel::new(model);
    for o in panel.observations() {
        if !period.contains(o.date) {
            continue;
        }
        if let Some(e) = by_firm.get(o.firm_id.as_str()) {
            out.insert(o.date, &o.firm_id, risk_adjusted_return(o, e, factors)?);
        }
    }
    Ok(out)
}

/// Calendar-year rolling adjustment: exposures estimated over year `Y` are
/// applied throughout `Y + 1`, for each `Y` in `years`.
#[derive(Debug, Clone)]
pub struct RollingAdjustment {
    pub adjusted: AdjustedPanel,
    pub estimates: Vec<(i32, ExposureEstimates)>,
}

pub fn rolling_adjusted_panel(
    panel: &ReturnPanel,
    factors: &FactorSeries,
    model: ModelSpec,
    years: &[i32],
    min_obs: usize,
) -> Result<RollingAdjustment, FactorLabError> {
    if years.is_empty() || years.windows(2).any(|w| w[1] != w[0] + 1) {
        return Err(FactorLabError::InvalidYears);
    }
    let covered: std::collections::BTreeSet<i32> = factors.dates().map(|d| d.year()).collect();
    for y in years.iter().copied().chain(std::iter::once(years[years.len() - 1] + 1)) {
        if !covered.contains(&y) {
            return Err(FactorLabError::FactorCoverage(y));
        }
    }
    let mut adjusted = AdjustedPanel::new(model);
    let mut estimates = Vec::with_capacity(years.len());
    for &y in years {
        let est = estimate_exposures(panel, factors, model, DateRange::calendar_year(y), min_obs)?;
        adjusted.extend(adjusted_panel(
            panel,
            factors,
            model,
            &est,
            DateRange::calendar_year(y + 1),
        )?);
        estimates.push((y, est));
    }
    Ok(RollingAdjustment {
        adjusted,
        estimates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_data::Naics;

    fn day(i: usize) -> NaiveDate {
        NaiveDate::from_ymd_opt(2019, 1, 1).unwrap() + chrono::Duration::days(i as i64)
    }

    fn factor_obs(i: usize) -> FactorObservation {
        let t = i as f64;
        FactorObservation {
            date: day(i),
            mktrf: 0.01 * (0.7 * t).sin(),
            smb: 0.005 * (1.3 * t).cos(),
            hml: 0.004 * (0.31 * t + 1.0).sin(),
            rmw: 0.003 * (2.1 * t).sin(),
            cma: 0.003 * (0.53 * t + 0.2).cos(),
            mom: 0.006 * (1.7 * t + 0.4).sin(),
            rf: 0.0001,
        }
    }

    fn ret(firm: &str, i: usize, excess: f64) -> ReturnObservation {
        ReturnObservation {
            date: day(i),
            firm_id: firm.into(),
            excess_return: excess,
            raw_return: excess + 0.0001,
            market_cap: 100.0,
            naics: Naics::new("334").unwrap(),
        }
    }

    #[test]
    fn model_factor_lists() {
        use Factor::*;
        assert_eq!(ModelSpec::Capm.factors(), &[MktRf]);
        assert_eq!(ModelSpec::Ff4.factors(), &[MktRf, Smb, Hml, Mom]);
        assert_eq!(ModelSpec::Ff6.factors().len(), 6);
        assert_eq!("FF5".parse::<ModelSpec>().unwrap(), ModelSpec::Ff5);
    }

    #[test]
    fn noiseless_capm_firm_is_recovered() {
        let fs = FactorSeries::new((0..200).map(factor_obs).collect()).unwrap();
        let obs = (0..200)
            .map(|i| ret("A", i, 0.001 + 1.2 * factor_obs(i).mktrf))
            .collect();
        let panel = ReturnPanel::new(obs).unwrap();
        let w = DateRange::new(day(0), day(199));
        let est = estimate_exposures(&panel, &fs, ModelSpec::Capm, w, 127).unwrap();
        let e = &est.exposures[0];
        assert!((e.alpha - 0.001).abs() < 1e-10);
        assert!((e.beta(Factor::MktRf).unwrap() - 1.2).abs() < 1e-10);
        assert_eq!(e.n_obs, 200);
    }

    #[test]
    fn firms_below_min_obs_are_omitted() {
        let fs = FactorSeries::new((0..200).map(factor_obs).collect()).unwrap();
        let obs = (0..126)
            .map(|i| ret("A", i, 0.5 * factor_obs(i).mktrf))
            .chain((0..127).map(|i| ret("B", i, 0.5 * factor_obs(i).mktrf)))
            .collect();
        let panel = ReturnPanel::new(obs).unwrap();
        let w = DateRange::new(day(0), day(199));
        let est = estimate_exposures(&panel, &fs, ModelSpec::Capm, w, 127).unwrap();
        assert_eq!(est.omitted, vec![("A".to_string(), 126)]);
        assert_eq!(est.exposures.len(), 1);
        assert_eq!(est.exposures[0].firm_id, "B");
    }

    #[test]
    fn degenerate_factor_is_rank_deficient() {
        let fs = FactorSeries::new(
            (0..150)
                .map(|i| FactorObservation {
                    mktrf: 0.0,
                    ..factor_obs(i)
                })
                .collect(),
        )
        .unwrap();
        let panel = ReturnPanel::new((0..150).map(|i| ret("A", i, 0.01)).collect()).unwrap();
        let w = DateRange::new(day(0), day(149));
        assert!(matches!(
            estimate_exposures(&panel, &fs, ModelSpec::Capm, w, 127),
            Err(FactorLabError::RankDeficientDesign { .. })
        ));
    }

    #[test]
    fn adjustment_arithmetic() {
        let f = FactorObservation {
            mktrf: -0.02,
            ..factor_obs(0)
        };
        let e = ExposureSet {
            firm_id: "A".into(),
            model: ModelSpec::Capm,
            alpha: 0.5,
            betas: vec![(Factor::MktRf, 1.0)],
            alpha_se: 0.0,
            beta_se: vec![0.0],
            n_obs: 200,
            window: DateRange::new(day(0), day(1)),
        };
        assert!((adjust(0.01, &e, &f) - 0.03).abs() < 1e-15);
        let zero = ExposureSet {
            betas: vec![(Factor::MktRf, 0.0)],
            ..e
        };
        assert_eq!(adjust(0.0123, &zero, &f), 0.0123);
    }

    #[test]
    fn missing_factor_date_is_reported() {
        let fs = FactorSeries::new(vec![factor_obs(0)]).unwrap();
        let e = ExposureSet {
            firm_id: "A".into(),
            model: ModelSpec::Capm,
            alpha: 0.0,
            betas: vec![(Factor::MktRf, 1.0)],
            alpha_se: 0.0,
            beta_se: vec![0.0],
            n_obs: 200,
            window: DateRange::new(day(0), day(1)),
        };
        assert!(matches!(
            risk_adjusted_return(&ret("A", 5, 0.0), &e, &fs),
            Err(FactorLabError::MissingFactorDate(_))
        ));
    }

    #[test]
    fn rolling_years_must_be_consecutive() {
        let fs = FactorSeries::new((0..10).map(factor_obs).collect()).unwrap();
        let panel = ReturnPanel::default();
        assert_eq!(
            rolling_adjusted_panel(&panel, &fs, ModelSpec::Capm, &[2017, 2019], 127).unwrap_err(),
            FactorLabError::InvalidYears
        );
        assert_eq!(
            rolling_adjusted_panel(&panel, &fs, ModelSpec::Capm, &[2019], 127).unwrap_err(),
            FactorLabError::FactorCoverage(2020)
        );
    }
}
