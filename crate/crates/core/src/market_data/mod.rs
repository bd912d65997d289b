//! Canonical data model for daily returns, factor returns, industry
//! resilience measures and attention indices, plus CSV ingestion and the
//! universe/matching steps that precede portfolio construction.

mod ingest;
mod naics;
mod resilience;
mod universe;

pub use ingest::{
    ingest_attention, ingest_factors, ingest_resilience, ingest_returns, read_attention,
    read_factors, read_resilience, read_returns, write_factors, write_resilience, write_returns,
    IngestError, IngestedReturns, RowDiagnostic, RowProblem,
};
pub use naics::{Naics, NaicsError};
pub use resilience::{Direction, Family, MeasureError, ResilienceMeasure};
pub use universe::{apply_universe_filter, match_resilience, Coverage, MatchError, MatchedPanel};

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

/// The six standard daily factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Factor {
    MktRf,
    Smb,
    Hml,
    Mom,
    Rmw,
    Cma,
}

impl Factor {
    /// Column order used by `exposures.csv`.
    pub const ALL: [Factor; 6] = [
        Factor::MktRf,
        Factor::Smb,
        Factor::Hml,
        Factor::Mom,
        Factor::Rmw,
        Factor::Cma,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Factor::MktRf => "mktrf",
            Factor::Smb => "smb",
            Factor::Hml => "hml",
            Factor::Mom => "mom",
            Factor::Rmw => "rmw",
            Factor::Cma => "cma",
        }
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One day of factor returns, all in decimal fractions per day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorObservation {
    pub date: NaiveDate,
    pub mktrf: f64,
    pub smb: f64,
    pub hml: f64,
    pub rmw: f64,
    pub cma: f64,
    pub mom: f64,
    pub rf: f64,
}

impl FactorObservation {
    pub fn get(&self, factor: Factor) -> f64 {
        match factor {
            Factor::MktRf => self.mktrf,
            Factor::Smb => self.smb,
            Factor::Hml => self.hml,
            Factor::Mom => self.mom,
            Factor::Rmw => self.rmw,
            Factor::Cma => self.cma,
        }
    }

    fn values(&self) -> [f64; 7] {
        [
            self.mktrf, self.smb, self.hml, self.rmw, self.cma, self.mom, self.rf,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FactorSeriesError {
    #[error("factor values on {0} are not all finite")]
    NonFinite(NaiveDate),
    #[error("factor dates not strictly increasing at {0}")]
    NotIncreasing(NaiveDate),
}

/// Daily factor returns with strictly increasing dates.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorSeries {
    obs: Vec<FactorObservation>,
    index: HashMap<NaiveDate, usize>,
}

impl FactorSeries {
    pub fn new(obs: Vec<FactorObservation>) -> Result<Self, FactorSeriesError> {
        let mut index = HashMap::with_capacity(obs.len());
        for (i, o) in obs.iter().enumerate() {
            if !o.values().iter().all(|v| v.is_finite()) {
                return Err(FactorSeriesError::NonFinite(o.date));
            }
            if i > 0 && obs[i - 1].date >= o.date {
                return Err(FactorSeriesError::NotIncreasing(o.date));
            }
            index.insert(o.date, i);
        }
        Ok(Self { obs, index })
    }

    pub fn get(&self, date: NaiveDate) -> Option<&FactorObservation> {
        self.index.get(&date).map(|&i| &self.obs[i])
    }

    pub fn observations(&self) -> &[FactorObservation] {
        &self.obs
    }

    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        self.obs.iter().map(|o| o.date)
    }

    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }
}

/// One firm-day. Returns are decimal fractions per day, caps in USD millions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnObservation {
    pub date: NaiveDate,
    pub firm_id: String,
    pub excess_return: f64,
    pub raw_return: f64,
    pub market_cap: f64,
    pub naics: Naics,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PanelError {
    #[error("duplicate observation for firm {firm_id} on {date}")]
    Duplicate { date: NaiveDate, firm_id: String },
}

/// Date-by-firm panel of daily observations, sorted by (date, firm_id).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReturnPanel {
    obs: Vec<ReturnObservation>,
}

impl ReturnPanel {
    /// Sorts the observations and rejects duplicate (date, firm) keys.
    pub fn new(mut obs: Vec<ReturnObservation>) -> Result<Self, PanelError> {
        obs.sort_by(|a, b| (a.date, &a.firm_id).cmp(&(b.date, &b.firm_id)));
        for w in obs.windows(2) {
            if w[0].date == w[1].date && w[0].firm_id == w[1].firm_id {
                return Err(PanelError::Duplicate {
                    date: w[0].date,
                    firm_id: w[0].firm_id.clone(),
                });
            }
        }
        Ok(Self { obs })
    }

    pub fn observations(&self) -> &[ReturnObservation] {
        &self.obs
    }

    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }

    /// Distinct dates in increasing order.
    pub fn dates(&self) -> Vec<NaiveDate> {
        let mut out: Vec<NaiveDate> = Vec::new();
        for o in &self.obs {
            if out.last() != Some(&o.date) {
                out.push(o.date);
            }
        }
        out
    }

    pub fn firms(&self) -> BTreeSet<&str> {
        self.obs.iter().map(|o| o.firm_id.as_str()).collect()
    }

    /// Observations grouped by date, in date order.
    pub fn by_date(&self) -> Vec<(NaiveDate, &[ReturnObservation])> {
        let mut out = Vec::new();
        let mut start = 0;
        for i in 1..=self.obs.len() {
            if i == self.obs.len() || self.obs[i].date != self.obs[start].date {
                out.push((self.obs[start].date, &self.obs[start..i]));
                start = i;
            }
        }
        out
    }

    /// Observation indices per firm, each list in date order.
    pub fn firm_index(&self) -> BTreeMap<&str, Vec<usize>> {
        let mut out: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, o) in self.obs.iter().enumerate() {
            out.entry(o.firm_id.as_str()).or_default().push(i);
        }
        out
    }

    pub fn filter<F>(&self, mut keep: F) -> ReturnPanel
    where
        F: FnMut(&ReturnObservation) -> bool,
    {
        ReturnPanel {
            obs: self.obs.iter().filter(|o| keep(o)).cloned().collect(),
        }
    }
}

/// Daily attention index (e.g. search-volume), keyed by date.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AttentionSeries {
    values: BTreeMap<NaiveDate, f64>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AttentionError {
    #[error("duplicate attention date {0}")]
    DuplicateDate(NaiveDate),
    #[error("attention value on {0} is negative or not finite")]
    InvalidValue(NaiveDate),
}

impl AttentionSeries {
    pub fn new<I>(points: I) -> Result<Self, AttentionError>
    where
        I: IntoIterator<Item = (NaiveDate, f64)>,
    {
        let mut values = BTreeMap::new();
        for (d, v) in points {
            if !(v.is_finite() && v >= 0.0) {
                return Err(AttentionError::InvalidValue(d));
            }
            if values.insert(d, v).is_some() {
                return Err(AttentionError::DuplicateDate(d));
            }
        }
        Ok(Self { values })
    }

    pub fn get(&self, date: NaiveDate) -> Option<f64> {
        self.values.get(&date).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NaiveDate, f64)> + '_ {
        self.values.iter().map(|(d, v)| (*d, *v))
    }

    /// First differences `a(d) - a(prev)` keyed by the later date.
    pub fn differences(&self) -> BTreeMap<NaiveDate, f64> {
        let pts: Vec<_> = self.iter().collect();
        pts.windows(2).map(|w| (w[1].0, w[1].1 - w[0].1)).collect()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Inclusive calendar-date range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DateRange {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateRange {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Self {
        Self { start, end }
    }

    pub fn contains(&self, d: NaiveDate) -> bool {
        self.start <= d && d <= self.end
    }

    pub fn is_empty(&self) -> bool {
        self.start > self.end
    }

    pub fn calendar_year(year: i32) -> Self {
        Self {
            start: NaiveDate::from_ymd_opt(year, 1, 1).expect("valid year"),
            end: NaiveDate::from_ymd_opt(year, 12, 31).expect("valid year"),
        }
    }
}

impl FromStr for DateRange {
    type Err = String;

    /// Parses `YYYY-MM-DD:YYYY-MM-DD`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s
            .split_once(':')
            .ok_or_else(|| format!("expected START:END, got {s:?}"))?;
        let start = a.trim().parse().map_err(|e| format!("bad date {a:?}: {e}"))?;
        let end = b.trim().parse().map_err(|e| format!("bad date {b:?}: {e}"))?;
        Ok(Self { start, end })
    }
}
