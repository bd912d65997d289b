use std::collections::BTreeSet;

use chrono::NaiveDate;

use super::{Direction, Naics, NaicsError, ResilienceMeasure, ReturnObservation, ReturnPanel};

/// Keeps only firm-days with `market_cap >= min_cap` (USD millions).
pub fn apply_universe_filter(panel: &ReturnPanel, min_cap: f64) -> ReturnPanel {
    panel.filter(|o| o.market_cap >= min_cap)
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MatchError {
    #[error("firm {firm_id}: NAICS code {code} has fewer than {level} digits")]
    NaicsTooShort {
        firm_id: String,
        code: String,
        level: usize,
    },
    #[error("measure {0} has no entries")]
    EmptyMeasure(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Coverage {
    pub firms_in: usize,
    pub firms_kept: usize,
    pub industries_matched: usize,
    pub rows_kept: usize,
}

/// A return panel annotated with each row's industry code (at the
/// measure's level) and measure value.
#[derive(Debug, Clone)]
pub struct MatchedPanel {
    panel: ReturnPanel,
    industry: Vec<Naics>,
    value: Vec<f64>,
    measure: ResilienceMeasure,
    coverage: Coverage,
}

impl MatchedPanel {
    pub fn panel(&self) -> &ReturnPanel {
        &self.panel
    }

    pub fn measure(&self) -> &ResilienceMeasure {
        &self.measure
    }

    pub fn direction(&self) -> Direction {
        self.measure.direction
    }

    pub fn coverage(&self) -> &Coverage {
        &self.coverage
    }

    /// Rows as `(observation, industry, measure value)`.
    pub fn rows(&self) -> impl Iterator<Item = (&ReturnObservation, &Naics, f64)> {
        self.panel
            .observations()
            .iter()
            .zip(&self.industry)
            .zip(&self.value)
            .map(|((o, n), v)| (o, n, *v))
    }

    /// Rows grouped by date, in date order.
    pub fn by_date(&self) -> Vec<(NaiveDate, Vec<(&ReturnObservation, &Naics, f64)>)> {
        let mut out: Vec<(NaiveDate, Vec<_>)> = Vec::new();
        for row in self.rows() {
            match out.last_mut() {
                Some((d, rows)) if *d == row.0.date => rows.push(row),
                _ => out.push((row.0.date, vec![row])),
            }
        }
        out
    }

    /// Restricts to rows satisfying `keep`, preserving annotations.
    pub fn filter<F>(&self, mut keep: F) -> MatchedPanel
    where
        F: FnMut(&ReturnObservation) -> bool,
    {
        let mut obs = Vec::new();
        let mut industry = Vec::new();
        let mut value = Vec::new();
        for (o, n, v) in self.rows() {
            if keep(o) {
                obs.push(o.clone());
                industry.push(n.clone());
                value.push(v);
            }
        }
        let panel = ReturnPanel::new(obs).expect("subset of a valid panel");
        let coverage = coverage_of(self.coverage.firms_in, &panel, &industry);
        MatchedPanel {
            panel,
            industry,
            value,
            measure: self.measure.clone(),
            coverage,
        }
    }
}

fn coverage_of(firms_in: usize, panel: &ReturnPanel, industry: &[Naics]) -> Coverage {
    Coverage {
        firms_in,
        firms_kept: panel.firms().len(),
        industries_matched: industry.iter().collect::<BTreeSet<_>>().len(),
        rows_kept: panel.len(),
    }
}

/// Assigns each row the value of its NAICS code truncated to the measure's
/// level; rows whose industry is missing from the measure are dropped.
pub fn match_resilience(
    panel: &ReturnPanel,
    measure: &ResilienceMeasure,
) -> Result<MatchedPanel, MatchError> {
    if measure.entries.is_empty() {
        return Err(MatchError::EmptyMeasure(measure.name.clone()));
    }
    let mut obs = Vec::new();
    let mut industry = Vec::new();
    let mut value = Vec::new();
    for o in panel.observations() {
        let code = o.naics.truncate(measure.naics_level).map_err(|e| match e {
            NaicsError::TooShort { code, level } => MatchError::NaicsTooShort {
                firm_id: o.firm_id.clone(),
                code,
                level,
            },
            NaicsError::Invalid(code) => MatchError::NaicsTooShort {
                firm_id: o.firm_id.clone(),
                code,
                level: measure.naics_level,
            },
        })?;
        if let Some(&v) = measure.entries.get(code.as_str()) {
            obs.push(o.clone());
            industry.push(code);
            value.push(v);
        }
    }
    let panel_out = ReturnPanel::new(obs).expect("subset of a valid panel");
    let coverage = coverage_of(panel.firms().len(), &panel_out, &industry);
    Ok(MatchedPanel {
        panel: panel_out,
        industry,
        value,
        measure: measure.clone(),
        coverage,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_data::Family;
    use std::collections::BTreeMap;

    fn obs(firm: &str, naics: &str, cap: f64) -> ReturnObservation {
        ReturnObservation {
            date: NaiveDate::from_ymd_opt(2020, 2, 24).unwrap(),
            firm_id: firm.into(),
            excess_return: 0.01,
            raw_return: 0.01,
            market_cap: cap,
            naics: Naics::new(naics).unwrap(),
        }
    }

    fn kp(entries: &[(&str, f64)]) -> ResilienceMeasure {
        ResilienceMeasure::new(
            Family::KP,
            "affected_share",
            3,
            Direction::HigherValueMeansLowResilience,
            entries.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn cap_threshold_is_inclusive() {
        let p = ReturnPanel::new(vec![obs("A", "334", 9.99), obs("B", "334", 10.0)]).unwrap();
        let f = apply_universe_filter(&p, 10.0);
        assert_eq!(f.firms().into_iter().collect::<Vec<_>>(), vec!["B"]);
        assert_eq!(apply_universe_filter(&p, 0.0), p);
    }

    #[test]
    fn six_digit_code_matches_three_digit_entry() {
        let p = ReturnPanel::new(vec![obs("A", "334413", 50.0), obs("B", "999", 50.0)]).unwrap();
        let m = match_resilience(&p, &kp(&[("334", 13.0)])).unwrap();
        let rows: Vec<_> = m.rows().collect();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].1.as_str(), "334");
        assert_eq!(rows[0].2, 13.0);
        assert_eq!(m.coverage().firms_in, 2);
        assert_eq!(m.coverage().firms_kept, 1);
        assert_eq!(m.coverage().industries_matched, 1);
    }

    #[test]
    fn short_code_is_an_error() {
        let p = ReturnPanel::new(vec![obs("A", "52", 50.0)]).unwrap();
        let err = match_resilience(&p, &kp(&[("334", 13.0)])).unwrap_err();
        assert!(matches!(err, MatchError::NaicsTooShort { level: 3, .. }));
    }

    #[test]
    fn empty_measure_is_rejected() {
        let p = ReturnPanel::new(vec![obs("A", "334", 50.0)]).unwrap();
        let mut m = kp(&[("334", 13.0)]);
        m.entries = BTreeMap::new();
        assert!(matches!(
            match_resilience(&p, &m),
            Err(MatchError::EmptyMeasure(_))
        ));
    }
}
