use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Source family of an industry resilience measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    /// Face-to-face interaction and physical-proximity shares (3-digit NAICS).
    KP,
    /// Teleworkability shares (2- and 3-digit NAICS).
    DN,
    /// Work at home / at the workplace (4-digit NAICS).
    HLR,
}

impl Family {
    pub fn allowed_levels(self) -> &'static [usize] {
        match self {
            Family::KP => &[3],
            Family::DN => &[2, 3],
            Family::HLR => &[4],
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::KP => "KP",
            Family::DN => "DN",
            Family::HLR => "HLR",
        })
    }
}

impl FromStr for Family {
    type Err = MeasureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "KP" => Ok(Family::KP),
            "DN" => Ok(Family::DN),
            "HLR" => Ok(Family::HLR),
            _ => Err(MeasureError::UnknownFamily(s.to_owned())),
        }
    }
}

/// How a measure's value maps onto resilience.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    HigherValueMeansLowResilience,
    HigherValueMeansHighResilience,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::HigherValueMeansLowResilience => "low_res_if_high",
            Direction::HigherValueMeansHighResilience => "high_res_if_high",
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Direction::HigherValueMeansLowResilience => Direction::HigherValueMeansHighResilience,
            Direction::HigherValueMeansHighResilience => Direction::HigherValueMeansLowResilience,
        }
    }

    /// Known measure names and their fixed direction.
    pub fn for_measure(name: &str) -> Option<Direction> {
        use Direction::*;
        match name {
            "affected_share" | "presence_share" | "teamwork_share" | "customer_share"
            | "communication_share" | "dur_workplace" | "workplace" => {
                Some(HigherValueMeansLowResilience)
            }
            "home" | "dur_home" | "share_home" => Some(HigherValueMeansHighResilience),
            n if n.starts_with("teleworkable_") => Some(HigherValueMeansHighResilience),
            _ => None,
        }
    }
}

impl FromStr for Direction {
    type Err = MeasureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "low_res_if_high" => Ok(Direction::HigherValueMeansLowResilience),
            "high_res_if_high" => Ok(Direction::HigherValueMeansHighResilience),
            other => Err(MeasureError::UnknownDirection(other.to_owned())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MeasureError {
    #[error("unknown measure family {0:?}")]
    UnknownFamily(String),
    #[error("unknown direction {0:?} (expected low_res_if_high or high_res_if_high)")]
    UnknownDirection(String),
    #[error("{family} measures are not published at the {level}-digit NAICS level")]
    LevelNotAllowed { family: Family, level: usize },
    #[error("entry key {key:?} does not have {level} digits")]
    KeyLevelMismatch { key: String, level: usize },
    #[error("measure {name} must use direction {expected}")]
    WrongDirection { name: String, expected: &'static str },
    #[error("measure {0} has no entries")]
    Empty(String),
    #[error("value for industry {0} is not finite")]
    NonFinite(String),
}

/// Industry-level resilience proxy with its NAICS level and direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResilienceMeasure {
    pub family: Family,
    pub name: String,
    pub naics_level: usize,
    pub direction: Direction,
    pub entries: BTreeMap<String, f64>,
}

impl ResilienceMeasure {
    pub fn new(
        family: Family,
        name: impl Into<String>,
        naics_level: usize,
        direction: Direction,
        entries: BTreeMap<String, f64>,
    ) -> Result<Self, MeasureError> {
        let m = Self {
            family,
            name: name.into(),
            naics_level,
            direction,
            entries,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), MeasureError> {
        if !self.family.allowed_levels().contains(&self.naics_level) {
            return Err(MeasureError::LevelNotAllowed {
                family: self.family,
                level: self.naics_level,
            });
        }
        if let Some(expected) = Direction::for_measure(&self.name) {
            if expected != self.direction {
                return Err(MeasureError::WrongDirection {
                    name: self.name.clone(),
                    expected: expected.as_str(),
                });
            }
        }
        for (k, v) in &self.entries {
            if k.len() != self.naics_level || !k.bytes().all(|b| b.is_ascii_digit()) {
                return Err(MeasureError::KeyLevelMismatch {
                    key: k.clone(),
                    level: self.naics_level,
                });
            }
            if !v.is_finite() {
                return Err(MeasureError::NonFinite(k.clone()));
            }
        }
        Ok(())
    }

    /// `FAMILY:name` selector string.
    pub fn selector(&self) -> String {
        format!("{}:{}", self.family, self.name)
    }

    /// Resilience score in percent: `100 - value` when a high value means
    /// low resilience, the value itself otherwise.
    pub fn resilience_score(&self, value: f64) -> f64 {
        match self.direction {
            Direction::HigherValueMeansLowResilience => 100.0 - value,
            Direction::HigherValueMeansHighResilience => value,
        }
    }
}
