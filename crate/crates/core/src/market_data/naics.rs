use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A NAICS industry code of 2 to 6 digits.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Naics(String);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NaicsError {
    #[error("invalid NAICS code {0:?}: expected 2-6 digits")]
    Invalid(String),
    #[error("NAICS code {code} is shorter than {level} digits")]
    TooShort { code: String, level: usize },
}

impl Naics {
    pub fn new(code: &str) -> Result<Self, NaicsError> {
        let code = code.trim();
        if (2..=6).contains(&code.len()) && code.bytes().all(|b| b.is_ascii_digit()) {
            Ok(Self(code.to_owned()))
        } else {
            Err(NaicsError::Invalid(code.to_owned()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn digits(&self) -> usize {
        self.0.len()
    }

    /// Parent code at `level` digits (the prefix in the NAICS hierarchy).
    pub fn truncate(&self, level: usize) -> Result<Naics, NaicsError> {
        if self.0.len() < level {
            return Err(NaicsError::TooShort {
                code: self.0.clone(),
                level,
            });
        }
        Naics::new(&self.0[..level])
    }
}

impl fmt::Display for Naics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for Naics {
    type Err = NaicsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Naics::new(s)
    }
}

impl Serialize for Naics {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Naics {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Naics::new(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_two_to_six_digits() {
        assert!(Naics::new("52").is_ok());
        assert!(Naics::new("334413").is_ok());
        assert!(Naics::new("5").is_err());
        assert!(Naics::new("3344130").is_err());
        assert!(Naics::new("33a").is_err());
        assert!(Naics::new("").is_err());
    }

    #[test]
    fn truncation_is_prefix() {
        let n = Naics::new("334413").unwrap();
        assert_eq!(n.truncate(3).unwrap().as_str(), "334");
        assert_eq!(n.truncate(6).unwrap(), n);
        let short = Naics::new("52").unwrap();
        assert!(matches!(
            short.truncate(3),
            Err(NaicsError::TooShort { level: 3, .. })
        ));
    }
}
