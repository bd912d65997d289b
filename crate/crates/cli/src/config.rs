//! Flat `key = value` run configuration. Command-line flags win over the file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use resilab::factor_lab::ModelSpec;
use resilab::inference::Lag;
use resilab::market_data::{DateRange, Family, ResilienceMeasure};
use resilab::pipeline::StudyConfig;
use resilab::portfolio::{CumulationMode, TieRule};
use resilab::Error;

/// Keys accepted in a config file (and, with `-` for `_`, as flags).
pub const KEYS: &[&str] = &[
    "returns",
    "factors",
    "resilience",
    "attention",
    "surface",
    "measure",
    "model",
    "from",
    "to",
    "estimation",
    "tie",
    "cumulation",
    "min_obs",
    "min_cap",
    "lag",
    "top_n",
    "maturity",
    "ids",
    "period",
    "scenario",
    "out",
    "seed",
];

const PATH_KEYS: &[&str] = &["returns", "factors", "resilience", "attention", "surface"];

/// Parses config text. Blank lines and `#` comments are skipped.
pub fn parse(text: &str) -> Result<BTreeMap<String, String>, Error> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("config line {}: expected key = value", i + 1)))?;
        let key = k.trim().replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            return Err(Error::Config(format!(
                "config line {}: unknown key {key:?}",
                i + 1
            )));
        }
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(Error::Config(format!(
                "config line {}: duplicate key {key:?}",
                i + 1
            )));
        }
    }
    Ok(out)
}

/// Resolved settings: file values overlaid by flags.
#[derive(Debug, Clone, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
    base: PathBuf,
}

impl Settings {
    /// Loads `path` (if any); relative input paths resolve against its directory.
    pub fn load(path: Option<&Path>) -> Result<Self, Error> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let values = parse(&text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let s = Self { values, base };
        for k in PATH_KEYS {
            if s.values.contains_key(*k) {
                s.path(k)?;
            }
        }
        Ok(s)
    }

    pub fn set(&mut self, key: &str, value: Option<String>) {
        if let Some(v) = value {
            self.values.insert(key.to_string(), v);
            if PATH_KEYS.contains(&key) {
                self.values.insert(format!("{key}.cli"), String::new());
            }
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn resolve(&self, key: &str, raw: &str) -> PathBuf {
        let p = PathBuf::from(raw);
        if p.is_relative() && !self.values.contains_key(&format!("{key}.cli")) {
            self.base.join(p)
        } else {
            p
        }
    }

    /// Optional input path that must exist when given.
    pub fn path(&self, key: &str) -> Result<Option<PathBuf>, Error> {
        let Some(raw) = self.get(key) else {
            return Ok(None);
        };
        let p = self.resolve(key, raw);
        if !p.is_file() {
            return Err(Error::Config(format!("{key}: file {} does not exist", p.display())));
        }
        Ok(Some(p))
    }

    pub fn require_path(&self, key: &str) -> Result<PathBuf, Error> {
        self.path(key)?
            .ok_or_else(|| Error::Config(format!("missing required input --{key}")))
    }

    fn parse_value<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, Error>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| Error::Config(format!("{key}: cannot parse {v:?}: {e}")))
            })
            .transpose()
    }

    pub fn models(&self, default: &[ModelSpec]) -> Result<Vec<ModelSpec>, Error> {
        match self.get("model") {
            None => Ok(default.to_vec()),
            Some(list) => list
                .split(',')
                .map(|m| {
                    m.trim()
                        .parse::<ModelSpec>()
                        .map_err(|e| Error::Config(format!("model: {e}")))
                })
                .collect(),
        }
    }

    pub fn maturities(&self, default: &[u32]) -> Result<Vec<u32>, Error> {
        match self.get("maturity") {
            None => Ok(default.to_vec()),
            Some(list) => list
                .split(',')
                .map(|m| {
                    m.trim()
                        .parse::<u32>()
                        .map_err(|e| Error::Config(format!("maturity {m:?}: {e}")))
                })
                .collect(),
        }
    }

    pub fn ids(&self) -> Option<Vec<String>> {
        self.get("ids")
            .map(|l| l.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect())
    }

    pub fn cumulation(&self, default: CumulationMode) -> Result<CumulationMode, Error> {
        Ok(self.parse_value("cumulation")?.unwrap_or(default))
    }

    pub fn period(&self) -> Result<Option<DateRange>, Error> {
        self.parse_value("period")
    }

    pub fn top_n(&self) -> Result<usize, Error> {
        Ok(self.parse_value("top_n")?.unwrap_or(25))
    }

    /// Study parameters; `models` falls back to `default_models`.
    pub fn study(&self, default_models: &[ModelSpec]) -> Result<StudyConfig, Error> {
        let mut c = StudyConfig {
            models: self.models(default_models)?,
            ..StudyConfig::default()
        };
        if let Some(d) = self.parse_value("from")? {
            c.window.start = d;
        }
        if let Some(d) = self.parse_value("to")? {
            c.window.end = d;
        }
        if c.window.is_empty() {
            return Err(Error::Config("event window is empty (from > to)".into()));
        }
        if let Some(r) = self.parse_value::<DateRange>("estimation")? {
            if r.is_empty() {
                return Err(Error::Config("estimation window is empty".into()));
            }
            c.estimation = r;
        }
        if c.estimation.end >= c.window.start {
            return Err(Error::Config(
                "estimation window must end before the event window starts".into(),
            ));
        }
        if let Some(t) = self.parse_value::<TieRule>("tie")? {
            c.tie = t;
        }
        if let Some(n) = self.parse_value("min_obs")? {
            c.min_obs = n;
        }
        if let Some(m) = self.parse_value::<f64>("min_cap")? {
            c.min_cap = m;
        }
        if let Some(l) = self.get("lag") {
            c.lag = if l == "auto" {
                Lag::Auto
            } else {
                Lag::Fixed(
                    l.parse()
                        .map_err(|_| Error::Config(format!("lag: expected auto or an integer, got {l:?}")))?,
                )
            };
        }
        c.top_n = self.top_n()?;
        Ok(c)
    }
}

/// Picks the measure named by `FAMILY:name[:level]`.
pub fn select_measure(
    measures: &[ResilienceMeasure],
    selector: &str,
) -> Result<ResilienceMeasure, Error> {
    let parts: Vec<&str> = selector.split(':').map(str::trim).collect();
    let (family, name, level) = match parts.as_slice() {
        [f, n] => (*f, *n, None),
        [f, n, l] => (
            *f,
            *n,
            Some(
                l.parse::<usize>()
                    .map_err(|_| Error::Config(format!("measure level {l:?} is not a number")))?,
            ),
        ),
        _ => {
            return Err(Error::Config(format!(
                "measure selector {selector:?} must be FAMILY:name or FAMILY:name:level"
            )))
        }
    };
    let family: Family = family
        .parse()
        .map_err(|e| Error::Config(format!("measure: {e}")))?;
    let hits: Vec<&ResilienceMeasure> = measures
        .iter()
        .filter(|m| m.family == family && m.name == name)
        .filter(|m| level.is_none_or(|l| m.naics_level == l))
        .collect();
    match hits.as_slice() {
        [one] => Ok((*one).clone()),
        [] => Err(Error::Config(format!("measure {selector} not found in resilience input"))),
        _ => Err(Error::Config(format!(
            "measure {selector} exists at several NAICS levels; append :level"
        ))),
    }
}
