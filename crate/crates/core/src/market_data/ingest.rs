//! CSV readers and writers for the input file schemas.
//!
//! | file            | header                                          |
//! |-----------------|-------------------------------------------------|
//! | returns.csv     | `date,firm_id,ret,mktcap,naics` (+ optional `exret`) |
//! | factors.csv     | `date,mktrf,smb,hml,rmw,cma,mom,rf`             |
//! | resilience.csv  | `family,name,naics_level,direction,naics,value` |
//! | attention.csv   | `date,value`                                    |
//!
//! Return rows with bad fields are dropped and reported as [`RowDiagnostic`]s;
//! structural problems (missing columns, dates absent from the factor file,
//! duplicate firm-days) abort ingestion.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use csv::StringRecord;

use super::{
    AttentionError, AttentionSeries, Direction, Factor, FactorObservation, FactorSeries,
    FactorSeriesError, Family, MeasureError, Naics, ResilienceMeasure, ReturnObservation,
    ReturnPanel,
};

const EXCESS_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum RowProblem {
    NonFiniteValue { column: &'static str },
    NonPositiveMarketCap,
    InvalidNaics(String),
    Unparseable { column: &'static str, value: String },
    ExcessReturnMismatch { given: f64, computed: f64 },
    FieldCount { expected: usize, found: usize },
}

impl fmt::Display for RowProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowProblem::NonFiniteValue { column } => write!(f, "non-finite value in {column}"),
            RowProblem::NonPositiveMarketCap => f.write_str("market cap must be positive"),
            RowProblem::InvalidNaics(c) => write!(f, "invalid NAICS code {c:?}"),
            RowProblem::Unparseable { column, value } => {
                write!(f, "cannot parse {column} from {value:?}")
            }
            RowProblem::ExcessReturnMismatch { given, computed } => {
                write!(f, "excess return {given} differs from ret - rf = {computed}")
            }
            RowProblem::FieldCount { expected, found } => {
                write!(f, "expected {expected} fields, found {found}")
            }
        }
    }
}

/// A rejected input row. `row` is the 1-based line number in the file.
#[derive(Debug, Clone, PartialEq)]
pub struct RowDiagnostic {
    pub row: u64,
    pub problem: RowProblem,
}

impl fmt::Display for RowDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.row, self.problem)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("cannot open {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("missing column {0:?}")]
    MissingColumn(&'static str),
    #[error("date {0} is not present in the factor series")]
    UnknownDateInFactors(NaiveDate),
    #[error("duplicate row for firm {firm_id} on {date} (line {row})")]
    DuplicateRow {
        row: u64,
        date: NaiveDate,
        firm_id: String,
    },
    #[error("{0}")]
    BadRow(RowDiagnostic),
    #[error(transparent)]
    Factors(#[from] FactorSeriesError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Attention(#[from] AttentionError),
    #[error("measure {name}: conflicting {what} across rows")]
    InconsistentMeasure { name: String, what: &'static str },
    #[error("measure {name}: industry {naics} listed twice")]
    DuplicateIndustry { name: String, naics: String },
}

impl IngestError {
    pub fn kind(&self) -> &'static str {
        match self {
            IngestError::Io { .. } => "Io",
            IngestError::Csv(_) => "Csv",
            IngestError::MissingColumn(_) => "MissingColumn",
            IngestError::UnknownDateInFactors(_) => "UnknownDateInFactors",
            IngestError::DuplicateRow { .. } => "DuplicateRow",
            IngestError::BadRow(_) => "BadRow",
            IngestError::Factors(_) => "InvalidFactors",
            IngestError::Measure(_) => "InvalidMeasure",
            IngestError::Attention(_) => "InvalidAttention",
            IngestError::InconsistentMeasure { .. } => "InconsistentMeasure",
            IngestError::DuplicateIndustry { .. } => "DuplicateIndustry",
        }
    }
}

/// Accepted panel plus the rows that were rejected.
#[derive(Debug, Clone)]
pub struct IngestedReturns {
    pub panel: ReturnPanel,
    pub diagnostics: Vec<RowDiagnostic>,
}

fn open(path: &Path) -> Result<File, IngestError> {
    File::open(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(r)
}

struct Columns(HashMap<String, usize>);

impl Columns {
    fn new(headers: &StringRecord) -> Self {
        Columns(
            headers
                .iter()
                .enumerate()
                .map(|(i, h)| (h.to_owned(), i))
                .collect(),
        )
    }

    fn require(&self, name: &'static str) -> Result<usize, IngestError> {
        self.0
            .get(name)
            .copied()
            .ok_or(IngestError::MissingColumn(name))
    }

    fn optional(&self, name: &str) -> Option<usize> {
        self.0.get(name).copied()
    }
}

fn field(rec: &StringRecord, idx: usize) -> &str {
    rec.get(idx).unwrap_or("")
}

fn parse_f64(rec: &StringRecord, idx: usize, column: &'static str) -> Result<f64, RowProblem> {
    let raw = field(rec, idx);
    let v: f64 = raw.parse().map_err(|_| RowProblem::Unparseable {
        column,
        value: raw.to_owned(),
    })?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(RowProblem::NonFiniteValue { column })
    }
}

fn parse_date(rec: &StringRecord, idx: usize) -> Result<NaiveDate, RowProblem> {
    let raw = field(rec, idx);
    raw.parse().map_err(|_| RowProblem::Unparseable {
        column: "date",
        value: raw.to_owned(),
    })
}

fn line_of(rec: &StringRecord) -> u64 {
    rec.position().map(|p| p.line()).unwrap_or(0)
}

/// Reads `returns.csv` content and computes excess returns against `factors`.
pub fn read_returns<R: Read>(
    input: R,
    factors: &FactorSeries,
) -> Result<IngestedReturns, IngestError> {
    let mut rdr = reader(input);
    let cols = Columns::new(rdr.headers()?);
    let c_date = cols.require("date")?;
    let c_firm = cols.require("firm_id")?;
    let c_ret = cols.require("ret")?;
    let c_cap = cols.require("mktcap")?;
    let c_naics = cols.require("naics")?;
    let c_exret = cols.optional("exret");
    let width = rdr.headers()?.len();

    let mut obs = Vec::new();
    let mut diagnostics = Vec::new();
    let mut seen: HashMap<(NaiveDate, String), u64> = HashMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let row = line_of(&rec);
        let parsed = (|| {
            if rec.len() != width {
                return Err(RowProblem::FieldCount {
                    expected: width,
                    found: rec.len(),
                });
            }
            let date = parse_date(&rec, c_date)?;
            let raw_return = parse_f64(&rec, c_ret, "ret")?;
            let market_cap = parse_f64(&rec, c_cap, "mktcap")?;
            if market_cap <= 0.0 {
                return Err(RowProblem::NonPositiveMarketCap);
            }
            let naics = Naics::new(field(&rec, c_naics))
                .map_err(|_| RowProblem::InvalidNaics(field(&rec, c_naics).to_owned()))?;
            let given = match c_exret {
                Some(i) => Some(parse_f64(&rec, i, "exret")?),
                None => None,
            };
            Ok((date, raw_return, market_cap, naics, given))
        })();
        let (date, raw_return, market_cap, naics, given) = match parsed {
            Ok(p) => p,
            Err(problem) => {
                diagnostics.push(RowDiagnostic { row, problem });
                continue;
            }
        };
        let rf = factors
            .get(date)
            .ok_or(IngestError::UnknownDateInFactors(date))?
            .rf;
        let excess_return = raw_return - rf;
        if let Some(given) = given {
            if (given - excess_return).abs() > EXCESS_TOLERANCE {
                diagnostics.push(RowDiagnostic {
                    row,
                    problem: RowProblem::ExcessReturnMismatch {
                        given,
                        computed: excess_return,
                    },
                });
                continue;
            }
        }
        let firm_id = field(&rec, c_firm).to_owned();
        if seen.insert((date, firm_id.clone()), row).is_some() {
            return Err(IngestError::DuplicateRow { row, date, firm_id });
        }
        obs.push(ReturnObservation {
            date,
            firm_id,
            excess_return,
            raw_return,
            market_cap,
            naics,
        });
    }
    let panel = ReturnPanel::new(obs).expect("duplicates rejected above");
    Ok(IngestedReturns { panel, diagnostics })
}

pub fn ingest_returns(path: &Path, factors: &FactorSeries) -> Result<IngestedReturns, IngestError> {
    read_returns(open(path)?, factors)
}

/// Writes a panel in the `returns.csv` schema. Floats use the shortest
/// representation that parses back to the same value.
pub fn write_returns<W: Write>(panel: &ReturnPanel, out: W) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["date", "firm_id", "ret", "mktcap", "naics"])?;
    for o in panel.observations() {
        w.write_record([
            o.date.to_string(),
            o.firm_id.clone(),
            crate::float(o.raw_return),
            crate::float(o.market_cap),
            o.naics.to_string(),
        ])?;
    }
    w.flush().map_err(|source| IngestError::Io {
        path: "<writer>".into(),
        source,
    })?;
    Ok(())
}

pub fn read_factors<R: Read>(input: R) -> Result<FactorSeries, IngestError> {
    let mut rdr = reader(input);
    let cols = Columns::new(rdr.headers()?);
    let c_date = cols.require("date")?;
    let idx: Vec<(Factor, usize)> = Factor::ALL
        .iter()
        .map(|&f| Ok((f, cols.require(f.as_str())?)))
        .collect::<Result<_, IngestError>>()?;
    let c_rf = cols.require("rf")?;
    let mut obs = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let row = line_of(&rec);
        let bad = |problem| IngestError::BadRow(RowDiagnostic { row, problem });
        let date = parse_date(&rec, c_date).map_err(bad)?;
        let mut o = FactorObservation {
            date,
            mktrf: 0.0,
            smb: 0.0,
            hml: 0.0,
            rmw: 0.0,
            cma: 0.0,
            mom: 0.0,
            rf: parse_f64(&rec, c_rf, "rf").map_err(bad)?,
        };
        for &(f, i) in &idx {
            let v = parse_f64(&rec, i, f.as_str()).map_err(bad)?;
            match f {
                Factor::MktRf => o.mktrf = v,
                Factor::Smb => o.smb = v,
                Factor::Hml => o.hml = v,
                Factor::Mom => o.mom = v,
                Factor::Rmw => o.rmw = v,
                Factor::Cma => o.cma = v,
            }
        }
        obs.push(o);
    }
    Ok(FactorSeries::new(obs)?)
}

pub fn ingest_factors(path: &Path) -> Result<FactorSeries, IngestError> {
    read_factors(open(path)?)
}

pub fn write_factors<W: Write>(factors: &FactorSeries, out: W) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["date", "mktrf", "smb", "hml", "rmw", "cma", "mom", "rf"])?;
    for o in factors.observations() {
        w.write_record([
            o.date.to_string(),
            crate::float(o.mktrf),
            crate::float(o.smb),
            crate::float(o.hml),
            crate::float(o.rmw),
            crate::float(o.cma),
            crate::float(o.mom),
            crate::float(o.rf),
        ])?;
    }
    w.flush().map_err(|source| IngestError::Io {
        path: "<writer>".into(),
        source,
    })?;
    Ok(())
}

/// Reads every measure in a `resilience.csv` file, grouped by
/// (family, name, naics_level).
pub fn read_resilience<R: Read>(input: R) -> Result<Vec<ResilienceMeasure>, IngestError> {
    let mut rdr = reader(input);
    let cols = Columns::new(rdr.headers()?);
    let c_family = cols.require("family")?;
    let c_name = cols.require("name")?;
    let c_level = cols.require("naics_level")?;
    let c_dir = cols.require("direction")?;
    let c_naics = cols.require("naics")?;
    let c_value = cols.require("value")?;

    type Key = (Family, String, usize);
    let mut groups: BTreeMap<Key, (Direction, BTreeMap<String, f64>)> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let row = line_of(&rec);
        let family: Family = field(&rec, c_family).parse()?;
        let name = field(&rec, c_name).to_owned();
        let level: usize = field(&rec, c_level).parse().map_err(|_| {
            IngestError::BadRow(RowDiagnostic {
                row,
                problem: RowProblem::Unparseable {
                    column: "naics_level",
                    value: field(&rec, c_level).to_owned(),
                },
            })
        })?;
        let direction: Direction = field(&rec, c_dir).parse()?;
        let value = parse_f64(&rec, c_value, "value")
            .map_err(|problem| IngestError::BadRow(RowDiagnostic { row, problem }))?;
        let naics = field(&rec, c_naics).to_owned();
        let entry = groups
            .entry((family, name.clone(), level))
            .or_insert_with(|| (direction, BTreeMap::new()));
        if entry.0 != direction {
            return Err(IngestError::InconsistentMeasure {
                name,
                what: "direction",
            });
        }
        if entry.1.insert(naics.clone(), value).is_some() {
            return Err(IngestError::DuplicateIndustry { name, naics });
        }
    }
    groups
        .into_iter()
        .map(|((family, name, level), (direction, entries))| {
            Ok(ResilienceMeasure::new(family, name, level, direction, entries)?)
        })
        .collect()
}

pub fn ingest_resilience(path: &Path) -> Result<Vec<ResilienceMeasure>, IngestError> {
    read_resilience(open(path)?)
}

pub fn write_resilience<W: Write>(
    measures: &[ResilienceMeasure],
    out: W,
) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["family", "name", "naics_level", "direction", "naics", "value"])?;
    for m in measures {
        for (code, v) in &m.entries {
            w.write_record([
                m.family.to_string(),
                m.name.clone(),
                m.naics_level.to_string(),
                m.direction.as_str().to_owned(),
                code.clone(),
                crate::float(*v),
            ])?;
        }
    }
    w.flush().map_err(|source| IngestError::Io {
        path: "<writer>".into(),
        source,
    })?;
    Ok(())
}

pub fn read_attention<R: Read>(input: R) -> Result<AttentionSeries, IngestError> {
    let mut rdr = reader(input);
    let cols = Columns::new(rdr.headers()?);
    let c_date = cols.require("date")?;
    let c_value = cols.require("value")?;
    let mut points = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let row = line_of(&rec);
        let bad = |problem| IngestError::BadRow(RowDiagnostic { row, problem });
        points.push((
            parse_date(&rec, c_date).map_err(bad)?,
            parse_f64(&rec, c_value, "value").map_err(bad)?,
        ));
    }
    Ok(AttentionSeries::new(points)?)
}

pub fn ingest_attention(path: &Path) -> Result<AttentionSeries, IngestError> {
    read_attention(open(path)?)
}
