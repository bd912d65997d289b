//! Resilience-sorted portfolio analysis of a crash window: factor exposures,
//! median-split value-weighted portfolios, HAC inference, option-implied
//! risk-neutral variances and expected returns, plus synthetic generators.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

pub mod black;
pub mod factor_lab;
pub mod inference;
pub mod market_data;
pub mod pipeline;
pub mod portfolio;
pub mod report;
pub mod svix;
pub mod synthesis;

/// Shortest text that parses back to the same `f64`, with an exponent for
/// very small or large magnitudes.
pub fn float(x: f64) -> String {
    format!("{x:?}")
}

/// Any failure surfaced by a pipeline stage.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Ingest(#[from] market_data::IngestError),
    #[error(transparent)]
    Match(#[from] market_data::MatchError),
    #[error(transparent)]
    FactorLab(#[from] factor_lab::FactorLabError),
    #[error(transparent)]
    Portfolio(#[from] portfolio::PortfolioError),
    #[error(transparent)]
    Inference(#[from] inference::InferenceError),
    #[error(transparent)]
    Svix(#[from] svix::SvixError),
    #[error("{context}: {source}")]
    SvixSlice {
        context: String,
        source: svix::SvixError,
    },
    #[error(transparent)]
    Surface(#[from] svix::SurfaceReadError),
    #[error(transparent)]
    Synth(#[from] synthesis::SynthError),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
}

impl Error {
    /// Stable short identifier for machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Ingest(e) => e.kind(),
            Error::Match(_) => "Match",
            Error::FactorLab(_) => "FactorLab",
            Error::Portfolio(_) => "Portfolio",
            Error::Inference(_) => "Inference",
            Error::Svix(_) | Error::SvixSlice { .. } => "Svix",
            Error::Surface(_) => "Surface",
            Error::Synth(_) => "Synth",
            Error::Config(_) => "Config",
            Error::Io(_) => "Io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
