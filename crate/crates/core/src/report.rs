//! Markdown tables, CSV twins and tidy figure-data files.
//!
//! Table cells are percent with two decimals; CSV files carry full
//! precision (shortest round-trip representation).

use std::fmt::Write as _;
use std::io::Write;

use chrono::NaiveDate;

use crate::factor_lab::{ExposureEstimates, ModelSpec};
use crate::market_data::{DateRange, Factor, Naics};
use crate::pipeline::{AttentionPanel, CumulativePaths, EventStudy, IndustryStudy};
use crate::portfolio::{HighLowSeries, Label};
use crate::svix::{ExpectedReturn, ResilienceIndexPoint, SvixEstimate};
use crate::Error;

/// Fixed-decimal rendering that never prints `-0.00`.
pub fn fixed(x: f64, decimals: usize) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    let s = format!("{x:.decimals$}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

fn row_label(label: Label) -> &'static str {
    match label {
        Label::High => "High resilience",
        Label::Low => "Low resilience",
        Label::HighMinusLow => "High-minus-Low",
    }
}

const ROWS: [Label; 3] = [Label::High, Label::Low, Label::HighMinusLow];

/// Mean daily returns (percent) with stars, and bracketed t-statistics.
pub fn table2_markdown(study: &EventStudy) -> String {
    let mut s = String::new();
    s.push_str("| ");
    for c in &study.columns {
        let _ = write!(s, " | {}", c.name);
    }
    s.push_str(" |\n|:--");
    for _ in &study.columns {
        s.push_str("|--:");
    }
    s.push_str("|\n");
    for label in ROWS {
        let _ = write!(s, "| {}", row_label(label));
        for c in &study.columns {
            let st = c.stat(label);
            let _ = write!(s, " | {}{}", fixed(100.0 * st.test.mean, 2), st.stars);
        }
        s.push_str(" |\n| ");
        for c in &study.columns {
            let _ = write!(s, " | [{}]", fixed(c.stat(label).test.t_stat, 2));
        }
        s.push_str(" |\n");
    }
    s.push_str("\nBrackets: Newey-West t-statistics, Andrews lag chosen separately for each series. Stars: 10%, 5%, 1% (two-sided).\n");
    s
}

pub fn table2_csv<W: Write>(study: &EventStudy, out: W) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "row", "column", "mean", "t_stat", "stars", "hac_se", "lag", "n_obs",
    ])?;
    for label in ROWS {
        for c in &study.columns {
            let t = &c.stat(label).test;
            w.write_record([
                label.as_str().to_string(),
                c.name.to_string(),
                crate::float(t.mean),
                crate::float(t.t_stat),
                c.stat(label).stars.to_string(),
                crate::float(t.hac_se),
                t.lag.to_string(),
                t.n_obs.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `date,label,ret,n_constituents`, labels in High, Low, HminusL order.
pub fn portfolio_series_csv<W: Write>(series: &HighLowSeries, out: W) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["date", "label", "ret", "n_constituents"])?;
    for i in 0..series.high.dates.len() {
        for label in ROWS {
            let s = series.series(label);
            w.write_record([
                s.dates[i].to_string(),
                label.as_str().to_string(),
                crate::float(s.daily_return[i]),
                s.constituents_count[i].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

const DESCRIPTIONS: [(&str, &str); 25] = [
    ("211", "Oil and gas extraction"),
    ("212", "Mining, except oil and gas"),
    ("213", "Support activities for mining"),
    ("221", "Utilities"),
    ("311", "Food manufacturing"),
    ("325", "Chemicals"),
    ("332", "Fabricated metal products"),
    ("333", "Machinery"),
    ("334", "Computer and electronic products"),
    ("335", "Electrical equipment and appliances"),
    ("336", "Transportation equipment"),
    ("339", "Miscellaneous durable goods manufacturing"),
    ("423", "Wholesale trade: Durable goods"),
    ("424", "Wholesale trade: Nondurable goods"),
    ("483", "Water transportation"),
    ("511", "Publishing industries, except Internet"),
    ("515", "Broadcasting, except Internet"),
    ("518", "Data processing, hosting and related services"),
    ("519", "Other information services"),
    (
        "523",
        "Securities, commodity contracts, investments, and funds and trusts",
    ),
    ("524", "Insurance carriers and related activities"),
    ("531", "Real estate"),
    ("541", "Professional and technical services"),
    ("561", "Administrative and support services"),
    ("722", "Food services and drinking places"),
];

/// Short industry title for common three-digit codes, empty otherwise.
pub fn naics_description(code: &Naics) -> String {
    DESCRIPTIONS
        .iter()
        .find(|(c, _)| *c == code.as_str())
        .map(|(_, d)| d.to_string())
        .unwrap_or_default()
}

fn resilience_cell(x: f64) -> String {
    if x.fract() == 0.0 {
        fixed(x, 0)
    } else {
        fixed(x, 2)
    }
}

/// Industry rows ordered by code, then the cross-sectional fits.
pub fn table3_markdown(study: &IndustryStudy) -> String {
    let models: Vec<ModelSpec> = study.fits.iter().map(|f| f.model).collect();
    let mut s = String::from("| NAICS | description | firms | resilience");
    for m in &models {
        let _ = write!(s, " | {m}");
    }
    s.push_str(" |\n|:-:|:--|--:|--:");
    for _ in &models {
        s.push_str("|--:");
    }
    s.push_str("|\n");
    let mut rows: Vec<_> = study.cross_section.rows.iter().collect();
    rows.sort_by(|a, b| a.naics.cmp(&b.naics));
    for r in rows {
        let _ = write!(
            s,
            "| {} | {} | {} | {}",
            r.naics,
            r.description,
            r.n_firms,
            resilience_cell(r.resilience)
        );
        for m in &models {
            let v = r.cumulative.get(m).map(|v| fixed(*v, 2)).unwrap_or_default();
            let _ = write!(s, " | {v}");
        }
        s.push_str(" |\n");
    }
    s.push_str("\nCross-sectional regression of cumulative return on resilience (White t-statistics in brackets)\n\n| ");
    for m in &models {
        let _ = write!(s, " | {m}");
    }
    s.push_str(" |\n|:--");
    for _ in &models {
        s.push_str("|--:");
    }
    s.push_str("|\n| slope per 10 points");
    for f in &study.fits {
        let _ = write!(s, " | {}{}", fixed(f.slope_per_10, 2), f.slope_stars);
    }
    s.push_str(" |\n| ");
    for f in &study.fits {
        let _ = write!(s, " | [{}]", fixed(f.slope_t, 2));
    }
    s.push_str(" |\n| R²");
    for f in &study.fits {
        let _ = write!(s, " | {}", fixed(f.r_squared, 2));
    }
    s.push_str(" |\n");
    s
}

/// `naics,n_firms,resilience,cum_capm,cum_ff3,cum_ff5` (percent).
pub fn industry_xs_csv<W: Write>(study: &IndustryStudy, out: W) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["naics", "n_firms", "resilience", "cum_capm", "cum_ff3", "cum_ff5"])?;
    let mut rows: Vec<_> = study.cross_section.rows.iter().collect();
    rows.sort_by(|a, b| a.naics.cmp(&b.naics));
    for r in rows {
        let cum = |m| r.cumulative.get(&m).map(|v| crate::float(*v)).unwrap_or_default();
        w.write_record([
            r.naics.to_string(),
            r.n_firms.to_string(),
            crate::float(r.resilience),
            cum(ModelSpec::Capm),
            cum(ModelSpec::Ff3),
            cum(ModelSpec::Ff5),
        ])?;
    }
    w.flush()?;
    Ok(())
}

const EXPOSURE_FACTORS: [Factor; 6] = [
    Factor::MktRf,
    Factor::Smb,
    Factor::Hml,
    Factor::Mom,
    Factor::Rmw,
    Factor::Cma,
];

pub fn exposures_csv<W: Write>(
    estimates: &[(ModelSpec, ExposureEstimates)],
    out: W,
) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![
        "firm_id".to_string(),
        "model".into(),
        "window_start".into(),
        "window_end".into(),
        "n_obs".into(),
        "alpha".into(),
    ];
    header.extend(EXPOSURE_FACTORS.iter().map(|f| format!("beta_{}", f.as_str())));
    w.write_record(&header)?;
    for (model, est) in estimates {
        for e in &est.exposures {
            let mut rec = vec![
                e.firm_id.clone(),
                model.as_str().to_string(),
                e.window.start.to_string(),
                e.window.end.to_string(),
                e.n_obs.to_string(),
                crate::float(e.alpha),
            ];
            rec.extend(
                EXPOSURE_FACTORS
                    .iter()
                    .map(|f| e.beta(*f).map(crate::float).unwrap_or_default()),
            );
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn svix_out_csv<W: Write>(estimates: &[SvixEstimate], out: W) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["date", "underlying_id", "days", "svix2_raw", "svix2_pa", "tail_share"])?;
    for e in estimates {
        w.write_record([
            e.value.date.to_string(),
            e.value.underlying_id.clone(),
            e.value.maturity_days.to_string(),
            crate::float(e.value.svix2_raw),
            crate::float(e.value.svix2_annualized),
            crate::float(e.tail_share()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn expected_returns_csv<W: Write>(rows: &[ExpectedReturn], out: W) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "date",
        "underlying_id",
        "days",
        "premium_over_rf",
        "excess_return",
        "premium_pa",
    ])?;
    for r in rows {
        w.write_record([
            r.date.to_string(),
            r.underlying_id.clone(),
            r.maturity_days.to_string(),
            crate::float(r.relative_premium),
            crate::float(r.excess_return),
            crate::float(r.relative_premium_pa),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Vertical event markers written as `#marker,DATE,NAME` lines.
pub fn markers(window: DateRange) -> Vec<(NaiveDate, &'static str)> {
    vec![(window.start, "window_start"), (window.end, "window_end")]
}

fn tidy<W: Write>(
    mut out: W,
    marks: &[(NaiveDate, &str)],
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<(), Error> {
    for (d, name) in marks {
        writeln!(out, "#marker,{d},{name}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

fn path_rows(panel: &str, p: &CumulativePaths) -> Vec<Vec<String>> {
    let mut rows = Vec::with_capacity(3 * p.dates.len());
    for (label, values) in [
        (Label::High, &p.high),
        (Label::Low, &p.low),
        (Label::HighMinusLow, &p.high_minus_low),
    ] {
        for (d, v) in p.dates.iter().zip(values) {
            rows.push(vec![
                panel.to_string(),
                label.as_str().to_string(),
                d.to_string(),
                crate::float(*v),
            ]);
        }
    }
    rows
}

/// Attention and market level (panel A) and cumulative excess-return
/// portfolios (panel B).
pub fn figure1_csv<W: Write>(
    attention: &AttentionPanel,
    paths: &CumulativePaths,
    window: DateRange,
    out: W,
) -> Result<(), Error> {
    let mut rows = Vec::new();
    for (i, d) in attention.dates.iter().enumerate() {
        if let Some(a) = attention.attention[i] {
            rows.push(vec!["A".into(), "attention".into(), d.to_string(), crate::float(a)]);
        }
    }
    for (d, v) in attention.dates.iter().zip(&attention.market_cumulative) {
        rows.push(vec!["A".into(), "market".into(), d.to_string(), crate::float(*v)]);
    }
    rows.extend(path_rows("B", paths));
    tidy(out, &markers(window), &["panel", "series", "date", "value"], rows)
}

/// One panel per model of cumulative High, Low and High-minus-Low returns.
pub fn paths_csv<W: Write>(
    panels: &[CumulativePaths],
    marks: &[(NaiveDate, &str)],
    out: W,
) -> Result<(), Error> {
    let rows = panels.iter().flat_map(|p| path_rows(&p.name, p));
    tidy(out, marks, &["panel", "series", "date", "value"], rows)
}

/// High, Low and Low-minus-High SVIX² indices per maturity.
pub fn figure5_csv<W: Write>(
    points: &[ResilienceIndexPoint],
    maturities: &[u32],
    window: DateRange,
    out: W,
) -> Result<(), Error> {
    let mut rows = Vec::new();
    for &days in maturities {
        for p in points.iter().filter(|p| p.maturity_days == days) {
            let f = crate::svix::annualization(days);
            for (series, raw) in [("High", p.high), ("Low", p.low), ("LminusH", p.low_minus_high())] {
                rows.push(vec![
                    days.to_string(),
                    series.to_string(),
                    p.date.to_string(),
                    crate::float(raw),
                    crate::float(raw * f),
                ]);
            }
        }
    }
    tidy(
        out,
        &markers(window),
        &["days", "series", "date", "svix2_raw", "svix2_pa"],
        rows,
    )
}

/// Expected-return paths of selected names per maturity.
pub fn figure6_csv<W: Write>(
    rows: &[ExpectedReturn],
    ids: &[String],
    maturities: &[u32],
    window: DateRange,
    out: W,
) -> Result<(), Error> {
    let mut table = Vec::new();
    for &days in maturities {
        for id in ids {
            for r in rows
                .iter()
                .filter(|r| r.maturity_days == days && &r.underlying_id == id)
            {
                table.push(vec![
                    days.to_string(),
                    id.clone(),
                    r.date.to_string(),
                    crate::float(r.relative_premium),
                    crate::float(r.relative_premium_pa),
                ]);
            }
        }
    }
    tidy(
        out,
        &markers(window),
        &["days", "underlying_id", "date", "premium_raw", "premium_pa"],
        table,
    )
}
