mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use resilab::factor_lab::{self, ModelSpec};
use resilab::market_data::{
    self, ingest_attention, ingest_factors, ingest_resilience, ingest_returns, FactorSeries,
    ResilienceMeasure, ReturnPanel,
};
use resilab::pipeline;
use resilab::portfolio::{CumulationMode, HighLowSeries, ReturnField};
use resilab::report;
use resilab::svix::{self, OptionSurfaceSlice};
use resilab::synthesis::{self, GridSpec, ScenarioSpec};
use resilab::Error;

use config::Settings;

#[derive(Parser, Debug)]
#[command(name = "resilab", version, about = "Resilience-sorted portfolio and option-implied return analysis")]
struct Cli {
    /// Flat key = value file; flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Suppress progress output on stdout.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default, Clone)]
struct Opts {
    #[arg(long)]
    returns: Option<String>,
    #[arg(long)]
    factors: Option<String>,
    #[arg(long)]
    resilience: Option<String>,
    #[arg(long)]
    attention: Option<String>,
    #[arg(long)]
    surface: Option<String>,
    /// FAMILY:name or FAMILY:name:level, e.g. KP:affected_share.
    #[arg(long)]
    measure: Option<String>,
    /// Comma-separated factor models (capm,ff3,ff4,ff5,ff6).
    #[arg(long)]
    model: Option<String>,
    /// Event window start.
    #[arg(long)]
    from: Option<String>,
    /// Event window end.
    #[arg(long)]
    to: Option<String>,
    /// Exposure estimation window START:END.
    #[arg(long)]
    estimation: Option<String>,
    /// Side taking firms at the median (high or low).
    #[arg(long)]
    tie: Option<String>,
    /// arithmetic or geometric.
    #[arg(long)]
    cumulation: Option<String>,
    #[arg(long)]
    min_obs: Option<String>,
    #[arg(long)]
    min_cap: Option<String>,
    /// Newey-West lag: auto or an integer.
    #[arg(long)]
    lag: Option<String>,
    #[arg(long)]
    top_n: Option<String>,
    /// Comma-separated option maturities in days.
    #[arg(long)]
    maturity: Option<String>,
    /// Comma-separated underlying ids.
    #[arg(long)]
    ids: Option<String>,
    /// Plot period START:END for figure data.
    #[arg(long)]
    period: Option<String>,
}

impl Opts {
    fn apply(self, s: &mut Settings) {
        let pairs = [
            ("returns", self.returns),
            ("factors", self.factors),
            ("resilience", self.resilience),
            ("attention", self.attention),
            ("surface", self.surface),
            ("measure", self.measure),
            ("model", self.model),
            ("from", self.from),
            ("to", self.to),
            ("estimation", self.estimation),
            ("tie", self.tie),
            ("cumulation", self.cumulation),
            ("min_obs", self.min_obs),
            ("min_cap", self.min_cap),
            ("lag", self.lag),
            ("top_n", self.top_n),
            ("maturity", self.maturity),
            ("ids", self.ids),
            ("period", self.period),
        ];
        for (k, v) in pairs {
            s.set(k, v);
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Figure {
    F1,
    F2,
    F4,
    F5,
    F6,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Scenario {
    Crash,
    Null,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate inputs and report rejected rows.
    Ingest(Opts),
    /// Estimate factor exposures over the estimation window.
    Exposures(Opts),
    /// High/Low/High-minus-Low event-window table.
    EventStudy(Opts),
    /// Industry portfolios and the resilience cross-section.
    IndustryXs(Opts),
    /// Risk-neutral variances from an option surface.
    Svix(Opts),
    /// Option-implied expected returns.
    ExpectedReturns(Opts),
    /// Tidy series behind a figure.
    FigureData {
        #[arg(long, value_enum)]
        figure: Figure,
        #[command(flatten)]
        opts: Opts,
    },
    /// Write a synthetic data set.
    Synth {
        #[arg(long, value_enum, default_value = "crash")]
        scenario: Scenario,
        /// Also write a synthetic option surface.
        #[arg(long)]
        with_surface: bool,
        #[command(flatten)]
        opts: Opts,
    },
}

/// Files produced by a command, written only after everything succeeded.
struct Outputs {
    dir: PathBuf,
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    fn new(dir: PathBuf) -> Self {
        Self {
            dir,
            files: Vec::new(),
        }
    }

    fn add(
        &mut self,
        name: &str,
        write: impl FnOnce(&mut Vec<u8>) -> Result<(), Error>,
    ) -> Result<(), Error> {
        let mut buf = Vec::new();
        write(&mut buf)?;
        self.files.push((name.to_string(), buf));
        Ok(())
    }

    fn add_text(&mut self, name: &str, text: String) {
        self.files.push((name.to_string(), text.into_bytes()));
    }

    /// Each file goes to a temporary in the target directory and is renamed
    /// into place.
    fn commit(self, quiet: bool) -> Result<(), Error> {
        std::fs::create_dir_all(&self.dir)?;
        let mut temps = Vec::with_capacity(self.files.len());
        for (name, bytes) in &self.files {
            let mut tmp = temp_builder().tempfile_in(&self.dir)?;
            std::io::Write::write_all(&mut tmp, bytes)?;
            tmp.as_file().sync_all()?;
            temps.push((tmp, self.dir.join(name)));
        }
        for (tmp, target) in temps {
            tmp.persist(&target).map_err(|e| Error::Io(e.to_string()))?;
            if !quiet {
                println!("wrote {}", target.display());
            }
        }
        Ok(())
    }
}

fn temp_builder() -> tempfile::Builder<'static, 'static> {
    #[allow(unused_mut)]
    let mut b = tempfile::Builder::new();
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        b.permissions(std::fs::Permissions::from_mode(0o644));
    }
    b
}

struct Data {
    factors: FactorSeries,
    returns: ReturnPanel,
}

fn load_returns(s: &Settings, quiet: bool) -> Result<Data, Error> {
    let factors = ingest_factors(&s.require_path("factors")?)?;
    let ingested = ingest_returns(&s.require_path("returns")?, &factors)?;
    if !quiet && !ingested.diagnostics.is_empty() {
        println!("{} return rows rejected", ingested.diagnostics.len());
    }
    Ok(Data {
        factors,
        returns: ingested.panel,
    })
}

fn load_measure(s: &Settings) -> Result<ResilienceMeasure, Error> {
    let all = ingest_resilience(&s.require_path("resilience")?)?;
    let selector = s.get("measure").unwrap_or("KP:affected_share");
    config::select_measure(&all, selector)
}

fn load_surface(s: &Settings) -> Result<Vec<OptionSurfaceSlice>, Error> {
    let path = s.require_path("surface")?;
    let f = std::fs::File::open(&path)?;
    Ok(svix::read_surface(f)?)
}

fn by_maturity(slices: Vec<OptionSurfaceSlice>, maturities: &[u32]) -> Vec<OptionSurfaceSlice> {
    slices
        .into_iter()
        .filter(|s| maturities.contains(&s.maturity_days))
        .collect()
}

const FIGURE_MODELS: [ModelSpec; 3] = [ModelSpec::Capm, ModelSpec::Ff3, ModelSpec::Ff5];
const REPORT_MATURITIES: [u32; 4] = [30, 91, 365, 730];

fn q1_2020() -> market_data::DateRange {
    "2020-01-01:2020-03-31".parse().expect("valid range")
}

fn series_file(name: &str) -> String {
    if name == "ret" {
        "portfolio_series.csv".into()
    } else {
        format!("portfolio_series_{name}.csv")
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let mut s = Settings::load(cli.config.as_deref())?;
    let out_dir = cli
        .out
        .clone()
        .or_else(|| s.get("out").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let seed = match cli.seed {
        Some(v) => v,
        None => s
            .get("seed")
            .map(|v| v.parse::<u64>().map_err(|e| Error::Config(format!("seed: {e}"))))
            .transpose()?
            .unwrap_or(42),
    };
    let quiet = cli.quiet;
    let mut out = Outputs::new(out_dir);

    match cli.command {
        Command::Ingest(opts) => {
            opts.apply(&mut s);
            let factors = ingest_factors(&s.require_path("factors")?)?;
            let mut summary = format!("factors: {} dates\n", factors.len());
            let mut diags = Vec::new();
            if let Some(p) = s.path("returns")? {
                let r = ingest_returns(&p, &factors)?;
                summary.push_str(&format!(
                    "returns: {} rows kept, {} rejected, {} firms\n",
                    r.panel.len(),
                    r.diagnostics.len(),
                    r.panel.firms().len()
                ));
                diags = r.diagnostics;
            }
            if let Some(p) = s.path("resilience")? {
                let m = ingest_resilience(&p)?;
                for x in &m {
                    summary.push_str(&format!(
                        "measure {}:{} level {}: {} industries\n",
                        x.family,
                        x.name,
                        x.naics_level,
                        x.entries.len()
                    ));
                }
            }
            if let Some(p) = s.path("attention")? {
                summary.push_str(&format!("attention: {} dates\n", ingest_attention(&p)?.len()));
            }
            out.add("diagnostics.csv", |buf| {
                let mut w = csv::Writer::from_writer(buf);
                w.write_record(["line", "problem"])?;
                for d in &diags {
                    w.write_record([d.row.to_string(), d.problem.to_string()])?;
                }
                w.flush()?;
                Ok(())
            })?;
            if !quiet {
                print!("{summary}");
            }
        }
        Command::Exposures(opts) => {
            opts.apply(&mut s);
            let cfg = s.study(&ModelSpec::ALL)?;
            let data = load_returns(&s, quiet)?;
            let panel = match s.get("resilience") {
                Some(_) => market_data::match_resilience(
                    &market_data::apply_universe_filter(&data.returns, cfg.min_cap),
                    &load_measure(&s)?,
                )?
                .panel()
                .clone(),
                None => market_data::apply_universe_filter(&data.returns, cfg.min_cap),
            };
            let mut all = Vec::new();
            for &m in &cfg.models {
                let est = factor_lab::estimate_exposures(
                    &panel,
                    &data.factors,
                    m,
                    cfg.estimation,
                    cfg.min_obs,
                )?;
                if !quiet {
                    println!(
                        "{m}: {} firms estimated, {} omitted",
                        est.exposures.len(),
                        est.omitted.len()
                    );
                }
                all.push((m, est));
            }
            out.add("exposures.csv", |b| report::exposures_csv(&all, b))?;
        }
        Command::EventStudy(opts) => {
            opts.apply(&mut s);
            let cfg = s.study(&ModelSpec::ALL)?;
            let data = load_returns(&s, quiet)?;
            let measure = load_measure(&s)?;
            let prepared = pipeline::prepare(&data.returns, &data.factors, &measure, &cfg)?;
            let study = pipeline::event_study(&prepared, &cfg)?;
            let md = report::table2_markdown(&study);
            if !quiet {
                print!("{md}");
            }
            out.add_text("table2.md", md);
            out.add("table2.csv", |b| report::table2_csv(&study, b))?;
            for c in &study.columns {
                out.add(&series_file(c.name), |b| {
                    report::portfolio_series_csv(&c.series, b)
                })?;
            }
            if let Some(p) = s.path("attention")? {
                let att = ingest_attention(&p)?;
                if let Some(col) = study.columns.first() {
                    let fit = pipeline::attention_fit(col, &att, cfg.window)?;
                    out.add_text(
                        "attention_fit.csv",
                        format!(
                            "slope,intercept,r_squared,n_obs\n{},{},{},{}\n",
                            fit.slope, fit.intercept, fit.r_squared, fit.n_obs
                        ),
                    );
                }
            }
        }
        Command::IndustryXs(opts) => {
            opts.apply(&mut s);
            let cfg = s.study(&FIGURE_MODELS)?;
            let data = load_returns(&s, quiet)?;
            let measure = load_measure(&s)?;
            let prepared = pipeline::prepare(&data.returns, &data.factors, &measure, &cfg)?;
            let study =
                pipeline::industry_study(&prepared, &cfg, &cfg.models, report::naics_description)?;
            let md = report::table3_markdown(&study);
            if !quiet {
                print!("{md}");
            }
            out.add_text("table3.md", md);
            out.add("industry_xs.csv", |b| report::industry_xs_csv(&study, b))?;
        }
        Command::Svix(opts) => {
            opts.apply(&mut s);
            let maturities = s.maturities(&svix::MATURITIES)?;
            let slices = by_maturity(load_surface(&s)?, &maturities);
            let est = pipeline::svix_all(&slices)?;
            out.add("svix_out.csv", |b| report::svix_out_csv(&est, b))?;
            if s.get("resilience").is_some() {
                let cfg = s.study(&[])?;
                let data = load_returns(&s, quiet)?;
                let matched = market_data::match_resilience(
                    &market_data::apply_universe_filter(&data.returns, cfg.min_cap),
                    &load_measure(&s)?,
                )?;
                let pts = pipeline::svix_indices(&est, &matched, cfg.tie)?;
                out.add("svix_indices.csv", |b| {
                    let mut w = csv::Writer::from_writer(b);
                    w.write_record([
                        "date", "days", "high", "low", "low_minus_high", "low_minus_high_pa",
                        "n_high", "n_low",
                    ])?;
                    for p in &pts {
                        w.write_record([
                            p.date.to_string(),
                            p.maturity_days.to_string(),
                            p.high.to_string(),
                            p.low.to_string(),
                            p.low_minus_high().to_string(),
                            p.low_minus_high_pa().to_string(),
                            p.n_high.to_string(),
                            p.n_low.to_string(),
                        ])?;
                    }
                    w.flush()?;
                    Ok(())
                })?;
            }
            if !quiet {
                println!("{} slices", est.len());
            }
        }
        Command::ExpectedReturns(opts) => {
            opts.apply(&mut s);
            let maturities = s.maturities(&svix::MATURITIES)?;
            let slices = by_maturity(load_surface(&s)?, &maturities);
            let est = pipeline::svix_all(&slices)?;
            let data = load_returns(&s, quiet)?;
            let mut rows = pipeline::expected_returns(&slices, &est, &data.returns)?;
            if let Some(ids) = s.ids() {
                rows.retain(|r| ids.contains(&r.underlying_id));
            }
            out.add("expected_returns.csv", |b| report::expected_returns_csv(&rows, b))?;
        }
        Command::FigureData { figure, opts } => {
            opts.apply(&mut s);
            figure_data(figure, &s, quiet, &mut out)?;
        }
        Command::Synth {
            scenario,
            with_surface,
            opts,
        } => {
            opts.apply(&mut s);
            let name = match scenario {
                Scenario::Crash => "crash",
                Scenario::Null => "null",
            };
            let spec = ScenarioSpec::by_name(name, seed)?;
            let p = synthesis::generate_panel(&spec)?;
            out.add("returns.csv", |b| Ok(market_data::write_returns(&p.returns, b)?))?;
            out.add("factors.csv", |b| Ok(market_data::write_factors(&p.factors, b)?))?;
            out.add("resilience.csv", |b| {
                Ok(market_data::write_resilience(std::slice::from_ref(&p.measure), b)?)
            })?;
            out.add("attention.csv", |b| Ok(synthesis::write_attention(&p.attention, b)?))?;
            out.add("truth.csv", |b| Ok(synthesis::write_truth(&p.truth, b)?))?;
            if with_surface {
                let slices = synthetic_surfaces(&p)?;
                out.add("surface.csv", |b| Ok(svix::write_surface(&slices, b)?))?;
            }
        }
    }
    out.commit(quiet)
}

/// Month-end option slices for the market and every fifth firm:
/// low-resilience firms get twice the high-resilience volatility.
fn synthetic_surfaces(p: &synthesis::SyntheticPanel) -> Result<Vec<OptionSurfaceSlice>, Error> {
    let dates: Vec<_> = ["2020-01-31", "2020-02-28", "2020-03-31"]
        .iter()
        .map(|d| d.parse().expect("valid date"))
        .collect();
    let grid = GridSpec {
        n_strikes: 120,
        lo_mult: 0.05,
        hi_mult: 4.0,
    };
    let mut out = Vec::new();
    for &date in &dates {
        let stress = if date >= synthesis::event_window().start { 2.0 } else { 1.0 };
        for &days in &REPORT_MATURITIES {
            out.push(
                synthesis::generate_surface(
                    pipeline::MARKET_ID,
                    date,
                    days,
                    100.0,
                    0.01,
                    0.25 * stress,
                    grid,
                )?
                .slice,
            );
            for f in p.truth.firms.iter().step_by(5) {
                let sigma = if f.low_group { 0.4 } else { 0.25 } * stress;
                out.push(
                    synthesis::generate_surface(&f.firm_id, date, days, 50.0, 0.01, sigma, grid)?
                        .slice,
                );
            }
        }
    }
    Ok(out)
}

fn figure_data(figure: Figure, s: &Settings, quiet: bool, out: &mut Outputs) -> Result<(), Error> {
    let period = s.period()?.unwrap_or_else(q1_2020);
    match figure {
        Figure::F1 => {
            let cfg = s.study(&[])?;
            let data = load_returns(s, quiet)?;
            let measure = load_measure(s)?;
            let prepared = pipeline::prepare(&data.returns, &data.factors, &measure, &cfg)?;
            let hl = resilab::portfolio::build_high_low(
                &prepared.matched,
                ReturnField::Excess,
                Some(period),
                cfg.tie,
            )?;
            let mode = s.cumulation(CumulationMode::GeometricCompound)?;
            let paths = pipeline::cumulative_paths("B", &hl, period, mode);
            let att = match s.path("attention")? {
                Some(p) => ingest_attention(&p)?,
                None => Default::default(),
            };
            let panel_a = pipeline::attention_panel(&data.factors, &att, period);
            out.add("figure_f1.csv", |b| {
                report::figure1_csv(&panel_a, &paths, cfg.window, b)
            })?;
        }
        Figure::F2 => {
            let cfg = s.study(&FIGURE_MODELS)?;
            let data = load_returns(s, quiet)?;
            let measure = load_measure(s)?;
            let prepared = pipeline::prepare(&data.returns, &data.factors, &measure, &cfg)?;
            let mode = s.cumulation(CumulationMode::ArithmeticSum)?;
            let mut panels = Vec::new();
            for adj in &prepared.adjusted {
                let hl = resilab::portfolio::build_high_low(
                    &prepared.matched,
                    ReturnField::Adjusted(adj),
                    Some(period),
                    cfg.tie,
                )?;
                panels.push(pipeline::cumulative_paths(adj.model.as_str(), &hl, period, mode));
            }
            out.add("figure_f2.csv", |b| {
                report::paths_csv(&panels, &report::markers(cfg.window), b)
            })?;
        }
        Figure::F4 => {
            let cfg = s.study(&FIGURE_MODELS)?;
            let data = load_returns(s, quiet)?;
            let measure = load_measure(s)?;
            let mode = s.cumulation(CumulationMode::ArithmeticSum)?;
            let mut panels = Vec::new();
            for &m in &cfg.models {
                let hl: HighLowSeries =
                    pipeline::rolling_high_low(&data.returns, &data.factors, &measure, m, &cfg)?;
                let span = match (hl.high.dates.first(), hl.high.dates.last()) {
                    (Some(a), Some(b)) => market_data::DateRange::new(*a, *b),
                    _ => continue,
                };
                let span = s.period()?.unwrap_or(span);
                panels.push(pipeline::cumulative_paths(m.as_str(), &hl, span, mode));
            }
            out.add("figure_f4.csv", |b| {
                report::paths_csv(&panels, &report::markers(cfg.window), b)
            })?;
        }
        Figure::F5 => {
            let cfg = s.study(&[])?;
            let maturities = s.maturities(&REPORT_MATURITIES)?;
            let slices = by_maturity(load_surface(s)?, &maturities);
            let est = pipeline::svix_all(&slices)?;
            let data = load_returns(s, quiet)?;
            let matched = market_data::match_resilience(
                &market_data::apply_universe_filter(&data.returns, cfg.min_cap),
                &load_measure(s)?,
            )?;
            let pts = pipeline::svix_indices(&est, &matched, cfg.tie)?;
            out.add("figure_f5.csv", |b| {
                report::figure5_csv(&pts, &maturities, cfg.window, b)
            })?;
        }
        Figure::F6 => {
            let cfg = s.study(&[])?;
            let maturities = s.maturities(&[365, 730])?;
            let slices = by_maturity(load_surface(s)?, &maturities);
            let est = pipeline::svix_all(&slices)?;
            let data = load_returns(s, quiet)?;
            let rows = pipeline::expected_returns(&slices, &est, &data.returns)?;
            let ids = s.ids().unwrap_or_else(|| {
                let mut v: Vec<String> = rows.iter().map(|r| r.underlying_id.clone()).collect();
                v.sort();
                v.dedup();
                v
            });
            out.add("figure_f6.csv", |b| {
                report::figure6_csv(&rows, &ids, &maturities, cfg.window, b)
            })?;
        }
    }
    Ok(())
}

fn escape(msg: &str) -> String {
    msg.replace('\\', "\\\\")
        .replace('"', "\\\"")
        .replace('\n', " ")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: kind={} message=\"{}\"", e.kind(), escape(&e.to_string()));
            match e {
                Error::Config(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
