//! Tick-data ingestion, cleaning and calendar sampling, plus per-day test
//! reports.
//!
//! Input is a CSV with header `date,time,price,size`. Cleaning keeps the
//! regular session, drops non-positive prices and merges same-second trades
//! into their size-weighted mean. Sampling is previous-tick on a fixed
//! calendar grid.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::{NaiveDate, NaiveDateTime, NaiveTime, Timelike};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{window_kn, TuningParams};
use crate::hettest::{SpotAnalysis, TestOutcome, TestVariant};
use crate::sim::{fmt_num, SamplePath};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub timestamp: NaiveDateTime,
    pub price: f64,
    pub size: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RowError {
    pub line: u64,
    pub message: String,
}

impl fmt::Display for RowError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DayTicks {
    pub day: NaiveDate,
    pub ticks: Vec<TickRecord>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LoadedTicks {
    pub days: Vec<DayTicks>,
    pub row_errors: Vec<RowError>,
}

const HEADER: [&str; 4] = ["date", "time", "price", "size"];

fn parse_row(rec: &csv::StringRecord) -> std::result::Result<TickRecord, String> {
    if rec.len() != 4 {
        return Err(format!("expected 4 fields, found {}", rec.len()));
    }
    let date = NaiveDate::parse_from_str(rec[0].trim(), "%Y-%m-%d")
        .map_err(|e| format!("bad date {:?}: {e}", &rec[0]))?;
    let time = NaiveTime::parse_from_str(rec[1].trim(), "%H:%M:%S%.f")
        .map_err(|e| format!("bad time {:?}: {e}", &rec[1]))?
        .with_nanosecond(0)
        .expect("zero nanoseconds is valid");
    let price: f64 = rec[2]
        .trim()
        .parse()
        .map_err(|_| format!("bad price {:?}", &rec[2]))?;
    if !price.is_finite() {
        return Err(format!("non-finite price {:?}", &rec[2]));
    }
    let size: u64 = rec[3]
        .trim()
        .parse()
        .map_err(|_| format!("bad size {:?}", &rec[3]))?;
    Ok(TickRecord {
        timestamp: date.and_time(time),
        price,
        size,
    })
}

/// Parse a tick CSV, grouping records by calendar day in timestamp order.
///
/// A wrong header is fatal; malformed rows are skipped and reported with
/// their line numbers.
pub fn load_ticks<R: Read>(input: R) -> Result<LoadedTicks> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut records = rdr.records();
    let header = match records.next() {
        None => return Ok(LoadedTicks::default()),
        Some(h) => h.map_err(|e| Error::Input(format!("unreadable tick file: {e}")))?,
    };
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    if names != HEADER {
        return Err(Error::Input(format!(
            "expected header date,time,price,size, found {}",
            names.join(",")
        )));
    }
    let mut by_day: BTreeMap<NaiveDate, Vec<TickRecord>> = BTreeMap::new();
    let mut row_errors = Vec::new();
    for rec in records {
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                if matches!(e.kind(), csv::ErrorKind::Io(_)) {
                    return Err(Error::Input(format!("unreadable tick file: {e}")));
                }
                row_errors.push(RowError {
                    line,
                    message: e.to_string(),
                });
                continue;
            }
        };
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        match parse_row(&rec) {
            Ok(t) => by_day.entry(t.timestamp.date()).or_default().push(t),
            Err(message) => row_errors.push(RowError { line, message }),
        }
    }
    let days = by_day
        .into_iter()
        .map(|(day, mut ticks)| {
            ticks.sort_by_key(|t| t.timestamp);
            DayTicks { day, ticks }
        })
        .collect();
    Ok(LoadedTicks { days, row_errors })
}

/// Clock-time interval within a day, inclusive at both ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub start: NaiveTime,
    pub end: NaiveTime,
}

impl Span {
    pub fn new(start: NaiveTime, end: NaiveTime) -> Result<Self> {
        if end <= start {
            return Err(Error::param(format!(
                "span end {end} must follow start {start}"
            )));
        }
        Ok(Self { start, end })
    }

    pub fn regular_session() -> Self {
        Self {
            start: NaiveTime::from_hms_opt(9, 30, 0).expect("valid"),
            end: NaiveTime::from_hms_opt(16, 0, 0).expect("valid"),
        }
    }

    pub fn seconds(&self) -> u32 {
        (self.end - self.start).num_seconds() as u32
    }

    pub fn contains(&self, t: NaiveTime) -> bool {
        t >= self.start && t <= self.end
    }

    /// Parse a comma-separated list such as `09:30-16:00,10:00-15:30`.
    pub fn parse_list(s: &str) -> Result<Vec<Span>> {
        s.split(',')
            .filter(|p| !p.trim().is_empty())
            .map(|p| p.trim().parse())
            .collect()
    }
}

fn parse_clock(s: &str) -> Result<NaiveTime> {
    NaiveTime::parse_from_str(s, "%H:%M:%S")
        .or_else(|_| NaiveTime::parse_from_str(s, "%H:%M"))
        .map_err(|_| Error::param(format!("bad clock time {s:?}")))
}

impl FromStr for Span {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once('-')
            .ok_or_else(|| Error::param(format!("span {s:?} must look like HH:MM-HH:MM")))?;
        Span::new(parse_clock(a.trim())?, parse_clock(b.trim())?)
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |t: NaiveTime| {
            if t.second() == 0 {
                t.format("%H:%M").to_string()
            } else {
                t.format("%H:%M:%S").to_string()
            }
        };
        write!(f, "{}-{}", show(self.start), show(self.end))
    }
}

impl Serialize for Span {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Span {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct CleaningStats {
    pub input: usize,
    pub outside_session: usize,
    pub nonpositive_price: usize,
    /// Same-second groups of two or more records.
    pub merged_groups: usize,
    /// Records absorbed into another record by merging.
    pub merged_records: usize,
    /// Merged groups whose sizes summed to zero (unweighted mean used).
    pub zero_size_groups: usize,
    pub output: usize,
}

impl CleaningStats {
    pub fn accumulate(&mut self, other: &CleaningStats) {
        self.input += other.input;
        self.outside_session += other.outside_session;
        self.nonpositive_price += other.nonpositive_price;
        self.merged_groups += other.merged_groups;
        self.merged_records += other.merged_records;
        self.zero_size_groups += other.zero_size_groups;
        self.output += other.output;
    }
}

/// Apply the session window, price filter and same-second merge.
pub fn clean(ticks: &[TickRecord], session: Span) -> (Vec<TickRecord>, CleaningStats) {
    let mut stats = CleaningStats {
        input: ticks.len(),
        ..Default::default()
    };
    let mut kept: Vec<TickRecord> = Vec::with_capacity(ticks.len());
    for t in ticks {
        if !session.contains(t.timestamp.time()) {
            stats.outside_session += 1;
        } else if !(t.price > 0.0) {
            stats.nonpositive_price += 1;
        } else {
            kept.push(*t);
        }
    }
    kept.sort_by_key(|t| t.timestamp);
    let mut out = Vec::with_capacity(kept.len());
    for group in kept.chunk_by(|a, b| a.timestamp == b.timestamp) {
        if group.len() == 1 {
            out.push(group[0]);
            continue;
        }
        stats.merged_groups += 1;
        stats.merged_records += group.len() - 1;
        let size: u64 = group.iter().map(|t| t.size).sum();
        let price = if size == 0 {
            stats.zero_size_groups += 1;
            group.iter().map(|t| t.price).sum::<f64>() / group.len() as f64
        } else {
            group.iter().map(|t| t.price * t.size as f64).sum::<f64>() / size as f64
        };
        out.push(TickRecord {
            timestamp: group[0].timestamp,
            price,
            size,
        });
    }
    stats.output = out.len();
    (out, stats)
}

/// Calendar-sampled log-prices of one day.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CleanSeries {
    pub day: NaiveDate,
    pub grid_seconds: u32,
    pub span: Span,
    pub log_prices: Vec<f64>,
}

impl CleanSeries {
    pub fn new(
        day: NaiveDate,
        grid_seconds: u32,
        span: Span,
        log_prices: Vec<f64>,
    ) -> Result<Self> {
        if grid_seconds == 0 {
            return Err(Error::param("grid_seconds must be positive"));
        }
        let want = (span.seconds() / grid_seconds) as usize + 1;
        if log_prices.len() != want {
            return Err(Error::param(format!(
                "series over {span} at {grid_seconds}s needs {want} points, got {}",
                log_prices.len()
            )));
        }
        if log_prices.iter().any(|x| !x.is_finite()) {
            return Err(Error::Data("log-prices must be finite".into()));
        }
        Ok(Self {
            day,
            grid_seconds,
            span,
            log_prices,
        })
    }

    /// Number of increments.
    pub fn n(&self) -> usize {
        self.log_prices.len() - 1
    }

    pub fn time(&self, i: usize) -> NaiveTime {
        self.span.start + chrono::Duration::seconds(i as i64 * self.grid_seconds as i64)
    }

    /// Grid re-normalised to `[0, 1]`.
    pub fn to_path(&self) -> Result<SamplePath> {
        SamplePath::from_obs(self.log_prices.clone())
    }

    /// Keep every `grid_seconds / self.grid_seconds`-th point.
    pub fn decimate(&self, grid_seconds: u32) -> Result<CleanSeries> {
        if grid_seconds == 0 || !grid_seconds.is_multiple_of(self.grid_seconds) {
            return Err(Error::param(format!(
                "grid {grid_seconds}s is not a multiple of the {}s base grid",
                self.grid_seconds
            )));
        }
        let step = (grid_seconds / self.grid_seconds) as usize;
        let count = (self.span.seconds() / grid_seconds) as usize + 1;
        let log_prices = (0..count).map(|i| self.log_prices[i * step]).collect();
        CleanSeries::new(self.day, grid_seconds, self.span, log_prices)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["date", "time", "log_price"])?;
        for (i, x) in self.log_prices.iter().enumerate() {
            w.write_record([
                self.day.to_string(),
                self.time(i).format("%H:%M:%S").to_string(),
                fmt_num(*x),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Previous-tick sampling of cleaned records on `[span.start, span.end]`.
pub fn sample_calendar(
    day: NaiveDate,
    ticks: &[TickRecord],
    grid_seconds: u32,
    span: Span,
) -> Result<CleanSeries> {
    if grid_seconds == 0 {
        return Err(Error::param("grid_seconds must be positive"));
    }
    let count = (span.seconds() / grid_seconds) as usize + 1;
    let start = day.and_time(span.start);
    let mut idx = 0usize;
    let mut last: Option<f64> = None;
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let t = start + chrono::Duration::seconds(i as i64 * grid_seconds as i64);
        while idx < ticks.len() && ticks[idx].timestamp <= t {
            last = Some(ticks[idx].price);
            idx += 1;
        }
        match last {
            Some(p) if p > 0.0 => out.push(p.ln()),
            Some(p) => return Err(Error::Data(format!("{day}: non-positive price {p} at {t}"))),
            None => {
                return Err(Error::Data(format!(
                    "{day}: no opening price at or before {}",
                    span.start
                )))
            }
        }
    }
    CleanSeries::new(day, grid_seconds, span, out)
}

/// Sub-series over a grid-aligned window inside `series.span`.
pub fn restrict_span(series: &CleanSeries, span: Span) -> Result<CleanSeries> {
    let g = series.grid_seconds as i64;
    let last = series.time(series.n());
    if span.start < series.span.start || span.end > last {
        return Err(Error::param(format!(
            "span {span} outside series span {}",
            series.span
        )));
    }
    let off = (span.start - series.span.start).num_seconds();
    let len = (span.end - span.start).num_seconds();
    if off % g != 0 || len % g != 0 {
        return Err(Error::param(format!(
            "span {span} is not aligned to the {g}s grid"
        )));
    }
    let a = (off / g) as usize;
    let b = a + (len / g) as usize;
    CleanSeries::new(
        series.day,
        series.grid_seconds,
        span,
        series.log_prices[a..=b].to_vec(),
    )
}

/// Sampling grid used for one test variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantGrid {
    pub variant: TestVariant,
    pub grid_seconds: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportConfig {
    pub variants: Vec<VariantGrid>,
    #[serde(default)]
    pub tuning: TuningParams,
    #[serde(default = "crate::mc::default_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default = "default_spans")]
    pub spans: Vec<Span>,
    /// Days with fewer than `min_increment_factor · k_n` increments are
    /// excluded from the spot-window tests.
    #[serde(default = "default_min_increment_factor")]
    pub min_increment_factor: f64,
}

pub fn default_spans() -> Vec<Span> {
    Span::parse_list("09:30-16:00,10:00-15:30,10:30-15:00").expect("valid spans")
}

pub fn default_min_increment_factor() -> f64 {
    5.0
}

impl ReportConfig {
    /// Plain and truncated tests on 5-minute data, pre-averaging on 5-second data.
    pub fn reference() -> Self {
        Self {
            variants: vec![
                VariantGrid {
                    variant: TestVariant::Plain,
                    grid_seconds: 300,
                },
                VariantGrid {
                    variant: TestVariant::Truncated,
                    grid_seconds: 300,
                },
                VariantGrid {
                    variant: TestVariant::Preaveraged,
                    grid_seconds: 5,
                },
            ],
            tuning: TuningParams::default(),
            alphas: crate::mc::default_alphas(),
            spans: default_spans(),
            min_increment_factor: default_min_increment_factor(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.variants.is_empty() || self.alphas.is_empty() || self.spans.is_empty() {
            return Err(Error::param(
                "report needs at least one variant, alpha and span",
            ));
        }
        for &a in &self.alphas {
            crate::hettest::critical_value(a)?;
        }
        if !(self.min_increment_factor >= 0.0) {
            return Err(Error::param("min_increment_factor must be nonnegative"));
        }
        self.tuning.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DayOutcome {
    pub day: NaiveDate,
    pub variant: TestVariant,
    pub grid_seconds: u32,
    pub span: Span,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outcome: Option<TestOutcome>,
    /// Reason the day was left out of the proportions.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub excluded: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Proportion {
    pub variant: TestVariant,
    pub grid_seconds: u32,
    pub span: Span,
    pub alpha: f64,
    pub rejected: usize,
    pub tested: usize,
    pub excluded: usize,
    pub proportion: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DailyReport {
    pub day_count: usize,
    pub alphas: Vec<f64>,
    pub spans: Vec<Span>,
    pub outcomes: Vec<DayOutcome>,
    pub proportion_rejected: Vec<Proportion>,
}

fn assess_day(series: &CleanSeries, vg: VariantGrid, span: Span, cfg: &ReportConfig) -> DayOutcome {
    let result = (|| -> Result<TestOutcome> {
        let s = restrict_span(&series.decimate(vg.grid_seconds)?, span)?;
        let n = s.n();
        if matches!(vg.variant, TestVariant::Plain | TestVariant::Truncated) {
            let k = window_kn(n, cfg.tuning.theta)?;
            if (n as f64) < cfg.min_increment_factor * k as f64 {
                return Err(Error::config(format!(
                    "{n} increments is below {} x k_n = {}",
                    cfg.min_increment_factor,
                    cfg.min_increment_factor * k as f64
                )));
            }
        }
        SpotAnalysis::compute(&s.log_prices, &cfg.tuning, vg.variant)?.outcome(cfg.alphas[0])
    })();
    let (outcome, excluded) = match result {
        Ok(o) => (Some(o), None),
        Err(e) => (None, Some(e.to_string())),
    };
    DayOutcome {
        day: series.day,
        variant: vg.variant,
        grid_seconds: vg.grid_seconds,
        span,
        outcome,
        excluded,
    }
}

/// Run every requested test per day and span and aggregate the rejection
/// proportions. Day-level failures are recorded, never fatal.
pub fn daily_report(days: &[CleanSeries], cfg: &ReportConfig) -> Result<DailyReport> {
    cfg.validate()?;
    if days.is_empty() {
        return Err(Error::Data("no usable days".into()));
    }
    let jobs: Vec<(usize, VariantGrid, Span)> = cfg
        .spans
        .iter()
        .flat_map(|&span| {
            cfg.variants
                .iter()
                .flat_map(move |&vg| (0..days.len()).map(move |d| (d, vg, span)))
        })
        .collect();
    let outcomes: Vec<DayOutcome> = jobs
        .par_iter()
        .map(|&(d, vg, span)| assess_day(&days[d], vg, span, cfg))
        .collect();
    let mut proportion_rejected = Vec::new();
    for &span in &cfg.spans {
        for &vg in &cfg.variants {
            let cell: Vec<&DayOutcome> = outcomes
                .iter()
                .filter(|o| {
                    o.span == span && o.variant == vg.variant && o.grid_seconds == vg.grid_seconds
                })
                .collect();
            let tested: Vec<&TestOutcome> =
                cell.iter().filter_map(|o| o.outcome.as_ref()).collect();
            for &alpha in &cfg.alphas {
                let mut rejected = 0;
                for o in &tested {
                    if o.rejects_at(alpha)? {
                        rejected += 1;
                    }
                }
                proportion_rejected.push(Proportion {
                    variant: vg.variant,
                    grid_seconds: vg.grid_seconds,
                    span,
                    alpha,
                    rejected,
                    tested: tested.len(),
                    excluded: cell.len() - tested.len(),
                    proportion: (!tested.is_empty()).then(|| rejected as f64 / tested.len() as f64),
                });
            }
        }
    }
    Ok(DailyReport {
        day_count: days.len(),
        alphas: cfg.alphas.clone(),
        spans: cfg.spans.clone(),
        outcomes,
        proportion_rejected,
    })
}

impl DailyReport {
    pub fn proportion(&self, variant: TestVariant, span: Span, alpha: f64) -> Option<f64> {
        self.proportion_rejected
            .iter()
            .find(|p| p.variant == variant && p.span == span && p.alpha == alpha)
            .and_then(|p| p.proportion)
    }

    /// One row per span, one column per variant × alpha.
    pub fn write_table_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut cols: Vec<(TestVariant, u32)> = Vec::new();
        for p in &self.proportion_rejected {
            if !cols.contains(&(p.variant, p.grid_seconds)) {
                cols.push((p.variant, p.grid_seconds));
            }
        }
        let dup = |v: TestVariant| cols.iter().filter(|c| c.0 == v).count() > 1;
        let mut header = vec!["span".to_string()];
        for &(v, g) in &cols {
            for &a in &self.alphas {
                let pct = (a * 1000.0).round() / 10.0;
                header.push(if dup(v) {
                    format!("{v}_{g}s_{pct}%")
                } else {
                    format!("{v}_{pct}%")
                });
            }
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&header)?;
        for &span in &self.spans {
            let mut rec = vec![span.to_string()];
            for &(v, g) in &cols {
                for &a in &self.alphas {
                    let p = self
                        .proportion_rejected
                        .iter()
                        .find(|p| {
                            p.span == span && p.variant == v && p.grid_seconds == g && p.alpha == a
                        })
                        .and_then(|p| p.proportion);
                    rec.push(p.map(fmt_num).unwrap_or_default());
                }
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpotCurve {
    pub variant: TestVariant,
    /// Block midpoints as a fraction of the span.
    pub block_times: Vec<f64>,
    pub mean_spot_variance: Vec<f64>,
    /// Days contributing to each block.
    pub day_counts: Vec<usize>,
    pub failures: Vec<(NaiveDate, String)>,
}

impl SpotCurve {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["block_time", "mean_spot_variance"])?;
        for (t, v) in self.block_times.iter().zip(&self.mean_spot_variance) {
            w.write_record([fmt_num(*t), fmt_num(*v)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Cross-sectional mean of per-day spot-variance blocks.
pub fn spot_curve(
    days: &[CleanSeries],
    variant: TestVariant,
    tuning: &TuningParams,
) -> Result<SpotCurve> {
    tuning.validate()?;
    let per_day: Vec<Result<SpotAnalysis>> = days
        .par_iter()
        .map(|d| SpotAnalysis::compute(&d.log_prices, tuning, variant))
        .collect();
    let mut sums: Vec<f64> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    let mut times: Vec<f64> = Vec::new();
    let mut failures = Vec::new();
    for (day, res) in days.iter().zip(per_day) {
        let a = match res {
            Ok(a) => a,
            Err(e) => {
                failures.push((day.day, e.to_string()));
                continue;
            }
        };
        let m = a.block_span() as f64;
        let offset = match (variant, a.windows.p_n) {
            (TestVariant::Preaveraged, Some(p)) if tuning.preavg_skip_first => p as f64,
            _ => 0.0,
        };
        for (j, s) in a.spots.iter().enumerate() {
            if j == sums.len() {
                sums.push(0.0);
                counts.push(0);
                times.push((offset + (j as f64 + 0.5) * m) / a.n as f64);
            }
            sums[j] += s;
            counts[j] += 1;
        }
    }
    if counts.is_empty() {
        return Err(failures
            .first()
            .map(|(d, e)| Error::Data(format!("no day produced spot estimates ({d}: {e})")))
            .unwrap_or_else(|| Error::Data("no days supplied".into())));
    }
    let mean = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| s / c as f64)
        .collect();
    Ok(SpotCurve {
        variant,
        block_times: times,
        mean_spot_variance: mean,
        day_counts: counts,
        failures,
    })
}

/// Load, clean and sample every day of a tick file.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedDays {
    pub series: Vec<CleanSeries>,
    pub stats: Vec<(NaiveDate, CleaningStats)>,
    pub day_errors: Vec<(NaiveDate, String)>,
    pub row_errors: Vec<RowError>,
}

pub fn prepare_days<R: Read>(input: R, grid_seconds: u32, session: Span) -> Result<PreparedDays> {
    let loaded = load_ticks(input)?;
    let mut out = PreparedDays {
        series: Vec::new(),
        stats: Vec::new(),
        day_errors: Vec::new(),
        row_errors: loaded.row_errors,
    };
    for d in &loaded.days {
        let (ticks, stats) = clean(&d.ticks, session);
        out.stats.push((d.day, stats));
        match sample_calendar(d.day, &ticks, grid_seconds, session) {
            Ok(s) => out.series.push(s),
            Err(e) => out.day_errors.push((d.day, e.to_string())),
        }
    }
    Ok(out)
}
