//! Resolved-market datasets and YES-price series.
//!
//! Markets arrive as delimited exports with one row per resolved binary
//! market. Rows that break a record invariant are rejected individually and
//! listed in a [`LoadReport`]; structural problems (missing columns,
//! duplicate questions) abort the load.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, NaiveDateTime, SecondsFormat, Utc};
use rust_decimal::prelude::ToPrimitive;
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SECONDS_PER_DAY: f64 = 86_400.0;

/// Minimum trading window kept by [`filter_binary_and_duration`].
pub const MIN_DURATION_SECONDS: i64 = 7 * 86_400;

pub const MARKET_COLUMNS: [&str; 7] = [
    "event_market_name",
    "question",
    "market_start_time",
    "market_end_time",
    "resolved_on_timestamp",
    "outcome",
    "volume_usd",
];

pub const PRICE_COLUMNS: [&str; 3] = ["question", "timestamp", "yes_price"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Outcome {
    #[serde(rename = "YES")]
    Yes,
    #[serde(rename = "NO")]
    No,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Yes => "YES",
            Outcome::No => "NO",
        }
    }

    pub fn flip(self) -> Outcome {
        match self {
            Outcome::Yes => Outcome::No,
            Outcome::No => Outcome::Yes,
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Outcome {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "YES" => Ok(Outcome::Yes),
            "NO" => Ok(Outcome::No),
            other => Err(format!("outcome must be YES or NO, got {other:?}")),
        }
    }
}

/// One resolved binary market.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarketRecord {
    pub event_market_name: String,
    pub question: String,
    pub market_start_time: DateTime<Utc>,
    pub market_end_time: DateTime<Utc>,
    pub resolved_on_timestamp: DateTime<Utc>,
    pub outcome: Outcome,
    pub volume_usd: Decimal,
}

impl MarketRecord {
    /// Checks the per-record invariants, returning a human-readable reason
    /// on the first violation.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.question.trim().is_empty() {
            return Err("question is empty".into());
        }
        if self.market_start_time >= self.market_end_time {
            return Err("market_start_time must precede market_end_time".into());
        }
        if self.resolved_on_timestamp < self.market_start_time {
            return Err("resolved_on_timestamp precedes market_start_time".into());
        }
        if self.volume_usd.is_sign_negative() && !self.volume_usd.is_zero() {
            return Err("volume_usd is negative".into());
        }
        Ok(())
    }

    pub fn duration_seconds(&self) -> i64 {
        (self.market_end_time - self.market_start_time).num_seconds()
    }

    pub fn duration_days(&self) -> f64 {
        let d = self.market_end_time - self.market_start_time;
        d.num_milliseconds() as f64 / 1000.0 / SECONDS_PER_DAY
    }

    pub fn volume_f64(&self) -> f64 {
        self.volume_usd.to_f64().unwrap_or(f64::NAN)
    }
}

/// Markets keyed by question text, the join key used throughout.
pub type MarketIndex = BTreeMap<String, MarketRecord>;

pub fn index_markets(markets: &[MarketRecord]) -> MarketIndex {
    markets
        .iter()
        .map(|m| (m.question.clone(), m.clone()))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceTick {
    pub timestamp: DateTime<Utc>,
    pub yes_price: f64,
}

impl PriceTick {
    /// Implied NO price.
    pub fn no_price(&self) -> f64 {
        1.0 - self.yes_price
    }
}

/// YES-price history for one market, strictly increasing in time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    pub question: String,
    ticks: Vec<PriceTick>,
}

impl PriceSeries {
    /// Builds a series, sorting ticks by time. Fails on out-of-range prices
    /// or repeated timestamps.
    pub fn new(question: impl Into<String>, mut ticks: Vec<PriceTick>) -> Result<Self> {
        let question = question.into();
        if let Some(bad) = ticks
            .iter()
            .find(|t| !(0.0..=1.0).contains(&t.yes_price) || !t.yes_price.is_finite())
        {
            return Err(Error::InvalidArgument(format!(
                "yes_price {} outside [0, 1] in series {question:?}",
                bad.yes_price
            )));
        }
        ticks.sort_by_key(|t| t.timestamp);
        if ticks.windows(2).any(|w| w[0].timestamp == w[1].timestamp) {
            return Err(Error::InvalidArgument(format!(
                "repeated timestamp in series {question:?}"
            )));
        }
        Ok(PriceSeries { question, ticks })
    }

    pub fn ticks(&self) -> &[PriceTick] {
        &self.ticks
    }

    pub fn is_empty(&self) -> bool {
        self.ticks.is_empty()
    }

    /// First tick with a timestamp strictly greater than `t`.
    pub fn first_after(&self, t: DateTime<Utc>) -> Option<&PriceTick> {
        let idx = self.ticks.partition_point(|tick| tick.timestamp <= t);
        self.ticks.get(idx)
    }

    pub fn last(&self) -> Option<&PriceTick> {
        self.ticks.last()
    }
}

pub type SeriesIndex = BTreeMap<String, PriceSeries>;

/// A month cohort such as `2025-04`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CohortSpec {
    pub year: i32,
    month: u32,
}

const MONTH_NAMES: [&str; 12] = [
    "january",
    "february",
    "march",
    "april",
    "may",
    "june",
    "july",
    "august",
    "september",
    "october",
    "november",
    "december",
];

impl CohortSpec {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::InvalidArgument(format!("month {month} not in 1..=12")));
        }
        if !(1..=9999).contains(&year) {
            return Err(Error::InvalidArgument(format!("year {year} out of range")));
        }
        Ok(CohortSpec { year, month })
    }

    pub fn month(&self) -> u32 {
        self.month
    }

    /// Lowercase English month name.
    pub fn month_name(&self) -> &'static str {
        MONTH_NAMES[self.month as usize - 1]
    }

    /// Whether `question` names this cohort's month as a whole word.
    pub fn matches(&self, question: &str) -> bool {
        let name = self.month_name();
        question
            .split(|c: char| !c.is_alphabetic())
            .any(|w| w.eq_ignore_ascii_case(name))
    }
}

impl fmt::Display for CohortSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for CohortSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (y, m) = s
            .trim()
            .split_once('-')
            .ok_or_else(|| Error::InvalidArgument(format!("cohort {s:?} is not YYYY-MM")))?;
        let year = y
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad year in cohort {s:?}")))?;
        let month = m
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad month in cohort {s:?}")))?;
        CohortSpec::new(year, month)
    }
}

impl Serialize for CohortSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CohortSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Count plus first two moments of volume and duration. Means are absent
/// for an empty set, standard deviations for fewer than two markets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub count: usize,
    pub volume_mean: Option<f64>,
    pub volume_std: Option<f64>,
    pub duration_mean_days: Option<f64>,
    pub duration_std_days: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowRejection {
    /// 1-based data row, not counting the header.
    pub row: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadReport {
    pub accepted: usize,
    pub rejected: Vec<RowRejection>,
}

/// Parses a UTC timestamp. Accepts RFC 3339 with any explicit offset and the
/// `YYYY-MM-DD HH:MM:SS[.fff] UTC` form used by warehouse exports. Naive
/// timestamps are rejected.
pub fn parse_timestamp(raw: &str) -> std::result::Result<DateTime<Utc>, String> {
    let s = raw.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Ok(t.with_timezone(&Utc));
    }
    if let Some(body) = s.strip_suffix(" UTC") {
        for fmt in ["%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S%.f"] {
            if let Ok(t) = NaiveDateTime::parse_from_str(body, fmt) {
                return Ok(t.and_utc());
            }
        }
    }
    if NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S%.f").is_ok()
        || NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S%.f").is_ok()
    {
        return Err(format!("timestamp {s:?} has no UTC offset"));
    }
    Err(format!("unparsable timestamp {s:?}"))
}

pub fn format_timestamp(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

fn parse_volume(raw: &str) -> std::result::Result<Decimal, String> {
    let s = raw.trim();
    let v = Decimal::from_str(s)
        .or_else(|_| Decimal::from_scientific(s))
        .map_err(|_| format!("unparsable volume_usd {s:?}"))?;
    if v.is_sign_negative() && !v.is_zero() {
        return Err(format!("negative volume_usd {s}"));
    }
    Ok(v)
}

fn column_positions<const N: usize>(
    headers: &csv::StringRecord,
    names: [&str; N],
) -> Result<[usize; N]> {
    let mut out = [0usize; N];
    for (slot, name) in out.iter_mut().zip(names) {
        *slot = headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))?;
    }
    Ok(out)
}

fn parse_market_row(row: &csv::StringRecord, cols: &[usize; 7]) -> std::result::Result<MarketRecord, String> {
    let field = |i: usize| row.get(cols[i]).unwrap_or("");
    let record = MarketRecord {
        event_market_name: field(0).to_string(),
        question: field(1).trim().to_string(),
        market_start_time: parse_timestamp(field(2)).map_err(|e| format!("market_start_time: {e}"))?,
        market_end_time: parse_timestamp(field(3)).map_err(|e| format!("market_end_time: {e}"))?,
        resolved_on_timestamp: parse_timestamp(field(4))
            .map_err(|e| format!("resolved_on_timestamp: {e}"))?,
        outcome: field(5).parse()?,
        volume_usd: parse_volume(field(6))?,
    };
    record.validate()?;
    Ok(record)
}

/// Reads a market export. Result order follows the file.
pub fn load_markets<R: Read>(source: R) -> Result<(Vec<MarketRecord>, LoadReport)> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(source);
    let cols = column_positions(reader.headers()?, MARKET_COLUMNS)?;
    let mut markets = Vec::new();
    let mut report = LoadReport::default();
    let mut seen = HashSet::new();
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                report.rejected.push(RowRejection { row: row_no, reason: e.to_string() });
                continue;
            }
        };
        match parse_market_row(&row, &cols) {
            Ok(m) => {
                if !seen.insert(m.question.clone()) {
                    return Err(Error::DuplicateQuestion { row: row_no, question: m.question });
                }
                markets.push(m);
            }
            Err(reason) => report.rejected.push(RowRejection { row: row_no, reason }),
        }
    }
    report.accepted = markets.len();
    Ok((markets, report))
}

pub fn load_markets_path(path: impl AsRef<Path>) -> Result<(Vec<MarketRecord>, LoadReport)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(Error::io(path))?;
    load_markets(file)
}

/// Writes markets in the same layout [`load_markets`] reads.
pub fn write_markets<W: Write>(markets: &[MarketRecord], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(MARKET_COLUMNS)?;
    for m in markets {
        w.write_record([
            m.event_market_name.as_str(),
            m.question.as_str(),
            &format_timestamp(&m.market_start_time),
            &format_timestamp(&m.market_end_time),
            &format_timestamp(&m.resolved_on_timestamp),
            m.outcome.as_str(),
            &m.volume_usd.to_string(),
        ])?;
    }
    w.flush().map_err(Error::io("<market writer>"))?;
    Ok(())
}

pub fn write_markets_path(markets: &[MarketRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(Error::io(path))?;
    write_markets(markets, file)
}

/// Reads a long-format price file (`question,timestamp,yes_price`).
/// Invalid rows and repeated timestamps are rejected per row.
pub fn load_price_series<R: Read>(source: R) -> Result<(SeriesIndex, LoadReport)> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(source);
    let cols = column_positions(reader.headers()?, PRICE_COLUMNS)?;
    let mut grouped: BTreeMap<String, BTreeMap<DateTime<Utc>, f64>> = BTreeMap::new();
    let mut report = LoadReport::default();
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        let parsed = row.map_err(|e| e.to_string()).and_then(|row| {
            let question = row.get(cols[0]).unwrap_or("").trim().to_string();
            if question.is_empty() {
                return Err("question is empty".to_string());
            }
            let ts = parse_timestamp(row.get(cols[1]).unwrap_or(""))?;
            let raw_price = row.get(cols[2]).unwrap_or("").trim();
            let price: f64 = raw_price
                .parse()
                .map_err(|_| format!("unparsable yes_price {raw_price:?}"))?;
            if !(0.0..=1.0).contains(&price) {
                return Err(format!("yes_price {price} outside [0, 1]"));
            }
            Ok((question, ts, price))
        });
        match parsed {
            Ok((question, ts, price)) => {
                match grouped.entry(question).or_default().entry(ts) {
                    std::collections::btree_map::Entry::Occupied(_) => report.rejected.push(RowRejection {
                        row: row_no,
                        reason: format!("repeated timestamp {}", format_timestamp(&ts)),
                    }),
                    std::collections::btree_map::Entry::Vacant(slot) => {
                        slot.insert(price);
                        report.accepted += 1;
                    }
                }
            }
            Err(reason) => report.rejected.push(RowRejection { row: row_no, reason }),
        }
    }
    let series = grouped
        .into_iter()
        .map(|(q, ticks)| {
            let ticks = ticks
                .into_iter()
                .map(|(timestamp, yes_price)| PriceTick { timestamp, yes_price })
                .collect();
            let s = PriceSeries::new(q.clone(), ticks)?;
            Ok((q, s))
        })
        .collect::<Result<_>>()?;
    Ok((series, report))
}

/// Loads price series from a single long file, or from every `.csv` file
/// in a directory (one market per file, same columns).
pub fn load_price_series_path(path: impl AsRef<Path>) -> Result<(SeriesIndex, LoadReport)> {
    let path = path.as_ref();
    if !path.is_dir() {
        let file = File::open(path).map_err(Error::io(path))?;
        return load_price_series(file);
    }
    let mut files: Vec<_> = std::fs::read_dir(path)
        .map_err(Error::io(path))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    files.sort();
    let mut all = SeriesIndex::new();
    let mut report = LoadReport::default();
    for file in files {
        let f = File::open(&file).map_err(Error::io(&file))?;
        let (series, sub) = load_price_series(f)?;
        report.accepted += sub.accepted;
        report.rejected.extend(sub.rejected);
        for (q, s) in series {
            if all.insert(q.clone(), s).is_some() {
                return Err(Error::DuplicateQuestion { row: 0, question: q });
            }
        }
    }
    Ok((all, report))
}

pub fn write_price_series<W: Write>(series: &SeriesIndex, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(PRICE_COLUMNS)?;
    for s in series.values() {
        for t in s.ticks() {
            w.write_record([
                s.question.as_str(),
                &format_timestamp(&t.timestamp),
                &t.yes_price.to_string(),
            ])?;
        }
    }
    w.flush().map_err(Error::io("<price writer>"))?;
    Ok(())
}

/// Keeps markets whose trading window is at least seven days. The boundary
/// is inclusive.
pub fn filter_binary_and_duration(markets: &[MarketRecord]) -> Vec<MarketRecord> {
    markets
        .iter()
        .filter(|m| m.duration_seconds() >= MIN_DURATION_SECONDS)
        .cloned()
        .collect()
}

/// Markets whose question names the cohort month.
pub fn slice_by_month(markets: &[MarketRecord], cohort: &CohortSpec) -> Vec<MarketRecord> {
    markets
        .iter()
        .filter(|m| cohort.matches(&m.question))
        .cloned()
        .collect()
}

/// Mean and sample standard deviation.
pub(crate) fn mean_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    let n = values.len();
    if n == 0 {
        return (None, None);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (Some(mean), None);
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (Some(mean), Some((ss / (n - 1) as f64).sqrt()))
}

pub fn summarize(markets: &[MarketRecord]) -> SummaryStats {
    let volumes: Vec<f64> = markets.iter().map(MarketRecord::volume_f64).collect();
    let durations: Vec<f64> = markets.iter().map(MarketRecord::duration_days).collect();
    let (volume_mean, volume_std) = mean_std(&volumes);
    let (duration_mean_days, duration_std_days) = mean_std(&durations);
    SummaryStats {
        count: markets.len(),
        volume_mean,
        volume_std,
        duration_mean_days,
        duration_std_days,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    const HEADER: &str = "event_market_name,question,market_start_time,market_end_time,resolved_on_timestamp,outcome,volume_usd\n";

    fn ts(d: u32) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2025, 4, d, 0, 0, 0).unwrap()
    }

    fn market(q: &str, start: DateTime<Utc>, end: DateTime<Utc>, volume: i64) -> MarketRecord {
        MarketRecord {
            event_market_name: "single market".into(),
            question: q.into(),
            market_start_time: start,
            market_end_time: end,
            resolved_on_timestamp: end,
            outcome: Outcome::Yes,
            volume_usd: Decimal::from(volume),
        }
    }

    #[test]
    fn loads_well_formed_row() {
        let csv = format!(
            "{HEADER}single market,Will X happen in April?,2025-03-01T00:00:00Z,2025-04-30T00:00:00Z,2025-04-20T12:00:00Z,YES,308000\n"
        );
        let (markets, report) = load_markets(csv.as_bytes()).unwrap();
        assert_eq!(report.accepted, 1);
        assert!(report.rejected.is_empty());
        assert_eq!(markets[0].outcome, Outcome::Yes);
        assert_eq!(markets[0].volume_usd, Decimal::from(308_000));
    }

    #[test]
    fn invalid_outcome_is_rejected_with_row_number() {
        let csv = format!(
            "{HEADER}single market,A?,2025-03-01T00:00:00Z,2025-04-30T00:00:00Z,2025-04-20T00:00:00Z,YES,1\n\
             single market,B?,2025-03-01T00:00:00Z,2025-04-30T00:00:00Z,2025-04-20T00:00:00Z,INVALID,1\n"
        );
        let (markets, report) = load_markets(csv.as_bytes()).unwrap();
        assert_eq!(markets.len(), 1);
        assert_eq!(report.rejected.len(), 1);
        assert_eq!(report.rejected[0].row, 2);
        assert!(report.rejected[0].reason.contains("INVALID"));
    }

    #[test]
    fn missing_column_is_fatal() {
        let csv = "question,market_start_time\nA?,2025-03-01T00:00:00Z\n";
        match load_markets(csv.as_bytes()) {
            Err(Error::MissingColumn(c)) => assert_eq!(c, "event_market_name"),
            other => panic!("expected missing column, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_question_is_fatal() {
        let row = "single market,A?,2025-03-01T00:00:00Z,2025-04-30T00:00:00Z,2025-04-20T00:00:00Z,NO,1\n";
        let csv = format!("{HEADER}{row}{row}");
        assert!(matches!(
            load_markets(csv.as_bytes()),
            Err(Error::DuplicateQuestion { row: 2, .. })
        ));
    }

    #[test]
    fn naive_timestamps_are_rejected() {
        assert!(parse_timestamp("2025-04-01 00:00:00").unwrap_err().contains("no UTC offset"));
        assert!(parse_timestamp("2025-04-01T00:00:00").is_err());
        assert_eq!(parse_timestamp("2025-04-01 00:00:00.000 UTC").unwrap(), ts(1));
        assert_eq!(parse_timestamp("2025-04-01T02:00:00+02:00").unwrap(), ts(1));
    }

    #[test]
    fn bad_rows_do_not_abort_the_load() {
        let csv = format!(
            "{HEADER}single market,  ,2025-03-01T00:00:00Z,2025-04-30T00:00:00Z,2025-04-20T00:00:00Z,NO,1\n\
             single market,B?,2025-05-01T00:00:00Z,2025-04-30T00:00:00Z,2025-05-20T00:00:00Z,NO,1\n\
             single market,C?,2025-03-01T00:00:00Z,2025-04-30T00:00:00Z,2025-02-20T00:00:00Z,NO,1\n\
             single market,D?,2025-03-01T00:00:00Z,2025-04-30T00:00:00Z,2025-04-20T00:00:00Z,NO,-5\n\
             single market,E?,2025-03-01T00:00:00Z,2025-04-30T00:00:00Z,2025-04-20T00:00:00Z,NO,12.50\n"
        );
        let (markets, report) = load_markets(csv.as_bytes()).unwrap();
        assert_eq!(markets.len(), 1);
        assert_eq!(markets[0].volume_usd.to_string(), "12.50");
        let rows: Vec<usize> = report.rejected.iter().map(|r| r.row).collect();
        assert_eq!(rows, vec![1, 2, 3, 4]);
    }

    #[test]
    fn duration_boundary_is_inclusive() {
        let start = ts(1);
        let exactly = market("a", start, start + chrono::Duration::seconds(MIN_DURATION_SECONDS), 1);
        let short = market("b", start, start + chrono::Duration::minutes(6 * 1440 + 1296), 1);
        let long = market("c", start, start + chrono::Duration::minutes((41.3 * 1440.0) as i64), 1);
        let just_under = market("d", start, start + chrono::Duration::seconds(MIN_DURATION_SECONDS - 1), 1);
        let kept = filter_binary_and_duration(&[exactly, short, long, just_under]);
        let qs: Vec<_> = kept.iter().map(|m| m.question.as_str()).collect();
        assert_eq!(qs, vec!["a", "c"]);
    }

    #[test]
    fn month_matching_is_whole_word_and_case_insensitive() {
        let may = CohortSpec::new(2025, 5).unwrap();
        let june = CohortSpec::new(2025, 6).unwrap();
        let july = CohortSpec::new(2025, 7).unwrap();
        assert!(may.matches("Will Trump increase tariffs on Canada before May?"));
        assert!(!may.matches("Will X happen in April?"));
        assert!(!may.matches("Will the mayor resign?"));
        assert!(may.matches("Deal by MAY 31?"));
        let q = "Fed decision in June or July?";
        assert!(june.matches(q) && july.matches(q) && !may.matches(q));
    }

    #[test]
    fn cohort_parses_and_displays() {
        let c: CohortSpec = "2025-04".parse().unwrap();
        assert_eq!(c.to_string(), "2025-04");
        assert_eq!(c.month_name(), "april");
        assert!("2025-13".parse::<CohortSpec>().is_err());
        assert!("April".parse::<CohortSpec>().is_err());
    }

    #[test]
    fn summary_moments() {
        let start = ts(1);
        let single = [market("a", start, start + chrono::Duration::days(10), 5)];
        let s = summarize(&single);
        assert_eq!(s.count, 1);
        assert_eq!(s.duration_mean_days, Some(10.0));
        assert_eq!(s.duration_std_days, None);
        assert_eq!(s.volume_std, None);

        let two = [
            market("a", start, start + chrono::Duration::days(10), 100),
            market("b", start, start + chrono::Duration::days(10), 300),
        ];
        let s = summarize(&two);
        assert_eq!(s.volume_mean, Some(200.0));
        // sqrt(((100-200)^2 + (300-200)^2) / 1)
        assert!((s.volume_std.unwrap() - 141.421_356_237_309_5).abs() < 1e-9);

        let empty = summarize(&[]);
        assert_eq!(empty.count, 0);
        assert_eq!(empty.volume_mean, None);
    }

    #[test]
    fn price_series_lookup() {
        let s = PriceSeries::new(
            "q",
            vec![
                PriceTick { timestamp: ts(3), yes_price: 0.3 },
                PriceTick { timestamp: ts(1), yes_price: 0.1 },
                PriceTick { timestamp: ts(2), yes_price: 0.2 },
            ],
        )
        .unwrap();
        assert_eq!(s.first_after(ts(1)).unwrap().yes_price, 0.2);
        assert_eq!(s.first_after(ts(1) - chrono::Duration::seconds(1)).unwrap().yes_price, 0.1);
        assert!(s.first_after(ts(3)).is_none());
        assert_eq!(s.last().unwrap().yes_price, 0.3);
        assert!(PriceSeries::new("q", vec![PriceTick { timestamp: ts(1), yes_price: 1.2 }]).is_err());
    }

    #[test]
    fn price_file_rejects_bad_rows() {
        let csv = "question,timestamp,yes_price\n\
                   A?,2025-04-02T00:00:00Z,0.5\n\
                   A?,2025-04-01T00:00:00Z,0.4\n\
                   A?,2025-04-01T00:00:00Z,0.6\n\
                   B?,2025-04-01T00:00:00Z,1.5\n\
                   B?,2025-04-01,0.5\n";
        let (series, report) = load_price_series(csv.as_bytes()).unwrap();
        assert_eq!(series.len(), 1);
        let a = &series["A?"];
        assert_eq!(a.ticks().len(), 2);
        assert_eq!(a.ticks()[0].yes_price, 0.4);
        assert_eq!(report.rejected.iter().map(|r| r.row).collect::<Vec<_>>(), vec![3, 4, 5]);
    }
}
