#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Duration, TimeZone, Utc};
use polylink::market_data::{CohortSpec, MarketRecord, Outcome, PriceSeries, PriceTick, SeriesIndex};
use polylink::synth::{generate_cohort, record_cohort_script, CohortFixture, FixtureSpec};
use polylink::transduction::MockScript;

pub fn day(d: f64) -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2025, 4, 1, 0, 0, 0).unwrap() + Duration::milliseconds((d * 86_400_000.0) as i64)
}

pub fn market(q: &str, resolved: DateTime<Utc>, outcome: Outcome) -> MarketRecord {
    MarketRecord {
        event_market_name: "single market".into(),
        question: q.into(),
        market_start_time: day(-40.0),
        market_end_time: day(60.0),
        resolved_on_timestamp: resolved,
        outcome,
        volume_usd: 1000.into(),
    }
}

pub fn series(q: &str, ticks: &[(f64, f64)]) -> PriceSeries {
    PriceSeries::new(
        q,
        ticks
            .iter()
            .map(|&(d, p)| PriceTick { timestamp: day(d), yes_price: p })
            .collect(),
    )
    .unwrap()
}

pub fn april() -> CohortSpec {
    CohortSpec::new(2025, 4).unwrap()
}

pub fn may() -> CohortSpec {
    CohortSpec::new(2025, 5).unwrap()
}

/// April (120 markets) and May (90 markets) combined into one dataset.
pub fn two_cohorts() -> CohortFixture {
    let a = generate_cohort(&FixtureSpec::new(april(), 120, 11));
    let mut spec = FixtureSpec::new(may(), 90, 12);
    spec.short_fraction = 0.1;
    let b = generate_cohort(&spec);
    let mut markets = a.markets;
    markets.extend(b.markets);
    let mut series: SeriesIndex = a.series;
    series.extend(b.series);
    CohortFixture { markets, series }
}

/// Writes the two-cohort dataset and a mock script recorded for `seeds`.
/// Returns `(markets.csv, prices.csv, mock.json)`.
pub fn write_dataset(dir: &Path, seeds: &[u64]) -> (PathBuf, PathBuf, PathBuf) {
    let fixture = two_cohorts();
    fixture.write(dir).unwrap();
    let mut script = MockScript::default();
    for cohort in [april(), may()] {
        let slice = polylink::market_data::slice_by_month(&fixture.markets, &cohort);
        let s = record_cohort_script(&slice, seeds.iter().copied(), 0.7).unwrap();
        script.entries.extend(s.entries);
    }
    let mock = dir.join("mock.json");
    script.save(&mock).unwrap();
    (dir.join("markets.csv"), dir.join("prices.csv"), mock)
}

/// Relative path to file bytes for every file under `root`.
pub fn snapshot(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}
