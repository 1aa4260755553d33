//! Planted synthetic cohorts.
//!
//! Markets are grouped into topics that share a latent outcome, so related
//! pairs exist and their realized relation is known. Every question names
//! the cohort month. Price paths drift from an uninformed start toward the
//! realized outcome and end decisively near 0 or 1.

use std::path::Path;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rust_decimal::Decimal;

use crate::clustering::{cluster_questions, EmbedOptions, HashedTermFrequency};
use crate::error::{Error, Result};
use crate::transduction::{MockScript, SimulatedGateway};
use crate::market_data::{
    filter_binary_and_duration, write_markets_path, write_price_series, CohortSpec, MarketRecord, Outcome, PriceSeries, PriceTick,
    SeriesIndex,
};

const SUBJECTS: &[&str] = &[
    "Trump increase tariffs on Canada",
    "Trump remove tariffs on Mexico",
    "the EU impose tariffs on the U.S.",
    "the Fed cut interest rates",
    "US CPI inflation come in above 3%",
    "Bitcoin close above $100k",
    "Ethereum close above $4,000",
    "the Lakers win the NBA Finals",
    "Real Madrid win the Champions League",
    "Russia and Ukraine agree to a ceasefire",
    "Israel and Iran sign a truce",
    "OpenAI release GPT-5",
    "Apple announce a foldable iPhone",
    "Tesla report record quarterly earnings",
    "Nvidia beat revenue estimates",
    "the S&P 500 close above 6,000",
    "a new Pope be elected",
    "the Senate pass the budget bill",
    "Taylor Swift release a new album",
    "Zohran Mamdani win the NYC mayoral primary",
    "Elon Musk leave DOGE",
    "Google be fined by the EU",
    "gold hit an all-time high",
    "Solana ETF be approved",
];

/// Market with fixed April timestamps, for unit tests.
pub fn simple_market(question: &str, outcome: Outcome) -> MarketRecord {
    MarketRecord {
        event_market_name: "single market".into(),
        question: question.into(),
        market_start_time: Utc.with_ymd_and_hms(2025, 3, 1, 0, 0, 0).unwrap(),
        market_end_time: Utc.with_ymd_and_hms(2025, 4, 30, 0, 0, 0).unwrap(),
        resolved_on_timestamp: Utc.with_ymd_and_hms(2025, 4, 20, 0, 0, 0).unwrap(),
        outcome,
        volume_usd: Decimal::from(1000),
    }
}

#[derive(Debug, Clone)]
pub struct FixtureSpec {
    pub cohort: CohortSpec,
    pub market_count: usize,
    /// Markets per topic; consecutive markets share a latent outcome.
    pub topic_size: usize,
    /// Probability that a market deviates from its topic's latent outcome.
    pub noise: f64,
    /// Fraction of markets open for less than seven days.
    pub short_fraction: f64,
    pub seed: u64,
}

impl FixtureSpec {
    pub fn new(cohort: CohortSpec, market_count: usize, seed: u64) -> Self {
        FixtureSpec {
            cohort,
            market_count,
            topic_size: 10,
            noise: 0.2,
            short_fraction: 0.0,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CohortFixture {
    pub markets: Vec<MarketRecord>,
    pub series: SeriesIndex,
}

impl CohortFixture {
    /// Writes `markets.csv` and `prices.csv` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(Error::io(dir))?;
        write_markets_path(&self.markets, dir.join("markets.csv"))?;
        let path = dir.join("prices.csv");
        let f = std::fs::File::create(&path).map_err(Error::io(&path))?;
        write_price_series(&self.series, f)
    }
}

fn month_title(c: &CohortSpec) -> String {
    let n = c.month_name();
    let mut chars = n.chars();
    chars
        .next()
        .map(|f| f.to_ascii_uppercase().to_string() + chars.as_str())
        .unwrap_or_default()
}

fn price_path(rng: &mut ChaCha8Rng, start: DateTime<Utc>, resolved: DateTime<Utc>, outcome: Outcome) -> Vec<PriceTick> {
    let target = match outcome {
        Outcome::Yes => 0.97,
        Outcome::No => 0.03,
    };
    let total = (resolved - start).num_hours().max(2);
    let initial: f64 = rng.gen_range(0.2..0.8);
    let mut ticks = Vec::new();
    let mut h = 6;
    while h < total - 1 {
        let frac = h as f64 / total as f64;
        let drift = initial + (target - initial) * frac.powf(1.5);
        let noise: f64 = rng.gen_range(-0.08..0.08) * (1.0 - frac);
        let p = ((drift + noise).clamp(0.01, 0.99) * 1000.0).round() / 1000.0;
        ticks.push(PriceTick { timestamp: start + Duration::hours(h), yes_price: p });
        h += 12;
    }
    ticks.push(PriceTick { timestamp: resolved - Duration::hours(1), yes_price: target });
    ticks
}

/// Generates a cohort deterministically from `spec.seed`.
pub fn generate_cohort(spec: &FixtureSpec) -> CohortFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let month = month_title(&spec.cohort);
    let month_start = Utc
        .with_ymd_and_hms(spec.cohort.year, spec.cohort.month(), 1, 0, 0, 0)
        .unwrap();
    let topic_size = spec.topic_size.max(1);
    let mut markets = Vec::with_capacity(spec.market_count);
    let mut series = SeriesIndex::new();
    let mut latent = Outcome::Yes;
    for i in 0..spec.market_count {
        let topic = i / topic_size;
        let slot = i % topic_size;
        if slot == 0 {
            latent = if rng.gen_bool(0.5) { Outcome::Yes } else { Outcome::No };
        }
        let subject = SUBJECTS[topic % SUBJECTS.len()];
        let round = topic / SUBJECTS.len();
        let day = 1 + (slot * 27 / topic_size) as u32 + (round as u32 % 2);
        let question = if round == 0 {
            format!("Will {subject} by {month} {day}?")
        } else {
            format!("Will {subject} by {month} {day} (series {})?", round + 1)
        };
        let outcome = if rng.gen_bool(spec.noise.clamp(0.0, 1.0)) { latent.flip() } else { latent };
        let resolved = month_start + Duration::days(i64::from(day) - 1) + Duration::hours(rng.gen_range(1..23));
        let short = rng.gen_bool(spec.short_fraction.clamp(0.0, 1.0));
        let end = resolved + Duration::hours(rng.gen_range(0..72));
        let start = if short {
            end - Duration::hours(rng.gen_range(24..160))
        } else {
            end - Duration::days(rng.gen_range(8..90))
        };
        let start = start.min(resolved - Duration::hours(2));
        let volume = Decimal::new(rng.gen_range(1_000_000..200_000_000), 2);
        let ticks = price_path(&mut rng, start, resolved, outcome);
        series.insert(
            question.clone(),
            PriceSeries::new(question.clone(), ticks).expect("generated ticks are valid"),
        );
        markets.push(MarketRecord {
            event_market_name: "single market".into(),
            question,
            market_start_time: start,
            market_end_time: end,
            resolved_on_timestamp: resolved,
            outcome,
            volume_usd: volume,
        });
    }
    CohortFixture { markets, series }
}

/// Records a scripted mock for `markets` (already one cohort) that answers
/// like a [`SimulatedGateway`] with the given accuracy, covering the
/// clusters the built-in embedder produces under each seed.
pub fn record_cohort_script(
    markets: &[MarketRecord],
    seeds: impl IntoIterator<Item = u64>,
    accuracy: f64,
) -> Result<MockScript> {
    let kept = filter_binary_and_duration(markets);
    let mut questions: Vec<String> = kept.iter().map(|m| m.question.clone()).collect();
    questions.sort();
    let outcomes = kept.iter().map(|m| (m.question.clone(), m.outcome)).collect();
    let gateway = SimulatedGateway::new(outcomes, accuracy);
    let embedder = HashedTermFrequency::default();
    let mut script = MockScript::default();
    for seed in seeds {
        let clusters: Vec<Vec<String>> = cluster_questions(&questions, &embedder, EmbedOptions::default(), seed)?
            .into_iter()
            .map(|c| c.questions)
            .collect();
        let recorded = MockScript::record(&gateway, &clusters, seed)?;
        for e in recorded.entries {
            if !script.entries.iter().any(|x| x.template == e.template && x.questions == e.questions) {
                script.entries.push(e);
            }
        }
    }
    Ok(script)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_data::{filter_binary_and_duration, slice_by_month};

    #[test]
    fn fixture_is_valid_and_deterministic() {
        let spec = FixtureSpec::new(CohortSpec::new(2025, 4).unwrap(), 217, 1);
        let a = generate_cohort(&spec);
        let b = generate_cohort(&spec);
        assert_eq!(a.markets, b.markets);
        assert_eq!(a.markets.len(), 217);
        for m in &a.markets {
            m.validate().unwrap();
            let s = &a.series[&m.question];
            assert!(s.last().unwrap().timestamp < m.resolved_on_timestamp);
        }
        let unique: std::collections::BTreeSet<_> = a.markets.iter().map(|m| &m.question).collect();
        assert_eq!(unique.len(), 217);
        assert_eq!(filter_binary_and_duration(&a.markets).len(), 217);
        assert_eq!(slice_by_month(&a.markets, &spec.cohort).len(), 217);
    }

    #[test]
    fn recorded_script_replays_the_simulator() {
        let spec = FixtureSpec::new(CohortSpec::new(2025, 4).unwrap(), 30, 3);
        let f = generate_cohort(&spec);
        let script = record_cohort_script(&f.markets, [0, 1], 0.7).unwrap();
        // 3 clusters per seed, two templates each, shared clusters once
        assert!(script.entries.len() >= 6 && script.entries.len() <= 12, "{}", script.entries.len());
        assert_eq!(script, record_cohort_script(&f.markets, [0, 1], 0.7).unwrap());
    }

    #[test]
    fn short_markets_are_planted() {
        let mut spec = FixtureSpec::new(CohortSpec::new(2025, 5).unwrap(), 100, 2);
        spec.short_fraction = 0.3;
        let f = generate_cohort(&spec);
        let kept = filter_binary_and_duration(&f.markets).len();
        assert!(kept < 100 && kept > 50, "{kept}");
    }
}
