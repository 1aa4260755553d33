//! Leader-follower backtest over predicted pairs.
//!
//! For each eligible pair the market that resolves first is the leader.
//! Once it resolves, one unit of the follower's implied leg is bought at the
//! first later tick: YES when the leader resolved YES and the pair was
//! predicted to move together, or NO and predicted to diverge; NO
//! otherwise. A trade pays `1 - entry_price` if the bought leg matches the
//! follower's resolution and loses `entry_price` if not.

use std::collections::BTreeMap;
use std::io::Write;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{trial_stats, EvaluatedRelation, TrialStats};
use crate::market_data::{MarketIndex, MarketRecord, Outcome, PriceTick, SeriesIndex, SECONDS_PER_DAY};

/// Absorbs binary rounding (e.g. `1 - 0.9`) at the filter boundaries so that
/// prices exactly on a cutoff stay tradable.
const BOUNDARY_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Side {
    BuyYes,
    BuyNo,
}

impl Side {
    /// Price of this leg given the YES price.
    pub fn leg_price(self, yes_price: f64) -> f64 {
        match self {
            Side::BuyYes => yes_price,
            Side::BuyNo => 1.0 - yes_price,
        }
    }

    pub fn wins(self, outcome: Outcome) -> bool {
        matches!((self, outcome), (Side::BuyYes, Outcome::Yes) | (Side::BuyNo, Outcome::No))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SkipReason {
    None,
    NoTickAfterResolution,
    EntryTooExtreme,
    FinalPriceAmbiguous,
    LeaderTie,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BacktestConfig {
    /// Skip when the bought leg is priced below this or above `1 - cutoff`.
    pub entry_cutoff: f64,
    /// Require the follower's last YES price within this of 0 or 1.
    pub final_price_cutoff: f64,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        BacktestConfig { entry_cutoff: 0.1, final_price_cutoff: 0.1 }
    }
}

impl BacktestConfig {
    pub fn entry_too_extreme(&self, entry_price: f64) -> bool {
        entry_price < self.entry_cutoff - BOUNDARY_EPS || entry_price > 1.0 - self.entry_cutoff + BOUNDARY_EPS
    }

    pub fn final_price_decisive(&self, yes_price: f64) -> bool {
        yes_price <= self.final_price_cutoff + BOUNDARY_EPS
            || yes_price >= 1.0 - self.final_price_cutoff - BOUNDARY_EPS
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeDecision {
    pub leader_question: String,
    pub follower_question: String,
    pub side: Side,
    pub entry_time: DateTime<Utc>,
    pub entry_price: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeRecord {
    pub cluster_id: usize,
    /// Leader and follower, or the relation's own order on a tie.
    pub leader_question: String,
    pub follower_question: String,
    /// Present once a side and entry tick were found, even if a later
    /// filter skipped the trade.
    pub decision: Option<TradeDecision>,
    pub pnl: Option<f64>,
    pub skip_reason: SkipReason,
    pub resolution_gap_days: f64,
    /// The follower had no price series at all.
    pub data_gap: bool,
}

impl TradeRecord {
    pub fn executed(&self) -> bool {
        self.skip_reason == SkipReason::None
    }
}

/// Orders a pair by resolution time; `None` on a tie.
pub fn select_leader<'a>(a: &'a MarketRecord, b: &'a MarketRecord) -> Option<(&'a MarketRecord, &'a MarketRecord)> {
    match a.resolved_on_timestamp.cmp(&b.resolved_on_timestamp) {
        std::cmp::Ordering::Less => Some((a, b)),
        std::cmp::Ordering::Greater => Some((b, a)),
        std::cmp::Ordering::Equal => None,
    }
}

pub fn decide_side(leader_outcome: Outcome, is_same_outcome: bool) -> Side {
    match (leader_outcome, is_same_outcome) {
        (Outcome::Yes, true) | (Outcome::No, false) => Side::BuyYes,
        _ => Side::BuyNo,
    }
}

pub fn resolution_gap_days(leader: &MarketRecord, follower: &MarketRecord) -> f64 {
    let d = follower.resolved_on_timestamp - leader.resolved_on_timestamp;
    d.num_milliseconds() as f64 / 1000.0 / SECONDS_PER_DAY
}

/// Executes one relation. The entry tick must fall strictly after the
/// leader's resolution and strictly before the follower's.
pub fn execute_trade(
    relation: &EvaluatedRelation,
    records: &MarketIndex,
    series: &SeriesIndex,
    config: &BacktestConfig,
) -> Result<TradeRecord> {
    let r = &relation.relation;
    let lookup = |q: &str| {
        records
            .get(q)
            .ok_or_else(|| Error::Integrity(format!("no market record for {q:?}")))
    };
    let (mi, mj) = (lookup(&r.question_i)?, lookup(&r.question_j)?);
    let Some((leader, follower)) = select_leader(mi, mj) else {
        return Ok(TradeRecord {
            cluster_id: relation.cluster_id,
            leader_question: mi.question.clone(),
            follower_question: mj.question.clone(),
            decision: None,
            pnl: None,
            skip_reason: SkipReason::LeaderTie,
            resolution_gap_days: 0.0,
            data_gap: false,
        });
    };
    let mut record = TradeRecord {
        cluster_id: relation.cluster_id,
        leader_question: leader.question.clone(),
        follower_question: follower.question.clone(),
        decision: None,
        pnl: None,
        skip_reason: SkipReason::NoTickAfterResolution,
        resolution_gap_days: resolution_gap_days(leader, follower),
        data_gap: false,
    };
    let Some(follower_series) = series.get(&follower.question).filter(|s| !s.is_empty()) else {
        record.data_gap = true;
        return Ok(record);
    };
    let entry = match follower_series.first_after(leader.resolved_on_timestamp) {
        Some(t) if t.timestamp < follower.resolved_on_timestamp => t,
        _ => return Ok(record),
    };
    let side = decide_side(leader.outcome, r.is_same_outcome);
    let entry_price = side.leg_price(entry.yes_price);
    record.decision = Some(TradeDecision {
        leader_question: leader.question.clone(),
        follower_question: follower.question.clone(),
        side,
        entry_time: entry.timestamp,
        entry_price,
    });
    if config.entry_too_extreme(entry_price) {
        record.skip_reason = SkipReason::EntryTooExtreme;
        return Ok(record);
    }
    let last = follower_series.last().expect("series is non-empty");
    if !config.final_price_decisive(last.yes_price) {
        record.skip_reason = SkipReason::FinalPriceAmbiguous;
        return Ok(record);
    }
    record.skip_reason = SkipReason::None;
    record.pnl = Some(if side.wins(follower.outcome) {
        1.0 - entry_price
    } else {
        -entry_price
    });
    Ok(record)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub trade_count: usize,
    pub skipped_count: usize,
    pub skip_counts: BTreeMap<SkipReason, usize>,
    pub data_gaps: usize,
    pub total_invested: f64,
    pub total_gain: f64,
    pub roi: Option<f64>,
    /// Leader-to-follower resolution delay in days over non-tied pairs;
    /// absent when there are none.
    pub delay_stats: Option<TrialStats>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestRun {
    pub trades: Vec<TradeRecord>,
    pub report: BacktestReport,
}

/// Aggregates trade records. Sums run in (leader, follower) order so the
/// report does not depend on the order trades were produced in.
pub fn summarize_trades(trades: &[TradeRecord]) -> BacktestReport {
    let mut sorted: Vec<&TradeRecord> = trades.iter().collect();
    sorted.sort_by(|a, b| {
        (&a.leader_question, &a.follower_question).cmp(&(&b.leader_question, &b.follower_question))
    });
    let mut skip_counts = BTreeMap::new();
    let (mut invested, mut gain, mut executed) = (0.0, 0.0, 0);
    let mut gaps = Vec::new();
    for t in &sorted {
        if t.skip_reason != SkipReason::LeaderTie {
            gaps.push(t.resolution_gap_days);
        }
        if let (SkipReason::None, Some(d), Some(pnl)) = (t.skip_reason, &t.decision, t.pnl) {
            executed += 1;
            invested += d.entry_price;
            gain += pnl;
        } else {
            *skip_counts.entry(t.skip_reason).or_insert(0) += 1;
        }
    }
    BacktestReport {
        trade_count: executed,
        skipped_count: trades.len() - executed,
        skip_counts,
        data_gaps: trades.iter().filter(|t| t.data_gap).count(),
        total_invested: invested,
        total_gain: gain,
        roi: (invested > 0.0).then(|| gain / invested),
        delay_stats: trial_stats(&gaps).ok(),
    }
}

/// Runs every eligible relation through [`execute_trade`].
pub fn run_backtest(
    evaluated: &[EvaluatedRelation],
    records: &MarketIndex,
    series: &SeriesIndex,
    config: &BacktestConfig,
) -> Result<BacktestRun> {
    let trades = evaluated
        .iter()
        .filter(|e| e.eligible)
        .map(|e| execute_trade(e, records, series, config))
        .collect::<Result<Vec<_>>>()?;
    let report = summarize_trades(&trades);
    Ok(BacktestRun { trades, report })
}

#[derive(Debug, Serialize)]
struct TradeRow<'a> {
    cluster_id: usize,
    leader_question: &'a str,
    follower_question: &'a str,
    side: Option<Side>,
    entry_time: Option<String>,
    entry_price: Option<f64>,
    pnl: Option<f64>,
    skip_reason: SkipReason,
    resolution_gap_days: f64,
    data_gap: bool,
}

pub fn write_trades_csv<W: Write>(trades: &[TradeRecord], sink: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(sink);
    w.write_record([
        "cluster_id",
        "leader_question",
        "follower_question",
        "side",
        "entry_time",
        "entry_price",
        "pnl",
        "skip_reason",
        "resolution_gap_days",
        "data_gap",
    ])?;
    for t in trades {
        w.serialize(TradeRow {
            cluster_id: t.cluster_id,
            leader_question: &t.leader_question,
            follower_question: &t.follower_question,
            side: t.decision.as_ref().map(|d| d.side),
            entry_time: t.decision.as_ref().map(|d| crate::market_data::format_timestamp(&d.entry_time)),
            entry_price: t.decision.as_ref().map(|d| d.entry_price),
            pnl: t.pnl,
            skip_reason: t.skip_reason,
            resolution_gap_days: t.resolution_gap_days,
            data_gap: t.data_gap,
        })?;
    }
    w.flush().map_err(Error::io("<trades writer>"))?;
    Ok(())
}

#[derive(Debug, Deserialize)]
struct OwnedTradeRow {
    cluster_id: usize,
    leader_question: String,
    follower_question: String,
    side: Option<Side>,
    entry_time: Option<String>,
    entry_price: Option<f64>,
    pnl: Option<f64>,
    skip_reason: SkipReason,
    resolution_gap_days: f64,
    data_gap: bool,
}

/// Reads back a file written by [`write_trades_csv`].
pub fn read_trades_csv<R: std::io::Read>(source: R) -> Result<Vec<TradeRecord>> {
    let mut reader = csv::Reader::from_reader(source);
    reader
        .deserialize::<OwnedTradeRow>()
        .map(|row| {
            let r = row?;
            let decision = match (r.side, r.entry_time, r.entry_price) {
                (Some(side), Some(t), Some(entry_price)) => Some(TradeDecision {
                    leader_question: r.leader_question.clone(),
                    follower_question: r.follower_question.clone(),
                    side,
                    entry_time: crate::market_data::parse_timestamp(&t).map_err(Error::InvalidArgument)?,
                    entry_price,
                }),
                _ => None,
            };
            Ok(TradeRecord {
                cluster_id: r.cluster_id,
                leader_question: r.leader_question,
                follower_question: r.follower_question,
                decision,
                pnl: r.pnl,
                skip_reason: r.skip_reason,
                resolution_gap_days: r.resolution_gap_days,
                data_gap: r.data_gap,
            })
        })
        .collect()
}

/// Chart data for one executed trade.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradePlot {
    pub leader_question: String,
    pub follower_question: String,
    pub leader_series: Vec<PriceTick>,
    pub follower_series: Vec<PriceTick>,
    pub leader_resolution_time: DateTime<Utc>,
    pub entry_time: DateTime<Utc>,
    pub entry_price: f64,
    pub side: Side,
}

pub fn plot_data(trade: &TradeRecord, records: &MarketIndex, series: &SeriesIndex) -> Option<TradePlot> {
    let d = trade.decision.as_ref().filter(|_| trade.executed())?;
    let ticks = |q: &str| series.get(q).map(|s| s.ticks().to_vec()).unwrap_or_default();
    Some(TradePlot {
        leader_question: d.leader_question.clone(),
        follower_question: d.follower_question.clone(),
        leader_series: ticks(&d.leader_question),
        follower_series: ticks(&d.follower_question),
        leader_resolution_time: records.get(&d.leader_question)?.resolved_on_timestamp,
        entry_time: d.entry_time,
        entry_price: d.entry_price,
        side: d.side,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_data::PriceSeries;
    use crate::transduction::{Category, MarketRelation};
    use chrono::{Duration, TimeZone};

    fn day(d: i64) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2025, 4, 1, 0, 0, 0).unwrap() + Duration::days(d)
    }

    fn market(q: &str, resolved: DateTime<Utc>, outcome: Outcome) -> MarketRecord {
        MarketRecord {
            event_market_name: "single market".into(),
            question: q.into(),
            market_start_time: day(-30),
            market_end_time: day(60),
            resolved_on_timestamp: resolved,
            outcome,
            volume_usd: 1000.into(),
        }
    }

    fn relation(qi: &str, qj: &str, same: bool) -> EvaluatedRelation {
        EvaluatedRelation {
            relation: MarketRelation {
                question_i: qi.into(),
                question_j: qj.into(),
                is_same_outcome: same,
                confidence_score: 0.9,
                rationale: "r".into(),
            },
            cluster_id: 0,
            category: Category::Other,
            outcome_i: Outcome::Yes,
            outcome_j: Outcome::Yes,
            ground_truth_same: true,
            is_correct: true,
            eligible: true,
        }
    }

    fn series(q: &str, ticks: &[(i64, f64)]) -> (String, PriceSeries) {
        let ticks = ticks
            .iter()
            .map(|&(d, p)| PriceTick { timestamp: day(d), yes_price: p })
            .collect();
        (q.to_string(), PriceSeries::new(q, ticks).unwrap())
    }

    #[test]
    fn leader_is_the_earlier_resolver() {
        let a = market("A", day(9), Outcome::Yes);
        let b = market("B", day(21), Outcome::Yes);
        assert_eq!(select_leader(&a, &b).unwrap().0.question, "A");
        assert_eq!(select_leader(&b, &a).unwrap().0.question, "A");
        let c = market("C", day(9), Outcome::No);
        assert!(select_leader(&a, &c).is_none());
        assert!((resolution_gap_days(&a, &b) - 12.0).abs() < 1e-12);
    }

    #[test]
    fn side_rule_is_total() {
        assert_eq!(decide_side(Outcome::Yes, true), Side::BuyYes);
        assert_eq!(decide_side(Outcome::No, false), Side::BuyYes);
        assert_eq!(decide_side(Outcome::Yes, false), Side::BuyNo);
        assert_eq!(decide_side(Outcome::No, true), Side::BuyNo);
    }

    #[test]
    fn correct_same_outcome_trade_gains_one_minus_entry() {
        let records = crate::market_data::index_markets(&[
            market("L", day(10), Outcome::Yes),
            market("F", day(20), Outcome::Yes),
        ]);
        let s: SeriesIndex = [series("F", &[(5, 0.6), (11, 0.75), (19, 0.97)])].into_iter().collect();
        let t = execute_trade(&relation("F", "L", true), &records, &s, &BacktestConfig::default()).unwrap();
        assert_eq!(t.skip_reason, SkipReason::None);
        let d = t.decision.unwrap();
        assert_eq!((d.side, d.entry_price, d.entry_time), (Side::BuyYes, 0.75, day(11)));
        assert_eq!(t.pnl, Some(0.25));
        assert_eq!(t.resolution_gap_days, 10.0);
    }

    #[test]
    fn losing_trade_costs_entry_price() {
        let records = crate::market_data::index_markets(&[
            market("L", day(10), Outcome::Yes),
            market("F", day(20), Outcome::No),
        ]);
        let s: SeriesIndex = [series("F", &[(11, 0.30), (19, 0.02)])].into_iter().collect();
        let t = execute_trade(&relation("L", "F", true), &records, &s, &BacktestConfig::default()).unwrap();
        assert_eq!(t.pnl, Some(-0.30));
    }

    #[test]
    fn skip_paths() {
        let cfg = BacktestConfig::default();
        let records = crate::market_data::index_markets(&[
            market("L", day(10), Outcome::Yes),
            market("F", day(20), Outcome::Yes),
            market("T", day(10), Outcome::Yes),
        ]);
        let run = |s: &[(i64, f64)], rel: EvaluatedRelation| {
            let idx: SeriesIndex = [series("F", s)].into_iter().collect();
            execute_trade(&rel, &records, &idx, &cfg).unwrap()
        };
        // BUY_NO at yes 0.95 -> leg 0.05
        let t = run(&[(11, 0.95), (19, 0.99)], relation("L", "F", false));
        assert_eq!(t.skip_reason, SkipReason::EntryTooExtreme);
        assert!((t.decision.unwrap().entry_price - 0.05).abs() < 1e-12);
        assert_eq!(t.pnl, None);

        let t = run(&[(11, 0.5), (19, 0.5)], relation("L", "F", true));
        assert_eq!(t.skip_reason, SkipReason::FinalPriceAmbiguous);

        let t = run(&[(11, 0.5)], relation("L", "T", true));
        assert_eq!(t.skip_reason, SkipReason::LeaderTie);

        let t = run(&[(2, 0.5), (10, 0.99)], relation("L", "F", true));
        assert_eq!(t.skip_reason, SkipReason::NoTickAfterResolution);

        // entry tick at or after the follower's own resolution is not usable
        let t = run(&[(20, 0.5), (21, 0.99)], relation("L", "F", true));
        assert_eq!(t.skip_reason, SkipReason::NoTickAfterResolution);

        let t = execute_trade(&relation("L", "F", true), &records, &SeriesIndex::new(), &cfg).unwrap();
        assert_eq!(t.skip_reason, SkipReason::NoTickAfterResolution);
        assert!(t.data_gap);
    }

    #[test]
    fn cutoff_boundaries_are_tradable() {
        let cfg = BacktestConfig::default();
        for p in [0.1, 0.9, 1.0 - 0.9, 1.0 - 0.1] {
            assert!(!cfg.entry_too_extreme(p), "{p}");
        }
        assert!(cfg.entry_too_extreme(0.0999));
        assert!(cfg.entry_too_extreme(0.9001));
        assert!(cfg.final_price_decisive(0.1) && cfg.final_price_decisive(0.9));
        assert!(!cfg.final_price_decisive(0.11));
    }

    #[test]
    fn report_arithmetic() {
        let mk = |q: &str, e: f64, pnl: f64| TradeRecord {
            cluster_id: 0,
            leader_question: q.into(),
            follower_question: "f".into(),
            decision: Some(TradeDecision {
                leader_question: q.into(),
                follower_question: "f".into(),
                side: Side::BuyYes,
                entry_time: day(1),
                entry_price: e,
            }),
            pnl: Some(pnl),
            skip_reason: SkipReason::None,
            resolution_gap_days: 3.0,
            data_gap: false,
        };
        let r = summarize_trades(&[mk("a", 0.75, 0.25), mk("b", 0.30, -0.30)]);
        assert_eq!(r.trade_count, 2);
        assert!((r.total_invested - 1.05).abs() < 1e-12);
        assert!((r.total_gain + 0.05).abs() < 1e-12);
        assert!((r.roi.unwrap() - (-0.05 / 1.05)).abs() < 1e-12);
        assert!((r.roi.unwrap() * 100.0 + 4.76).abs() < 0.01);

        let empty = summarize_trades(&[]);
        assert_eq!((empty.trade_count, empty.roi), (0, None));
        assert!(empty.delay_stats.is_none());
    }

    #[test]
    fn only_eligible_relations_trade() {
        let records = crate::market_data::index_markets(&[
            market("L", day(10), Outcome::Yes),
            market("F", day(20), Outcome::Yes),
        ]);
        let mut ineligible = relation("L", "F", true);
        ineligible.eligible = false;
        let run = run_backtest(&[ineligible], &records, &SeriesIndex::new(), &BacktestConfig::default()).unwrap();
        assert!(run.trades.is_empty());
        assert_eq!(run.report.trade_count + run.report.skipped_count, 0);
    }

    #[test]
    fn trades_csv_has_one_row_per_trade() {
        let records = crate::market_data::index_markets(&[
            market("L", day(10), Outcome::Yes),
            market("F", day(20), Outcome::Yes),
        ]);
        let s: SeriesIndex = [series("F", &[(11, 0.75), (19, 0.97)])].into_iter().collect();
        let run = run_backtest(&[relation("L", "F", true)], &records, &s, &BacktestConfig::default()).unwrap();
        let mut buf = Vec::new();
        write_trades_csv(&run.trades, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.lines().nth(1).unwrap().contains("BUY_YES"));
        assert_eq!(read_trades_csv(text.as_bytes()).unwrap(), run.trades);
        let plot = plot_data(&run.trades[0], &records, &s).unwrap();
        assert_eq!(plot.leader_resolution_time, day(10));
        assert_eq!(plot.follower_series.len(), 2);
    }
}
