//! Trades a follower market once its related leader has resolved, then
//! shows a skipped pair and the aggregate ROI.
//!
//! ```text
//! cargo run --example leader_follower_backtest
//! ```

use chrono::{Duration, TimeZone, Utc};
use polylink::backtest::{run_backtest, BacktestConfig};
use polylink::evaluation::evaluate_relations;
use polylink::market_data::{index_markets, MarketRecord, Outcome, PriceSeries, PriceTick, SeriesIndex};
use polylink::transduction::{Category, ClusterRelation};

fn main() -> polylink::Result<()> {
    let t0 = Utc.with_ymd_and_hms(2025, 4, 1, 0, 0, 0).unwrap();
    let market = |q: &str, resolved_day: i64, outcome| MarketRecord {
        event_market_name: "single market".into(),
        question: q.into(),
        market_start_time: t0 - Duration::days(30),
        market_end_time: t0 + Duration::days(40),
        resolved_on_timestamp: t0 + Duration::days(resolved_day),
        outcome,
        volume_usd: 250_000.into(),
    };
    let markets = index_markets(&[
        market("Will the Fed cut rates at the April meeting?", 9, Outcome::Yes),
        market("Will mortgage rates fall below 6% by April 30?", 29, Outcome::Yes),
        market("Will the 10-year yield close above 5% by April 30?", 29, Outcome::No),
    ]);
    let ticks = |v: &[(i64, f64)]| v.iter().map(|&(d, p)| PriceTick { timestamp: t0 + Duration::days(d), yes_price: p }).collect();
    let mut series = SeriesIndex::new();
    for (q, t) in [
        ("Will mortgage rates fall below 6% by April 30?", ticks(&[(2, 0.55), (10, 0.75), (20, 0.88), (28, 0.97)])),
        ("Will the 10-year yield close above 5% by April 30?", ticks(&[(2, 0.2), (10, 0.04), (28, 0.02)])),
    ] {
        series.insert(q.to_string(), PriceSeries::new(q, t)?);
    }
    let relation = |qj: &str, same| ClusterRelation {
        cluster_id: 0,
        question_i: "Will the Fed cut rates at the April meeting?".into(),
        question_j: qj.into(),
        is_same_outcome: same,
        confidence_score: 0.9,
        rationale: String::new(),
    };
    let relations = [
        relation("Will mortgage rates fall below 6% by April 30?", true),
        relation("Will the 10-year yield close above 5% by April 30?", false),
    ];
    let labels = [(0, Category::Economy)].into();
    let evaluated = evaluate_relations(&relations, &markets, &labels, 0.5)?;

    let run = run_backtest(&evaluated, &markets, &series, &BacktestConfig::default())?;
    for t in &run.trades {
        match (&t.decision, t.pnl) {
            (Some(d), Some(pnl)) => println!(
                "{:?} \"{}\" at {:.2} on {} -> pnl {pnl:+.2}",
                d.side,
                t.follower_question,
                d.entry_price,
                d.entry_time.format("%Y-%m-%d")
            ),
            _ => println!("skipped \"{}\": {:?}", t.follower_question, t.skip_reason),
        }
        println!("    follower resolved {:.2} days after the leader", t.resolution_gap_days);
    }
    let r = &run.report;
    println!(
        "\n{} traded, {} skipped, invested {:.2}, gained {:+.2}, ROI {}",
        r.trade_count,
        r.skipped_count,
        r.total_invested,
        r.total_gain,
        r.roi.map_or("n/a".into(), |x| format!("{:.1}%", x * 100.0))
    );
    Ok(())
}
