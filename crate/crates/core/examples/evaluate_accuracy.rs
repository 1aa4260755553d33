//! Scores predicted relations against realized outcomes and contrasts the
//! two accuracy views: the mean of per-cluster accuracies and the pooled
//! fraction over all eligible pairs.
//!
//! ```text
//! cargo run --example evaluate_accuracy
//! ```

use std::collections::BTreeMap;

use polylink::evaluation::{accuracy_report, evaluate_relations, percent, DEFAULT_CONFIDENCE_THRESHOLD};
use polylink::market_data::{index_markets, Outcome};
use polylink::synth::simple_market;
use polylink::transduction::{Category, ClusterRelation};

fn relation(cluster_id: usize, qi: &str, qj: &str, same: bool, confidence: f64) -> ClusterRelation {
    ClusterRelation {
        cluster_id,
        question_i: qi.into(),
        question_j: qj.into(),
        is_same_outcome: same,
        confidence_score: confidence,
        rationale: String::new(),
    }
}

fn main() -> polylink::Result<()> {
    let markets = index_markets(&[
        simple_market("Will the Fed cut rates in April?", Outcome::No),
        simple_market("Will the Fed hold rates in April?", Outcome::Yes),
        simple_market("Will Bitcoin close above $100k in April?", Outcome::Yes),
        simple_market("Will Ethereum close above $4,000 in April?", Outcome::No),
        simple_market("Will Solana close above $300 in April?", Outcome::No),
    ]);
    let relations = vec![
        relation(0, "Will the Fed cut rates in April?", "Will the Fed hold rates in April?", false, 0.95),
        relation(1, "Will Bitcoin close above $100k in April?", "Will Ethereum close above $4,000 in April?", true, 0.8),
        relation(1, "Will Ethereum close above $4,000 in April?", "Will Solana close above $300 in April?", true, 0.7),
        relation(1, "Will Bitcoin close above $100k in April?", "Will Solana close above $300 in April?", true, 0.3),
    ];
    let labels = BTreeMap::from([(0, Category::Economy), (1, Category::Crypto)]);

    let evaluated = evaluate_relations(&relations, &markets, &labels, DEFAULT_CONFIDENCE_THRESHOLD)?;
    for e in &evaluated {
        println!(
            "cluster {} {:<9} conf {:.2} eligible {:<5} correct {:<5} {} / {}",
            e.cluster_id,
            if e.relation.is_same_outcome { "same" } else { "different" },
            e.relation.confidence_score,
            e.eligible,
            e.is_correct,
            e.relation.question_i,
            e.relation.question_j
        );
    }
    let report = accuracy_report(&evaluated);
    println!();
    for (id, s) in &report.per_cluster {
        println!("cluster {id}: {}/{} correct", s.correct, s.pair_count);
    }
    println!(
        "cluster accuracy {:.1}%, overall accuracy {:.1}% over {} eligible pairs",
        percent(report.cluster_accuracy.unwrap_or(0.0)),
        percent(report.overall_accuracy.unwrap_or(0.0)),
        report.eligible_pair_count
    );
    Ok(())
}
