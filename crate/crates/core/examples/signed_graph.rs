//! Builds a signed relation graph, checks every triangle for balance and
//! prints the Graphviz rendering.
//!
//! ```text
//! cargo run --example signed_graph > relations.dot && dot -Tpng relations.dot -o relations.png
//! ```

use std::collections::BTreeMap;

use polylink::evaluation::evaluate_relations;
use polylink::market_data::{index_markets, Outcome};
use polylink::relation_graph::{balance_summary, build_graph, export_graph, find_triangle_violations, GraphFormat};
use polylink::synth::simple_market;
use polylink::transduction::{Category, ClusterRelation};

fn main() -> polylink::Result<()> {
    let q = [
        "Will Trump increase tariffs on Canada by April 30?",
        "Will Trump remove tariffs on Canada by April 30?",
        "Will Canada retaliate with tariffs by April 30?",
        "Will the TSX fall 10% by April 30?",
    ];
    let markets = index_markets(&[
        simple_market(q[0], Outcome::Yes),
        simple_market(q[1], Outcome::No),
        simple_market(q[2], Outcome::Yes),
        simple_market(q[3], Outcome::No),
    ]);
    let edge = |i: usize, j: usize, same: bool, c: f64| ClusterRelation {
        cluster_id: 0,
        question_i: q[i].into(),
        question_j: q[j].into(),
        is_same_outcome: same,
        confidence_score: c,
        rationale: String::new(),
    };
    // the 0-2-3 triangle has one "different" edge: no outcome assignment fits
    let relations = vec![
        edge(0, 1, false, 0.95),
        edge(0, 2, true, 0.8),
        edge(1, 2, false, 0.75),
        edge(2, 3, true, 0.6),
        edge(0, 3, false, 0.55),
    ];
    let evaluated = evaluate_relations(&relations, &markets, &BTreeMap::from([(0, Category::Economy)]), 0.5)?;
    let graph = build_graph(&evaluated, &markets)?;

    let summary = balance_summary(&graph);
    eprintln!("{} triangles, {} unbalanced", summary.triangles, summary.violations);
    for v in find_triangle_violations(&graph) {
        eprintln!("unbalanced: {:?} with signs {:?}", v.questions, v.signs);
    }
    print!("{}", export_graph(&graph, GraphFormat::Dot)?);
    Ok(())
}
