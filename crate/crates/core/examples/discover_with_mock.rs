//! Labels a cluster and mines pairwise relations through a scripted mock
//! gateway. The first discovery answer omits a required field, so the retry
//! loop feeds the schema error back and the second answer is accepted.
//!
//! ```text
//! cargo run --example discover_with_mock
//! ```

use polylink::clustering::ClusterManifest;
use polylink::market_data::{index_markets, Outcome};
use polylink::synth::simple_market;
use polylink::transduction::{
    discover_relations, label_cluster, single_markets, PromptTemplates, ScriptedGateway, StageContext, TemplateId,
    TransductionConfig,
};

fn main() -> polylink::Result<()> {
    let questions = [
        "Will Trump increase tariffs on Canada before May?",
        "Will Trump remove tariffs on Canada before May?",
        "Will Canada impose retaliatory tariffs before May?",
    ];
    let markets = index_markets(&[
        simple_market(questions[0], Outcome::Yes),
        simple_market(questions[1], Outcome::No),
        simple_market(questions[2], Outcome::Yes),
    ]);
    let cluster = ClusterManifest { cluster_id: 0, questions: questions.iter().map(|q| q.to_string()).collect() };

    let incomplete = format!(
        r#"{{"relations": [{{"question_i": "{}", "question_j": "{}", "is_same_outcome": false}}]}}"#,
        questions[0], questions[1]
    );
    let complete = serde_json::json!({ "relations": [
        { "question_i": questions[0], "question_j": questions[1], "is_same_outcome": false,
          "confidence_score": 0.9, "rationale": "Raising and removing the same tariff cannot both happen." },
        { "question_i": questions[0], "question_j": questions[2], "is_same_outcome": true,
          "confidence_score": 0.7, "rationale": "New tariffs tend to draw retaliation." },
    ]});
    let mut gateway = ScriptedGateway::new();
    gateway.insert(TemplateId::RelationshipDiscovery, &cluster.questions, vec![incomplete, complete.to_string()]);
    gateway.insert(TemplateId::ClusterLabeling, &cluster.questions, vec![r#"{"category": "economy"}"#.into()]);

    let config = TransductionConfig::default();
    let templates = PromptTemplates::default();
    let ctx = StageContext { gateway: &gateway, config: &config, templates: &templates, seed: 0 };

    let label = label_cluster(&cluster, &ctx)?;
    println!("label: {} (fallback: {})", label.labeled.category.as_str(), label.fell_back);

    let out = discover_relations(&cluster, &single_markets(&cluster, &markets)?, &ctx)?;
    for e in &out.errors {
        println!("attempt {} rejected: {}", e.attempt, e.message);
    }
    for r in &out.relations.relations {
        let kind = if r.is_same_outcome { "same" } else { "different" };
        println!("{kind:>9} ({:.2})  {}  <->  {}", r.confidence_score, r.question_i, r.question_j);
    }
    Ok(())
}
