//! Embeds a cohort's questions with the built-in hashed embedder and groups
//! them with seeded spherical k-means (`k = max(1, n / 10)`).
//!
//! ```text
//! cargo run --example cluster_cohort -- 42
//! ```

use polylink::clustering::{choose_k, cluster_questions, write_manifests, EmbedOptions, HashedTermFrequency};
use polylink::market_data::CohortSpec;
use polylink::synth::{generate_cohort, FixtureSpec};

fn main() -> polylink::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let fixture = generate_cohort(&FixtureSpec::new(CohortSpec::new(2025, 4)?, 60, 3));
    let questions: Vec<String> = fixture.markets.iter().map(|m| m.question.clone()).collect();

    let clusters = cluster_questions(&questions, &HashedTermFrequency::default(), EmbedOptions::default(), seed)?;
    println!("{} questions -> k = {}, {} non-empty clusters (seed {seed})\n", questions.len(), choose_k(questions.len()), clusters.len());
    for c in &clusters {
        println!("cluster {} ({} markets)", c.cluster_id, c.questions.len());
        for q in c.questions.iter().take(4) {
            println!("    {q}");
        }
        if c.questions.len() > 4 {
            println!("    ...");
        }
    }

    let dir = std::env::temp_dir().join("polylink-clusters");
    let files = write_manifests(&clusters, &dir)?;
    println!("\nwrote {} manifests to {}", files.len(), dir.display());
    Ok(())
}
