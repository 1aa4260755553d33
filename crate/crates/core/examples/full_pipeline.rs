//! Runs every stage over two synthetic month cohorts with the
//! planted-accuracy simulator standing in for the model, then prints the
//! rendered report.
//!
//! ```text
//! cargo run --example full_pipeline -- /tmp/polylink-run 10
//! ```

use std::path::PathBuf;

use polylink::market_data::CohortSpec;
use polylink::pipeline::{GatewayKind, InputPaths, Pipeline, RunConfig};
use polylink::synth::{generate_cohort, CohortFixture, FixtureSpec};

fn main() -> polylink::Result<()> {
    let mut args = std::env::args().skip(1);
    let root = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("polylink-run"));
    let trials = args.next().and_then(|s| s.parse().ok()).unwrap_or(5);

    let cohorts = vec![CohortSpec::new(2025, 4)?, CohortSpec::new(2025, 6)?];
    let mut data = CohortFixture { markets: Vec::new(), series: Default::default() };
    for (i, c) in cohorts.iter().enumerate() {
        let part = generate_cohort(&FixtureSpec::new(*c, 120, 100 + i as u64));
        data.markets.extend(part.markets);
        data.series.extend(part.series);
    }
    data.write(root.join("data"))?;

    let mut config = RunConfig::new(
        InputPaths { markets: root.join("data/markets.csv"), prices: root.join("data/prices.csv"), prompts: None },
        cohorts,
    );
    config.trials = trials;
    config.output_dir = root.join("out");
    config.gateway.kind = GatewayKind::Simulated;
    config.gateway.simulated_accuracy = 0.65;
    config.parallel_trials = true;

    let manifest = Pipeline::new(config)?.run_all()?;
    for (cohort, c) in &manifest.error_counters {
        println!("{cohort}: {} label fallbacks, {} discovery failures", c.label_fallbacks, c.discovery_failures);
    }
    println!("{} artifacts under {}\n", manifest.artifacts.len(), root.join("out").display());
    print!("{}", std::fs::read_to_string(root.join("out/report.md")).map_err(|e| polylink::Error::Config(e.to_string()))?);
    Ok(())
}
