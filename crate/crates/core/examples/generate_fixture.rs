//! Writes a synthetic two-month dataset, a recorded mock script and a run
//! config into a directory (default `fixture/`).
//!
//! ```text
//! cargo run --example generate_fixture -- /tmp/demo
//! cargo run --bin polylink -- run-all --config /tmp/demo/run.toml
//! ```

use std::path::PathBuf;

use polylink::market_data::{slice_by_month, CohortSpec};
use polylink::synth::{generate_cohort, record_cohort_script, CohortFixture, FixtureSpec};
use polylink::transduction::MockScript;

fn main() -> polylink::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "fixture".into()));
    let cohorts = [CohortSpec::new(2025, 4)?, CohortSpec::new(2025, 5)?];

    let mut fixture = CohortFixture { markets: Vec::new(), series: Default::default() };
    for (i, cohort) in cohorts.iter().enumerate() {
        let mut spec = FixtureSpec::new(*cohort, 150, i as u64 + 1);
        spec.short_fraction = 0.05;
        let part = generate_cohort(&spec);
        fixture.markets.extend(part.markets);
        fixture.series.extend(part.series);
    }
    fixture.write(dir.join("data"))?;

    // replayable answers for trials 0..5 at a 70% hit rate
    let mut script = MockScript::default();
    for cohort in &cohorts {
        let slice = slice_by_month(&fixture.markets, cohort);
        script.entries.extend(record_cohort_script(&slice, 0..5, 0.7)?.entries);
    }
    script.save(dir.join("mock.json"))?;

    let config = r#"cohorts = ["2025-04", "2025-05"]
trials = 5
base_seed = 0
output_dir = "out"

[inputs]
markets = "data/markets.csv"
prices = "data/prices.csv"

[gateway]
kind = "mock"
mock_script = "mock.json"
temperature_jitter = 0.0
"#;
    std::fs::write(dir.join("run.toml"), config).map_err(|e| polylink::Error::Config(e.to_string()))?;
    println!(
        "wrote {} markets, {} price series and {} scripted responses to {}",
        fixture.markets.len(),
        fixture.series.len(),
        script.entries.len(),
        dir.display()
    );
    Ok(())
}
