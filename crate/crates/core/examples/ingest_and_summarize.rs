//! Loads a market export, applies the binary / seven-day filters, slices a
//! month cohort and prints summary statistics.
//!
//! ```text
//! cargo run --example ingest_and_summarize -- fixture/data/markets.csv 2025-04
//! ```
//!
//! Without arguments a small synthetic export is generated in memory.

use polylink::market_data::{
    filter_binary_and_duration, load_markets, load_markets_path, slice_by_month, summarize, write_markets,
    CohortSpec, SummaryStats,
};
use polylink::synth::{generate_cohort, FixtureSpec};

fn row(name: &str, s: &SummaryStats) {
    let f = |v: Option<f64>, d: usize| v.map_or("-".to_string(), |v| format!("{v:.d$}"));
    println!(
        "{name:<10} {:>6} {:>14} {:>14} {:>8} {:>8}",
        s.count,
        f(s.volume_mean, 0),
        f(s.volume_std, 0),
        f(s.duration_mean_days, 1),
        f(s.duration_std_days, 1)
    );
}

fn main() -> polylink::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args.next();
    let cohort: CohortSpec = args.next().as_deref().unwrap_or("2025-04").parse()?;

    let (markets, report) = match path {
        Some(p) => load_markets_path(p)?,
        None => {
            let mut spec = FixtureSpec::new(cohort, 80, 7);
            spec.short_fraction = 0.2;
            let mut csv = Vec::new();
            write_markets(&generate_cohort(&spec).markets, &mut csv)?;
            load_markets(csv.as_slice())?
        }
    };
    for r in &report.rejected {
        println!("rejected row {}: {}", r.row, r.reason);
    }
    let kept = filter_binary_and_duration(&markets);
    let slice = slice_by_month(&kept, &cohort);
    println!("{} loaded, {} open at least seven days, {} in {cohort}\n", markets.len(), kept.len(), slice.len());
    println!("{:<10} {:>6} {:>14} {:>14} {:>8} {:>8}", "sample", "count", "volume mean", "volume std", "dur mean", "dur std");
    row("All", &summarize(&kept));
    row(&cohort.to_string(), &summarize(&slice));
    Ok(())
}
