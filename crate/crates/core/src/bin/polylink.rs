use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use polylink::market_data::CohortSpec;
use polylink::pipeline::{GatewayKind, InputPaths, Pipeline, RunConfig};
use polylink::Result;

#[derive(Parser)]
#[command(name = "polylink", version, about = "Prediction-market relation discovery and backtesting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load, filter and slice markets into cohorts.
    Ingest(Common),
    /// Cluster each cohort's questions.
    Cluster(Common),
    /// Label clusters and propose relations.
    Discover(Common),
    /// Score relations against outcomes and export graphs.
    Evaluate(Common),
    /// Run the leader-follower backtest.
    Backtest(Common),
    /// Every stage, every trial, then the report and manifest.
    RunAll(Common),
    /// Aggregate existing trial artifacts and render report.md.
    Report(Common),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Markets CSV, when no config is given.
    #[arg(long)]
    markets: Option<PathBuf>,
    /// Price CSV file or directory, when no config is given.
    #[arg(long)]
    prices: Option<PathBuf>,
    /// Cohort month as YYYY-MM; repeatable, replaces the configured cohorts.
    #[arg(long = "month")]
    months: Vec<CohortSpec>,
    #[arg(long)]
    trials: Option<usize>,
    /// Base seed; trial t uses seed + t.
    #[arg(long)]
    seed: Option<u64>,
    /// Answer LLM requests from this mock script.
    #[arg(long)]
    mock_gateway: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run per-trial stages for this trial only.
    #[arg(long)]
    trial: Option<usize>,
}

impl Common {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => {
                let (Some(markets), Some(prices)) = (&self.markets, &self.prices) else {
                    return Err(polylink::Error::Config(
                        "pass --config, or both --markets and --prices".into(),
                    ));
                };
                RunConfig::new(
                    InputPaths { markets: markets.clone(), prices: prices.clone(), prompts: None },
                    self.months.clone(),
                )
            }
        };
        if !self.months.is_empty() {
            cfg.cohorts = self.months.clone();
        }
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        if let Some(s) = self.seed {
            cfg.base_seed = s;
        }
        if let Some(script) = &self.mock_gateway {
            cfg.gateway.kind = GatewayKind::Mock;
            cfg.gateway.mock_script = Some(script.clone());
        }
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn trials(&self, cfg: &RunConfig) -> Vec<usize> {
        match self.trial {
            Some(t) => vec![t],
            None => (0..cfg.trials).collect(),
        }
    }
}

fn per_trial(
    args: &Common,
    stage: impl Fn(&Pipeline, &CohortSpec, usize) -> Result<String>,
) -> Result<()> {
    let cfg = args.config()?;
    let trials = args.trials(&cfg);
    let pipeline = Pipeline::new(cfg)?;
    for cohort in &pipeline.config().cohorts {
        for &trial in &trials {
            let line = stage(&pipeline, cohort, trial)?;
            println!("{cohort} trial {trial}: {line}");
        }
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(args) => {
            let out = Pipeline::new(args.config()?)?.ingest()?;
            println!(
                "loaded {} markets ({} rejected rows), {} kept after filters",
                out.loaded,
                out.markets_report.rejected.len(),
                out.after_duration_filter
            );
            for s in &out.summaries {
                println!("{}: {} markets", s.sample, s.stats.count);
            }
        }
        Command::Cluster(args) => per_trial(&args, |p, c, t| Ok(format!("{} clusters", p.cluster(c, t)?.len())))?,
        Command::Discover(args) => per_trial(&args, |p, c, t| {
            let e = p.discover(c, t)?;
            Ok(format!(
                "{} label fallbacks, {} discovery failures, {} failed attempts",
                e.label_fallbacks, e.discovery_failures, e.failed_attempts
            ))
        })?,
        Command::Evaluate(args) => per_trial(&args, |p, c, t| {
            let r = p.evaluate(c, t)?;
            Ok(format!(
                "{} eligible pairs, overall accuracy {}",
                r.eligible_pair_count,
                r.overall_accuracy.map_or("n/a".into(), |a| format!("{:.1}%", a * 100.0))
            ))
        })?,
        Command::Backtest(args) => per_trial(&args, |p, c, t| {
            let r = p.backtest(c, t)?;
            Ok(format!(
                "{} trades, {} skipped, ROI {}",
                r.trade_count,
                r.skipped_count,
                r.roi.map_or("n/a".into(), |a| format!("{:.1}%", a * 100.0))
            ))
        })?,
        Command::RunAll(args) => {
            let cfg = args.config()?;
            let out = cfg.output_dir.clone();
            let manifest = Pipeline::new(cfg)?.run_all()?;
            println!("{} artifacts written under {}", manifest.artifacts.len(), out.display());
        }
        Command::Report(args) => print!("{}", Pipeline::new(args.config()?)?.report()?),
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
