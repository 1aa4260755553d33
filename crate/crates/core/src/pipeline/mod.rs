//! End-to-end runs over month cohorts and repeated trials.
//!
//! Every stage reads its inputs from the artifacts of the previous stage,
//! so each can be rerun on its own:
//!
//! ```text
//! out/
//!   ingest/            load reports and sample summary
//!   {YYYY-MM}/
//!     markets.csv      cohort slice
//!     trial_stats.json cross-trial aggregates
//!     {trial}/
//!       clusters/      cluster_{id}.csv, labels.json
//!       relations/     relations.json, transduction.json
//!       evaluation/    evaluation.csv, accuracy_report.json
//!       graphs/        graph_{id}.dot, graph_{id}.json, balance.json
//!       backtest/      trades.csv, backtest_report.json, plots/
//!   report.md
//!   run_manifest.json
//! ```
//!
//! Trial `t` uses seed `base_seed + t` for clustering and for the gateway.

mod config;
mod report;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backtest::{plot_data, run_backtest, write_trades_csv};
use crate::clustering::{
    cluster_questions, read_manifests, write_manifests, ClusterManifest, EmbeddingProvider,
    HashedTermFrequency, HttpEmbeddingProvider,
};
use crate::error::{Error, Result};
use crate::evaluation::{accuracy_report, evaluate_relations, read_evaluation_path, write_evaluation_csv};
use crate::market_data::{
    filter_binary_and_duration, index_markets, load_markets_path, load_price_series_path, slice_by_month,
    summarize, write_markets_path, CohortSpec, LoadReport, MarketIndex, SeriesIndex, SummaryStats,
};
use crate::relation_graph::{balance_summary, build_graph, export_graph, GraphFormat};
use crate::transduction::{
    category_map, flatten_relations, transduce_clusters, ChatGateway, ChatRequest, ClusterRelation,
    ErrorCounters, GatewayError, HttpChatGateway, LabeledCluster, PromptTemplates, ScriptedGateway,
    SimulatedGateway, StageContext,
};

pub use config::{EmbeddingKind, EmbeddingSettings, GatewayKind, GatewaySettings, InputPaths, RunConfig};
pub use report::{
    aggregate_cohort, render_report, render_stats_table, report_tables, CategoryAggregate, CohortAggregate,
    MetricSeries,
};

pub(crate) fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(Error::io(dir))?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(Error::io(path))
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
    Ok(serde_json::from_str(&text)?)
}

fn create_file(path: &Path) -> Result<std::fs::File> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(Error::io(dir))?;
    }
    std::fs::File::create(path).map_err(Error::io(path))
}

/// Answers from a scripted mock when the primary gateway cannot be reached.
pub struct FallbackGateway<P> {
    pub primary: P,
    pub fallback: ScriptedGateway,
}

impl<P: ChatGateway> ChatGateway for FallbackGateway<P> {
    fn complete(&self, request: &ChatRequest) -> std::result::Result<String, GatewayError> {
        match self.primary.complete(request) {
            Err(GatewayError::Unreachable(_)) | Err(GatewayError::Status { .. }) => self.fallback.complete(request),
            other => other,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub sample: String,
    #[serde(flatten)]
    pub stats: SummaryStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestOutput {
    pub markets_report: LoadReport,
    pub prices_report: LoadReport,
    pub loaded: usize,
    pub after_duration_filter: usize,
    /// `All` followed by one row per cohort.
    pub summaries: Vec<SampleSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterDiagnostics {
    pub cluster_id: usize,
    pub label_fell_back: bool,
    pub discovery_failed: bool,
    pub verbatim_mismatches: usize,
    pub duplicates_collapsed: usize,
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSeed {
    pub cohort: CohortSpec,
    pub trial: usize,
    pub seed: u64,
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// TOML snapshot of the configuration, with `output_dir` set to `.`
    /// because artifact paths are relative to the manifest.
    pub config: String,
    pub trial_seeds: Vec<TrialSeed>,
    /// Every file under the output directory except the manifest.
    pub artifacts: Vec<String>,
    pub error_counters: BTreeMap<String, ErrorCounters>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage_seconds: Option<BTreeMap<String, f64>>,
}

pub const MANIFEST_FILE: &str = "run_manifest.json";
pub const REPORT_FILE: &str = "report.md";

/// A configured pipeline. Gateways and embedders can be swapped in for
/// tests and embedding applications.
pub struct Pipeline {
    config: RunConfig,
    templates: PromptTemplates,
    gateway_override: Option<Box<dyn ChatGateway>>,
    embedder: Box<dyn EmbeddingProvider>,
    series: OnceLock<SeriesIndex>,
}

impl Pipeline {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let templates = match &config.inputs.prompts {
            Some(dir) => PromptTemplates::load_dir(dir)?,
            None => PromptTemplates::default(),
        };
        let embedder: Box<dyn EmbeddingProvider> = match config.embedding.kind {
            EmbeddingKind::Hashed => Box::new(HashedTermFrequency::default()),
            EmbeddingKind::Http => Box::new(HttpEmbeddingProvider::new(
                config.embedding.endpoint.clone().unwrap_or_default(),
                config.embedding.model.clone().unwrap_or_default(),
                config.embedding.credential_env.clone(),
            )),
        };
        Ok(Pipeline {
            config,
            templates,
            gateway_override: None,
            embedder,
            series: OnceLock::new(),
        })
    }

    pub fn with_gateway(mut self, gateway: Box<dyn ChatGateway>) -> Self {
        self.gateway_override = Some(gateway);
        self
    }

    pub fn with_embedder(mut self, embedder: Box<dyn EmbeddingProvider>) -> Self {
        self.embedder = embedder;
        self
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    fn out(&self) -> &Path {
        &self.config.output_dir
    }

    pub fn cohort_dir(&self, cohort: &CohortSpec) -> PathBuf {
        self.out().join(cohort.to_string())
    }

    pub fn trial_dir(&self, cohort: &CohortSpec, trial: usize) -> PathBuf {
        self.cohort_dir(cohort).join(trial.to_string())
    }

    pub fn trial_temperature(&self, trial: usize) -> f64 {
        let g = &self.config.gateway;
        if g.temperature_jitter == 0.0 {
            return g.temperature;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.trial_seed(trial));
        let t = g.temperature + rng.gen_range(0.0..g.temperature_jitter);
        (t * 1e6).round() / 1e6
    }

    /// Loads and filters markets, writes load reports, the sample summary and
    /// one `markets.csv` per cohort.
    pub fn ingest(&self) -> Result<IngestOutput> {
        let (markets, markets_report) = load_markets_path(&self.config.inputs.markets)?;
        let (_, prices_report) = load_price_series_path(&self.config.inputs.prices)?;
        let kept = filter_binary_and_duration(&markets);
        let mut summaries = vec![SampleSummary { sample: "All".into(), stats: summarize(&kept) }];
        for cohort in &self.config.cohorts {
            let slice = slice_by_month(&kept, cohort);
            let path = self.cohort_dir(cohort).join("markets.csv");
            std::fs::create_dir_all(self.cohort_dir(cohort)).map_err(Error::io(self.cohort_dir(cohort)))?;
            write_markets_path(&slice, &path)?;
            summaries.push(SampleSummary { sample: cohort.to_string(), stats: summarize(&slice) });
        }
        let ingest_dir = self.out().join("ingest");
        write_json(&ingest_dir.join("load_report.json"), &markets_report)?;
        write_json(&ingest_dir.join("prices_load_report.json"), &prices_report)?;
        write_json(&ingest_dir.join("summary.json"), &summaries)?;
        Ok(IngestOutput {
            markets_report,
            prices_report,
            loaded: markets.len(),
            after_duration_filter: kept.len(),
            summaries,
        })
    }

    pub fn cohort_markets(&self, cohort: &CohortSpec) -> Result<MarketIndex> {
        let (markets, report) = load_markets_path(self.cohort_dir(cohort).join("markets.csv"))?;
        if !report.rejected.is_empty() {
            return Err(Error::Integrity(format!("cohort {cohort} markets.csv has invalid rows")));
        }
        Ok(index_markets(&markets))
    }

    fn series(&self) -> Result<&SeriesIndex> {
        if let Some(s) = self.series.get() {
            return Ok(s);
        }
        let (s, _) = load_price_series_path(&self.config.inputs.prices)?;
        Ok(self.series.get_or_init(|| s))
    }

    pub fn cluster(&self, cohort: &CohortSpec, trial: usize) -> Result<Vec<ClusterManifest>> {
        let markets = self.cohort_markets(cohort)?;
        let dir = self.trial_dir(cohort, trial).join("clusters");
        if dir.exists() {
            std::fs::remove_dir_all(&dir).map_err(Error::io(&dir))?;
        }
        let questions: Vec<String> = markets.keys().cloned().collect();
        let manifests = if questions.is_empty() {
            Vec::new()
        } else {
            cluster_questions(
                &questions,
                self.embedder.as_ref(),
                self.config.embedding.options(),
                self.config.trial_seed(trial),
            )?
        };
        std::fs::create_dir_all(&dir).map_err(Error::io(&dir))?;
        write_manifests(&manifests, &dir)?;
        Ok(manifests)
    }

    fn build_gateway(&self, markets: &MarketIndex) -> Result<Box<dyn ChatGateway + '_>> {
        if let Some(g) = &self.gateway_override {
            return Ok(Box::new(g.as_ref()));
        }
        let g = &self.config.gateway;
        Ok(match g.kind {
            GatewayKind::Mock => match &g.mock_script {
                Some(path) => Box::new(ScriptedGateway::load(path)?),
                None => Box::new(ScriptedGateway::new()),
            },
            GatewayKind::Simulated => {
                let outcomes = markets.iter().map(|(q, m)| (q.clone(), m.outcome)).collect();
                Box::new(SimulatedGateway::new(outcomes, g.simulated_accuracy))
            }
            GatewayKind::Http => {
                let http = HttpChatGateway::new(g.endpoint.clone().unwrap_or_default(), g.credential_env.clone());
                match &g.fallback_mock_script {
                    Some(path) => Box::new(FallbackGateway { primary: http, fallback: ScriptedGateway::load(path)? }),
                    None => Box::new(http),
                }
            }
        })
    }

    /// Labels clusters and proposes relations; writes `labels.json`,
    /// `relations.json` and `transduction.json`.
    pub fn discover(&self, cohort: &CohortSpec, trial: usize) -> Result<ErrorCounters> {
        let markets = self.cohort_markets(cohort)?;
        let trial_dir = self.trial_dir(cohort, trial);
        let manifests = read_manifests(trial_dir.join("clusters"))?;
        let gateway = self.build_gateway(&markets)?;
        let transduction = self.config.gateway.transduction(self.trial_temperature(trial));
        let ctx = StageContext {
            gateway: gateway.as_ref(),
            config: &transduction,
            templates: &self.templates,
            seed: self.config.trial_seed(trial),
        };
        let results = transduce_clusters(&manifests, &markets, &ctx)?;
        let labels: Vec<&LabeledCluster> = results.iter().map(|r| &r.label.labeled).collect();
        write_json(&trial_dir.join("clusters").join("labels.json"), &labels)?;
        write_json(&trial_dir.join("relations").join("relations.json"), &flatten_relations(&results))?;
        let diagnostics: Vec<ClusterDiagnostics> = results
            .iter()
            .map(|r| ClusterDiagnostics {
                cluster_id: r.discovery.cluster_id,
                label_fell_back: r.label.fell_back,
                discovery_failed: r.discovery.failed,
                verbatim_mismatches: r.discovery.verbatim_mismatches,
                duplicates_collapsed: r.discovery.duplicates_collapsed,
                errors: r
                    .label
                    .errors
                    .iter()
                    .map(|e| format!("label attempt {}: {}", e.attempt, e.message))
                    .chain(
                        r.discovery
                            .errors
                            .iter()
                            .map(|e| format!("discovery attempt {}: {}", e.attempt, e.message)),
                    )
                    .collect(),
            })
            .collect();
        let counters = ErrorCounters::tally(&results);
        write_json(&trial_dir.join("relations").join("transduction.json"), &diagnostics)?;
        write_json(&trial_dir.join("relations").join("error_counters.json"), &counters)?;
        let _ = category_map(&results);
        Ok(counters)
    }

    /// Scores relations and writes evaluation and graph artifacts.
    pub fn evaluate(&self, cohort: &CohortSpec, trial: usize) -> Result<crate::evaluation::AccuracyReport> {
        let markets = self.cohort_markets(cohort)?;
        let trial_dir = self.trial_dir(cohort, trial);
        let labels: Vec<LabeledCluster> = read_json(&trial_dir.join("clusters").join("labels.json"))?;
        let label_map = labels.iter().map(|l| (l.cluster_id, l.category)).collect();
        let relations: Vec<ClusterRelation> = read_json(&trial_dir.join("relations").join("relations.json"))?;
        let evaluated = evaluate_relations(&relations, &markets, &label_map, self.config.confidence_threshold)?;
        let eval_dir = trial_dir.join("evaluation");
        write_evaluation_csv(&evaluated, create_file(&eval_dir.join("evaluation.csv"))?)?;
        let report = accuracy_report(&evaluated);
        write_json(&eval_dir.join("accuracy_report.json"), &report)?;

        let graph_dir = trial_dir.join("graphs");
        if graph_dir.exists() {
            std::fs::remove_dir_all(&graph_dir).map_err(Error::io(&graph_dir))?;
        }
        std::fs::create_dir_all(&graph_dir).map_err(Error::io(&graph_dir))?;
        let mut by_cluster: BTreeMap<usize, Vec<_>> = BTreeMap::new();
        for e in &evaluated {
            by_cluster.entry(e.cluster_id).or_default().push(e.clone());
        }
        let mut balance = BTreeMap::new();
        for (id, rels) in by_cluster {
            let graph = build_graph(&rels, &markets)?;
            if graph.edges.is_empty() {
                continue;
            }
            let dot = export_graph(&graph, GraphFormat::Dot)?;
            let dot_path = graph_dir.join(format!("graph_{id}.dot"));
            std::fs::write(&dot_path, dot).map_err(Error::io(&dot_path))?;
            let json_path = graph_dir.join(format!("graph_{id}.json"));
            std::fs::write(&json_path, export_graph(&graph, GraphFormat::Json)?).map_err(Error::io(&json_path))?;
            balance.insert(id, (balance_summary(&graph), graph.conflicts));
        }
        let balance: BTreeMap<usize, serde_json::Value> = balance
            .into_iter()
            .map(|(id, (b, conflicts))| {
                (id, serde_json::json!({ "triangles": b.triangles, "violations": b.violations,
                    "violation_rate": b.violation_rate, "conflicts": conflicts }))
            })
            .collect();
        write_json(&graph_dir.join("balance.json"), &balance)?;
        Ok(report)
    }

    /// Trades evaluated relations; writes trades, report and plot data.
    pub fn backtest(&self, cohort: &CohortSpec, trial: usize) -> Result<crate::backtest::BacktestReport> {
        let markets = self.cohort_markets(cohort)?;
        let trial_dir = self.trial_dir(cohort, trial);
        let evaluated = read_evaluation_path(trial_dir.join("evaluation").join("evaluation.csv"))?;
        let series = self.series()?;
        let run = run_backtest(&evaluated, &markets, series, &self.config.backtest())?;
        let dir = trial_dir.join("backtest");
        if dir.exists() {
            std::fs::remove_dir_all(&dir).map_err(Error::io(&dir))?;
        }
        write_trades_csv(&run.trades, create_file(&dir.join("trades.csv"))?)?;
        write_json(&dir.join("backtest_report.json"), &run.report)?;
        let mut n = 0;
        for t in &run.trades {
            if let Some(plot) = plot_data(t, &markets, series) {
                write_json(&dir.join("plots").join(format!("trade_{n}.json")), &plot)?;
                n += 1;
            }
        }
        Ok(run.report)
    }

    /// Aggregates trials `0..trials` of every cohort into
    /// `trial_stats.json` and renders `report.md`.
    pub fn report(&self) -> Result<String> {
        let out = self.out();
        for cohort in &self.config.cohorts {
            let agg = aggregate_cohort(out, cohort, self.config.trials)?;
            write_json(&self.cohort_dir(cohort).join("trial_stats.json"), &agg)?;
        }
        let report = report_tables(out)?;
        let path = out.join(REPORT_FILE);
        std::fs::write(&path, &report).map_err(Error::io(&path))?;
        Ok(report)
    }

    fn run_trial(&self, cohort: &CohortSpec, trial: usize, timings: &mut BTreeMap<String, f64>) -> Result<ErrorCounters> {
        let mut timed = |stage: &str, t: Instant| {
            *timings.entry(stage.to_string()).or_insert(0.0) += t.elapsed().as_secs_f64();
        };
        let t = Instant::now();
        self.cluster(cohort, trial)?;
        timed("cluster", t);
        let t = Instant::now();
        let counters = self.discover(cohort, trial)?;
        timed("discover", t);
        let t = Instant::now();
        self.evaluate(cohort, trial)?;
        timed("evaluate", t);
        let t = Instant::now();
        self.backtest(cohort, trial)?;
        timed("backtest", t);
        Ok(counters)
    }

    /// Runs every stage for every cohort and trial, aggregates, renders the
    /// report and writes the manifest.
    pub fn run_all(&self) -> Result<RunManifest> {
        let out = self.out().to_path_buf();
        std::fs::create_dir_all(&out).map_err(Error::io(&out))?;
        let mut timings = BTreeMap::new();
        let t = Instant::now();
        self.ingest()?;
        timings.insert("ingest".to_string(), t.elapsed().as_secs_f64());
        self.series()?;

        let mut error_counters = BTreeMap::new();
        let mut trial_seeds = Vec::new();
        for cohort in &self.config.cohorts {
            let mut total = ErrorCounters::default();
            let trials = 0..self.config.trials;
            let results: Vec<Result<(ErrorCounters, BTreeMap<String, f64>)>> = if self.config.parallel_trials {
                std::thread::scope(|s| {
                    let handles: Vec<_> = trials
                        .map(|trial| {
                            s.spawn(move || {
                                let mut t = BTreeMap::new();
                                self.run_trial(cohort, trial, &mut t).map(|c| (c, t))
                            })
                        })
                        .collect();
                    handles.into_iter().map(|h| h.join().expect("trial worker panicked")).collect()
                })
            } else {
                trials
                    .map(|trial| {
                        let mut t = BTreeMap::new();
                        self.run_trial(cohort, trial, &mut t).map(|c| (c, t))
                    })
                    .collect()
            };
            for (trial, r) in results.into_iter().enumerate() {
                let (counters, t) = r?;
                total.add(&counters);
                for (k, v) in t {
                    *timings.entry(k).or_insert(0.0) += v;
                }
                trial_seeds.push(TrialSeed {
                    cohort: *cohort,
                    trial,
                    seed: self.config.trial_seed(trial),
                    temperature: self.trial_temperature(trial),
                });
            }
            error_counters.insert(cohort.to_string(), total);
        }

        let t = Instant::now();
        self.report()?;
        timings.insert("report".to_string(), t.elapsed().as_secs_f64());

        let mut snapshot = self.config.clone();
        snapshot.output_dir = PathBuf::from(".");
        let manifest = RunManifest {
            config: snapshot.to_toml()?,
            trial_seeds,
            artifacts: list_artifacts(&out)?,
            error_counters,
            stage_seconds: self.config.record_timings.then_some(timings),
        };
        write_json(&out.join(MANIFEST_FILE), &manifest)?;
        Ok(manifest)
    }
}

/// Relative paths of every file under `root` except the manifest, sorted.
pub fn list_artifacts(root: &Path) -> Result<Vec<String>> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<String>) -> Result<()> {
        for entry in std::fs::read_dir(dir).map_err(Error::io(dir))? {
            let path = entry.map_err(Error::io(dir))?.path();
            if path.is_dir() {
                walk(root, &path, out)?;
            } else {
                let rel = path.strip_prefix(root).expect("walk stays under root");
                let rel = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
                if rel != MANIFEST_FILE {
                    out.push(rel);
                }
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    walk(root, root, &mut out)?;
    out.sort();
    Ok(out)
}

/// Validates `config` and runs the whole pipeline with the configured
/// gateway.
pub fn run(config: RunConfig) -> Result<RunManifest> {
    Pipeline::new(config)?.run_all()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_cohort, FixtureSpec};

    fn setup(dir: &Path, trials: usize) -> RunConfig {
        let cohort = CohortSpec::new(2025, 4).unwrap();
        let fixture = generate_cohort(&FixtureSpec::new(cohort, 40, 5));
        fixture.write(dir.join("data")).unwrap();
        let mut cfg = RunConfig::new(
            InputPaths {
                markets: dir.join("data/markets.csv"),
                prices: dir.join("data/prices.csv"),
                prompts: None,
            },
            vec![cohort],
        );
        cfg.trials = trials;
        cfg.output_dir = dir.join("out");
        cfg.gateway.kind = GatewayKind::Simulated;
        cfg
    }

    #[test]
    fn one_cohort_two_trials_produces_two_trees() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = setup(dir.path(), 2);
        let manifest = run(cfg).unwrap();
        for trial in ["0", "1"] {
            for f in [
                "clusters/cluster_0.csv",
                "clusters/labels.json",
                "relations/relations.json",
                "evaluation/evaluation.csv",
                "evaluation/accuracy_report.json",
                "graphs/balance.json",
                "backtest/trades.csv",
                "backtest/backtest_report.json",
            ] {
                let rel = format!("2025-04/{trial}/{f}");
                assert!(manifest.artifacts.contains(&rel), "missing {rel}");
            }
        }
        assert!(manifest.artifacts.contains(&"2025-04/trial_stats.json".to_string()));
        assert!(manifest.artifacts.contains(&"report.md".to_string()));
        assert_eq!(manifest.trial_seeds.iter().map(|t| t.seed).collect::<Vec<_>>(), vec![0, 1]);
        assert!(manifest.stage_seconds.is_none());
        assert!(manifest.config.contains("output_dir = \".\""));
    }

    #[test]
    fn invalid_config_fails_before_any_work() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = setup(dir.path(), 1);
        cfg.confidence_threshold = 0.9;
        assert!(matches!(run(cfg), Err(Error::Config(_))));
        assert!(!dir.path().join("out").exists());
    }

    #[test]
    fn unreachable_gateway_is_recorded_not_fatal() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = setup(dir.path(), 1);
        cfg.gateway.kind = GatewayKind::Http;
        cfg.gateway.endpoint = Some("http://127.0.0.1:9/chat".into());
        cfg.gateway.max_retries = 0;
        let manifest = run(cfg).unwrap();
        let c = manifest.error_counters["2025-04"];
        assert_eq!(c.discovery_failures, 4);
        assert_eq!(c.label_fallbacks, 4);
    }

    #[test]
    fn fallback_mock_answers_when_endpoint_is_down() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = setup(dir.path(), 1);
        let script = dir.path().join("mock.json");
        crate::transduction::MockScript::default().save(&script).unwrap();
        cfg.gateway.kind = GatewayKind::Http;
        cfg.gateway.endpoint = Some("http://127.0.0.1:9/chat".into());
        cfg.gateway.fallback_mock_script = Some(script);
        let manifest = run(cfg).unwrap();
        assert_eq!(manifest.error_counters["2025-04"], ErrorCounters::default());
    }

    #[test]
    fn trial_temperature_is_seeded() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = setup(dir.path(), 3);
        let p = Pipeline::new(cfg).unwrap();
        let t0 = p.trial_temperature(0);
        assert_eq!(t0, p.trial_temperature(0));
        assert!((0.0..0.1).contains(&t0));
        assert_ne!(t0, p.trial_temperature(1));
    }
}
