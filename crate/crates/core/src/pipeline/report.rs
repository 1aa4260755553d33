//! Cross-trial aggregation and the markdown report.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::backtest::{read_trades_csv, BacktestReport, SkipReason};
use crate::clustering::read_manifests;
use crate::error::{Error, Result};
use crate::evaluation::{category_frequencies, trial_stats, AccuracyReport, TrialStats};
use crate::market_data::CohortSpec;
use crate::transduction::{Category, LabeledCluster};

use super::{read_json, SampleSummary};

/// Per-trial values of one metric and their descriptive statistics.
/// Trials where the metric is undefined (no eligible pairs, no trades) are
/// counted in `missing` and left out of `values`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub values: Vec<f64>,
    pub missing: usize,
    pub stats: Option<TrialStats>,
}

impl MetricSeries {
    fn from_options(values: impl IntoIterator<Item = Option<f64>>) -> Self {
        let mut kept = Vec::new();
        let mut missing = 0;
        for v in values {
            match v {
                Some(v) => kept.push(v),
                None => missing += 1,
            }
        }
        let stats = trial_stats(&kept).ok();
        MetricSeries { values: kept, missing, stats }
    }
}

/// Category counts and accuracy pooled over every trial of a cohort.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CategoryAggregate {
    pub market_count: usize,
    pub cluster_count: usize,
    pub correct: usize,
    pub pair_count: usize,
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortAggregate {
    pub cohort: CohortSpec,
    pub trials: usize,
    /// Percentage points.
    pub cluster_accuracy: MetricSeries,
    /// Percentage points.
    pub overall_accuracy: MetricSeries,
    /// Percentage points.
    pub roi: MetricSeries,
    /// Resolution delay in days, pooled over every trial's non-tied pairs.
    pub delay_days: MetricSeries,
    pub categories: BTreeMap<Category, CategoryAggregate>,
}

/// Reads the artifacts of trials `0..trials` under `out/{cohort}/`.
pub fn aggregate_cohort(out: &Path, cohort: &CohortSpec, trials: usize) -> Result<CohortAggregate> {
    let cohort_dir = out.join(cohort.to_string());
    let mut cluster_acc = Vec::new();
    let mut overall_acc = Vec::new();
    let mut roi = Vec::new();
    let mut gaps = Vec::new();
    let mut categories: BTreeMap<Category, CategoryAggregate> = BTreeMap::new();
    for trial in 0..trials {
        let dir = cohort_dir.join(trial.to_string());
        let acc: AccuracyReport = read_json(&dir.join("evaluation").join("accuracy_report.json"))?;
        cluster_acc.push(acc.cluster_accuracy.map(|a| a * 100.0));
        overall_acc.push(acc.overall_accuracy.map(|a| a * 100.0));
        let bt: BacktestReport = read_json(&dir.join("backtest").join("backtest_report.json"))?;
        roi.push(bt.roi.map(|r| r * 100.0));

        let trades_path = dir.join("backtest").join("trades.csv");
        let file = std::fs::File::open(&trades_path).map_err(Error::io(&trades_path))?;
        let mut trades = read_trades_csv(file)?;
        trades.sort_by(|a, b| {
            (&a.leader_question, &a.follower_question).cmp(&(&b.leader_question, &b.follower_question))
        });
        gaps.extend(
            trades
                .iter()
                .filter(|t| t.skip_reason != SkipReason::LeaderTie)
                .map(|t| t.resolution_gap_days),
        );

        let clusters = read_manifests(dir.join("clusters"))?;
        let labels: Vec<LabeledCluster> = read_json(&dir.join("clusters").join("labels.json"))?;
        let labels = labels.iter().map(|l| (l.cluster_id, l.category)).collect();
        for (cat, f) in category_frequencies(&clusters, &labels) {
            let c = categories.entry(cat).or_default();
            c.market_count += f.market_count;
            c.cluster_count += f.cluster_count;
        }
        for (cat, s) in &acc.per_category {
            let c = categories.entry(*cat).or_default();
            c.correct += s.correct;
            c.pair_count += s.pair_count;
        }
    }
    for c in categories.values_mut() {
        c.accuracy = (c.pair_count > 0).then(|| c.correct as f64 / c.pair_count as f64);
    }
    Ok(CohortAggregate {
        cohort: *cohort,
        trials,
        cluster_accuracy: MetricSeries::from_options(cluster_acc),
        overall_accuracy: MetricSeries::from_options(overall_acc),
        roi: MetricSeries::from_options(roi),
        delay_days: MetricSeries::from_options(gaps.into_iter().map(Some)),
        categories,
    })
}

pub const STAT_ROWS: [&str; 7] = ["Mean", "Std.", "Min", "25%", "Median", "75%", "Max"];

/// A markdown table with one column per cohort and the rows
/// Mean/Std./Min/25%/Median/75%/Max. A degenerate standard deviation (a
/// single value) is printed with a trailing `*`; an absent column prints `–`.
pub fn render_stats_table(columns: &[(String, Option<TrialStats>)], decimals: usize) -> String {
    let mut out = String::from("| Statistic |");
    for (name, _) in columns {
        let _ = write!(out, " {name} |");
    }
    out.push_str("\n|---|");
    for _ in columns {
        out.push_str("---:|");
    }
    out.push('\n');
    for (i, row) in STAT_ROWS.iter().enumerate() {
        let _ = write!(out, "| {row} |");
        for (_, stats) in columns {
            let cell = match stats {
                None => "–".to_string(),
                Some(s) => {
                    let v = [s.mean, s.std, s.min, s.q25, s.median, s.q75, s.max][i];
                    let flag = if i == 1 && s.is_degenerate() { "*" } else { "" };
                    format!("{v:.decimals$}{flag}")
                }
            };
            let _ = write!(out, " {cell} |");
        }
        out.push('\n');
    }
    out
}

fn fmt_opt(v: Option<f64>, decimals: usize) -> String {
    v.map_or_else(|| "–".to_string(), |v| format!("{v:.decimals$}"))
}

/// Renders the full report from the sample summary and cohort aggregates.
pub fn render_report(summaries: &[SampleSummary], cohorts: &[CohortAggregate]) -> String {
    let mut out = String::from("# Run report\n\n");

    out.push_str("## Sample summary\n\n");
    out.push_str("| Sample | Markets | Volume mean (USD) | Volume std (USD) | Duration mean (days) | Duration std (days) |\n");
    out.push_str("|---|---:|---:|---:|---:|---:|\n");
    for s in summaries {
        let st = &s.stats;
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} |",
            s.sample,
            st.count,
            fmt_opt(st.volume_mean, 0),
            fmt_opt(st.volume_std, 0),
            fmt_opt(st.duration_mean_days, 1),
            fmt_opt(st.duration_std_days, 1),
        );
    }
    out.push('\n');

    let metric = |out: &mut String, title: &str, pick: &dyn Fn(&CohortAggregate) -> &MetricSeries, decimals| {
        let _ = writeln!(out, "## {title}\n");
        let cols: Vec<(String, Option<TrialStats>)> =
            cohorts.iter().map(|c| (c.cohort.to_string(), pick(c).stats.clone())).collect();
        out.push_str(&render_stats_table(&cols, decimals));
        let missing: Vec<String> = cohorts
            .iter()
            .filter(|c| pick(c).missing > 0)
            .map(|c| format!("{} ({})", c.cohort, pick(c).missing))
            .collect();
        if !missing.is_empty() {
            let _ = writeln!(out, "\nTrials without a value: {}", missing.join(", "));
        }
        out.push('\n');
    };
    metric(&mut out, "Cluster accuracy (%)", &|c| &c.cluster_accuracy, 1);
    metric(&mut out, "Overall accuracy (%)", &|c| &c.overall_accuracy, 1);
    metric(&mut out, "ROI (%)", &|c| &c.roi, 1);
    metric(&mut out, "Resolution delay (days)", &|c| &c.delay_days, 2);
    let degenerate = cohorts.iter().any(|c| {
        [&c.cluster_accuracy, &c.overall_accuracy, &c.roi, &c.delay_days]
            .iter()
            .any(|m| m.stats.as_ref().is_some_and(TrialStats::is_degenerate))
    });
    if degenerate {
        out.push_str("`*` single value; the standard deviation is undefined and shown as 0.\n\n");
    }

    for c in cohorts {
        let _ = writeln!(out, "## Categories, {}\n", c.cohort);
        out.push_str("| Category | Markets per trial | Clusters per trial | Eligible pairs (pooled) | Accuracy (%) |\n");
        out.push_str("|---|---:|---:|---:|---:|\n");
        let per_trial = |n: usize| n as f64 / c.trials.max(1) as f64;
        for (cat, a) in &c.categories {
            let _ = writeln!(
                out,
                "| {} | {:.1} | {:.1} | {} | {} |",
                cat.as_str(),
                per_trial(a.market_count),
                per_trial(a.cluster_count),
                a.pair_count,
                fmt_opt(a.accuracy.map(|x| x * 100.0), 1),
            );
        }
        out.push('\n');
    }
    out
}

/// Renders `report.md` from the artifacts under `out`: the ingest summary
/// and every `{YYYY-MM}/trial_stats.json`.
pub fn report_tables(out: &Path) -> Result<String> {
    let summary_path = out.join("ingest").join("summary.json");
    let summaries: Vec<SampleSummary> = if summary_path.exists() { read_json(&summary_path)? } else { Vec::new() };
    let mut cohorts = Vec::new();
    for entry in std::fs::read_dir(out).map_err(Error::io(out))? {
        let path = entry.map_err(Error::io(out))?.path();
        let is_cohort = path
            .file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.parse::<CohortSpec>().is_ok());
        let stats = path.join("trial_stats.json");
        if is_cohort && stats.exists() {
            cohorts.push(read_json::<CohortAggregate>(&stats)?);
        }
    }
    cohorts.sort_by_key(|c| c.cohort.to_string());
    Ok(render_report(&summaries, &cohorts))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quartile_rows_use_linear_interpolation() {
        let s = trial_stats(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        let t = render_stats_table(&[("2025-04".into(), Some(s))], 2);
        assert!(t.contains("| 25% | 1.75 |"), "{t}");
        assert!(t.contains("| Median | 2.50 |"));
        assert!(t.contains("| 75% | 3.25 |"));
        let rows: Vec<&str> = t.lines().skip(2).map(|l| l.split('|').nth(1).unwrap().trim()).collect();
        assert_eq!(rows, STAT_ROWS);
    }

    #[test]
    fn single_trial_flags_std() {
        let s = trial_stats(&[63.9]).unwrap();
        let t = render_stats_table(&[("2025-04".into(), Some(s)), ("2025-05".into(), None)], 1);
        assert!(t.contains("| Std. | 0.0* | – |"), "{t}");
    }

    #[test]
    fn undefined_trials_are_counted_not_averaged() {
        let m = MetricSeries::from_options([Some(50.0), None, Some(70.0)]);
        assert_eq!(m.missing, 1);
        assert_eq!(m.stats.unwrap().mean, 60.0);
        assert!(MetricSeries::from_options([None]).stats.is_none());
    }
}
