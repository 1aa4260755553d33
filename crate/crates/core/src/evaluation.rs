//! Scoring predicted relations against realized outcomes.
//!
//! A relation is correct when its same/different call matches whether the
//! two markets actually resolved alike. Only relations at or above the
//! confidence threshold are eligible for scoring. Two aggregates are kept:
//! the unweighted mean of per-cluster accuracies and the accuracy pooled
//! over all eligible pairs.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::clustering::ClusterManifest;
use crate::error::{Error, Result};
use crate::market_data::{MarketIndex, Outcome};
use crate::transduction::{Category, ClusterRelation, MarketRelation};

pub const DEFAULT_CONFIDENCE_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluatedRelation {
    pub relation: MarketRelation,
    pub cluster_id: usize,
    pub category: Category,
    pub outcome_i: Outcome,
    pub outcome_j: Outcome,
    pub ground_truth_same: bool,
    pub is_correct: bool,
    pub eligible: bool,
}

/// Joins each relation with the realized outcomes of its two markets.
pub fn evaluate_relations(
    relations: &[ClusterRelation],
    markets: &MarketIndex,
    labels: &BTreeMap<usize, Category>,
    threshold: f64,
) -> Result<Vec<EvaluatedRelation>> {
    relations
        .iter()
        .map(|r| {
            let outcome = |q: &str| {
                markets
                    .get(q)
                    .map(|m| m.outcome)
                    .ok_or_else(|| Error::Integrity(format!("relation names unknown market {q:?}")))
            };
            let outcome_i = outcome(&r.question_i)?;
            let outcome_j = outcome(&r.question_j)?;
            let category = *labels
                .get(&r.cluster_id)
                .ok_or_else(|| Error::Integrity(format!("cluster {} has no label", r.cluster_id)))?;
            let ground_truth_same = outcome_i == outcome_j;
            Ok(EvaluatedRelation {
                relation: r.relation(),
                cluster_id: r.cluster_id,
                category,
                outcome_i,
                outcome_j,
                ground_truth_same,
                is_correct: r.is_same_outcome == ground_truth_same,
                eligible: r.confidence_score >= threshold,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupScore {
    pub correct: usize,
    pub pair_count: usize,
    pub accuracy: f64,
}

impl GroupScore {
    fn from_counts(correct: usize, pair_count: usize) -> Self {
        GroupScore { correct, pair_count, accuracy: correct as f64 / pair_count as f64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    /// Mean of per-cluster accuracies over clusters with an eligible pair.
    pub cluster_accuracy: Option<f64>,
    /// Fraction correct over all eligible pairs.
    pub overall_accuracy: Option<f64>,
    pub eligible_pair_count: usize,
    pub correct_pair_count: usize,
    pub per_cluster: BTreeMap<usize, GroupScore>,
    pub per_category: BTreeMap<Category, GroupScore>,
}

pub fn accuracy_report(evaluated: &[EvaluatedRelation]) -> AccuracyReport {
    let mut clusters: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    let mut categories: BTreeMap<Category, (usize, usize)> = BTreeMap::new();
    for e in evaluated.iter().filter(|e| e.eligible) {
        for slot in [
            clusters.entry(e.cluster_id).or_default(),
            categories.entry(e.category).or_default(),
        ] {
            slot.0 += usize::from(e.is_correct);
            slot.1 += 1;
        }
    }
    let per_cluster: BTreeMap<usize, GroupScore> = clusters
        .into_iter()
        .map(|(k, (c, n))| (k, GroupScore::from_counts(c, n)))
        .collect();
    let per_category = categories
        .into_iter()
        .map(|(k, (c, n))| (k, GroupScore::from_counts(c, n)))
        .collect();
    let eligible_pair_count: usize = per_cluster.values().map(|s| s.pair_count).sum();
    let correct_pair_count: usize = per_cluster.values().map(|s| s.correct).sum();
    let cluster_accuracy = (!per_cluster.is_empty()).then(|| {
        per_cluster.values().map(|s| s.accuracy).sum::<f64>() / per_cluster.len() as f64
    });
    let overall_accuracy =
        (eligible_pair_count > 0).then(|| correct_pair_count as f64 / eligible_pair_count as f64);
    AccuracyReport {
        cluster_accuracy,
        overall_accuracy,
        eligible_pair_count,
        correct_pair_count,
        per_cluster,
        per_category,
    }
}

/// A fraction expressed in percentage points, rounded to one decimal.
pub fn percent(fraction: f64) -> f64 {
    (fraction * 1000.0).round() / 10.0
}

/// Descriptive statistics across trials. `std` is the sample standard
/// deviation; with a single value it is reported as 0 and `n == 1` marks
/// the row as degenerate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialStats {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

impl TrialStats {
    pub fn is_degenerate(&self) -> bool {
        self.n < 2
    }
}

/// Linear-interpolation quantile (type 7) of already sorted values.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn trial_stats(values: &[f64]) -> Result<TrialStats> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("trial_stats needs at least one value".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("trial_stats values must be finite".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (mean, std) = crate::market_data::mean_std(values);
    Ok(TrialStats {
        n: values.len(),
        mean: mean.unwrap_or_default(),
        std: std.unwrap_or(0.0),
        min: sorted[0],
        q25: quantile_sorted(&sorted, 0.25),
        median: quantile_sorted(&sorted, 0.5),
        q75: quantile_sorted(&sorted, 0.75),
        max: sorted[sorted.len() - 1],
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryFrequency {
    pub market_count: usize,
    pub cluster_count: usize,
}

/// Markets and clusters per category label.
pub fn category_frequencies(
    clusters: &[ClusterManifest],
    labels: &BTreeMap<usize, Category>,
) -> BTreeMap<Category, CategoryFrequency> {
    let mut out: BTreeMap<Category, CategoryFrequency> = BTreeMap::new();
    for c in clusters {
        let cat = labels.get(&c.cluster_id).copied().unwrap_or(Category::Other);
        let f = out.entry(cat).or_default();
        f.cluster_count += 1;
        f.market_count += c.questions.len();
    }
    out
}

#[derive(Debug, Serialize, Deserialize)]
struct EvaluationRow {
    cluster_id: usize,
    category: Category,
    question_i: String,
    question_j: String,
    is_same_outcome: bool,
    confidence_score: f64,
    rationale: String,
    outcome_i: Outcome,
    outcome_j: Outcome,
    ground_truth_same: bool,
    is_correct: bool,
    eligible: bool,
}

pub fn write_evaluation_csv<W: Write>(evaluated: &[EvaluatedRelation], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    for e in evaluated {
        w.serialize(EvaluationRow {
            cluster_id: e.cluster_id,
            category: e.category,
            question_i: e.relation.question_i.clone(),
            question_j: e.relation.question_j.clone(),
            is_same_outcome: e.relation.is_same_outcome,
            confidence_score: e.relation.confidence_score,
            rationale: e.relation.rationale.clone(),
            outcome_i: e.outcome_i,
            outcome_j: e.outcome_j,
            ground_truth_same: e.ground_truth_same,
            is_correct: e.is_correct,
            eligible: e.eligible,
        })?;
    }
    if evaluated.is_empty() {
        w.write_record([
            "cluster_id", "category", "question_i", "question_j", "is_same_outcome",
            "confidence_score", "rationale", "outcome_i", "outcome_j", "ground_truth_same",
            "is_correct", "eligible",
        ])?;
    }
    w.flush().map_err(Error::io("<evaluation writer>"))?;
    Ok(())
}

pub fn read_evaluation_csv<R: Read>(source: R) -> Result<Vec<EvaluatedRelation>> {
    let mut reader = csv::Reader::from_reader(source);
    reader
        .deserialize::<EvaluationRow>()
        .map(|row| {
            let r = row?;
            Ok(EvaluatedRelation {
                relation: MarketRelation {
                    question_i: r.question_i,
                    question_j: r.question_j,
                    is_same_outcome: r.is_same_outcome,
                    confidence_score: r.confidence_score,
                    rationale: r.rationale,
                },
                cluster_id: r.cluster_id,
                category: r.category,
                outcome_i: r.outcome_i,
                outcome_j: r.outcome_j,
                ground_truth_same: r.ground_truth_same,
                is_correct: r.is_correct,
                eligible: r.eligible,
            })
        })
        .collect()
}

pub fn read_evaluation_path(path: impl AsRef<Path>) -> Result<Vec<EvaluatedRelation>> {
    let path = path.as_ref();
    read_evaluation_csv(std::fs::File::open(path).map_err(Error::io(path))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::simple_market;

    fn rel(cluster_id: usize, qi: &str, qj: &str, same: bool, c: f64) -> ClusterRelation {
        ClusterRelation {
            cluster_id,
            question_i: qi.into(),
            question_j: qj.into(),
            is_same_outcome: same,
            confidence_score: c,
            rationale: "r".into(),
        }
    }

    fn fixture() -> (MarketIndex, BTreeMap<usize, Category>) {
        let mut m = MarketIndex::new();
        for (q, o) in [("A", Outcome::Yes), ("B", Outcome::Yes), ("C", Outcome::No), ("D", Outcome::No)] {
            m.insert(q.into(), simple_market(q, o));
        }
        let labels = [(0, Category::Politics), (1, Category::Crypto)].into_iter().collect();
        (m, labels)
    }

    #[test]
    fn correctness_follows_the_definition() {
        let (m, l) = fixture();
        let out = evaluate_relations(
            &[rel(0, "A", "B", true, 0.9), rel(0, "A", "C", true, 0.9), rel(0, "C", "D", false, 0.49)],
            &m,
            &l,
            0.5,
        )
        .unwrap();
        assert!(out[0].ground_truth_same && out[0].is_correct);
        assert!(!out[1].ground_truth_same && !out[1].is_correct);
        assert!(!out[2].eligible && !out[2].is_correct);
        assert!(evaluate_relations(&[rel(0, "A", "Z", true, 0.9)], &m, &l, 0.5).is_err());
        assert!(evaluate_relations(&[rel(9, "A", "B", true, 0.9)], &m, &l, 0.5).is_err());
    }

    #[test]
    fn threshold_is_inclusive() {
        let (m, l) = fixture();
        let out = evaluate_relations(&[rel(0, "A", "B", true, 0.5)], &m, &l, 0.5).unwrap();
        assert!(out[0].eligible);
    }

    #[test]
    fn cluster_mean_and_pooled_diverge() {
        let (m, l) = fixture();
        // cluster 0: one correct pair; cluster 1: one correct, one wrong
        let out = evaluate_relations(
            &[
                rel(0, "A", "B", true, 0.8),
                rel(1, "A", "C", false, 0.8),
                rel(1, "B", "D", true, 0.8),
                rel(1, "C", "D", false, 0.2),
            ],
            &m,
            &l,
            0.5,
        )
        .unwrap();
        let r = accuracy_report(&out);
        assert_eq!(r.cluster_accuracy, Some(0.75));
        assert_eq!(r.overall_accuracy, Some(2.0 / 3.0));
        assert_eq!(percent(r.cluster_accuracy.unwrap()), 75.0);
        assert_eq!(percent(r.overall_accuracy.unwrap()), 66.7);
        assert_eq!(r.eligible_pair_count, 3);
        assert_eq!(r.per_category[&Category::Crypto].pair_count, 2);
        assert_eq!(r.per_category[&Category::Politics].accuracy, 1.0);
    }

    #[test]
    fn no_eligible_pairs_means_absent_accuracy() {
        let (m, l) = fixture();
        let out = evaluate_relations(&[rel(0, "A", "B", true, 0.1)], &m, &l, 0.5).unwrap();
        let r = accuracy_report(&out);
        assert_eq!((r.cluster_accuracy, r.overall_accuracy, r.eligible_pair_count), (None, None, 0));
        assert!(r.per_category.is_empty());
    }

    #[test]
    fn trial_stats_quantiles() {
        let s = trial_stats(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!((s.q25, s.median, s.q75), (1.75, 2.5, 3.25));
        assert_eq!((s.min, s.max, s.mean), (1.0, 4.0, 2.5));

        let s = trial_stats(&[40.0, 60.0]).unwrap();
        assert_eq!((s.mean, s.median, s.min, s.max), (50.0, 50.0, 40.0, 60.0));

        let s = trial_stats(&[50.0]).unwrap();
        assert_eq!((s.mean, s.std, s.n), (50.0, 0.0, 1));
        assert!(s.is_degenerate());

        assert!(trial_stats(&[]).is_err());
        assert!(trial_stats(&[f64::NAN]).is_err());
    }

    #[test]
    fn category_frequency_counts() {
        let clusters = vec![
            ClusterManifest { cluster_id: 0, questions: vec!["a".into(), "b".into()] },
            ClusterManifest { cluster_id: 1, questions: vec!["c".into()] },
            ClusterManifest { cluster_id: 2, questions: vec!["d".into()] },
        ];
        let labels = [(0, Category::Sports), (1, Category::Sports), (2, Category::Tech)].into_iter().collect();
        let f = category_frequencies(&clusters, &labels);
        assert_eq!(f[&Category::Sports], CategoryFrequency { market_count: 3, cluster_count: 2 });
        assert_eq!(f[&Category::Tech].cluster_count, 1);
    }

    #[test]
    fn evaluation_csv_round_trip() {
        let (m, l) = fixture();
        let out = evaluate_relations(&[rel(0, "A", "B", true, 0.9), rel(1, "C", "D, x", false, 0.3)], &m, &{
            let mut l = l.clone();
            l.insert(1, Category::Crypto);
            l
        }, 0.5);
        assert!(out.is_err());
        let out = evaluate_relations(&[rel(0, "A", "B", true, 0.9), rel(1, "C", "D", false, 0.3)], &m, &l, 0.5).unwrap();
        let mut buf = Vec::new();
        write_evaluation_csv(&out, &mut buf).unwrap();
        assert_eq!(read_evaluation_csv(buf.as_slice()).unwrap(), out);

        let mut empty = Vec::new();
        write_evaluation_csv(&[], &mut empty).unwrap();
        assert!(read_evaluation_csv(empty.as_slice()).unwrap().is_empty());
    }
}
