//! Signed graph of predicted relations and triangle balance checks.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::EvaluatedRelation;
use crate::market_data::{MarketIndex, Outcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Same,
    Different,
}

impl Sign {
    pub fn from_same(is_same_outcome: bool) -> Self {
        if is_same_outcome {
            Sign::Same
        } else {
            Sign::Different
        }
    }

    pub fn value(self) -> i8 {
        match self {
            Sign::Same => 1,
            Sign::Different => -1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignedEdge {
    /// Lexicographically smaller endpoint.
    pub question_a: String,
    pub question_b: String,
    pub sign: Sign,
    pub predicted_correct: bool,
    pub confidence: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SignedGraph {
    /// Question to realized outcome.
    pub nodes: BTreeMap<String, Outcome>,
    /// Sorted by endpoint pair; at most one edge per pair.
    pub edges: Vec<SignedEdge>,
    /// Pairs that received relations with opposite signs.
    pub conflicts: usize,
}

impl SignedGraph {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let g: SignedGraph = serde_json::from_str(text)?;
        for e in &g.edges {
            if e.question_a == e.question_b {
                return Err(Error::InvalidArgument(format!("self-loop on {:?}", e.question_a)));
            }
            if !g.nodes.contains_key(&e.question_a) || !g.nodes.contains_key(&e.question_b) {
                return Err(Error::InvalidArgument("edge references a missing node".into()));
            }
        }
        Ok(g)
    }

    fn sign_map(&self) -> BTreeMap<(&str, &str), Sign> {
        self.edges
            .iter()
            .map(|e| ((e.question_a.as_str(), e.question_b.as_str()), e.sign))
            .collect()
    }
}

/// Builds the graph from eligible relations. When a pair is predicted more
/// than once the most confident relation wins; opposite-sign repeats are
/// counted as conflicts.
pub fn build_graph(evaluated: &[EvaluatedRelation], markets: &MarketIndex) -> Result<SignedGraph> {
    let mut edges: BTreeMap<(String, String), SignedEdge> = BTreeMap::new();
    let mut conflicts = 0;
    for e in evaluated.iter().filter(|e| e.eligible) {
        let (a, b) = e.relation.pair_key();
        if a == b {
            return Err(Error::Integrity(format!("relation pairs {a:?} with itself")));
        }
        let edge = SignedEdge {
            question_a: a.clone(),
            question_b: b.clone(),
            sign: Sign::from_same(e.relation.is_same_outcome),
            predicted_correct: e.is_correct,
            confidence: e.relation.confidence_score,
        };
        match edges.get_mut(&(a.clone(), b.clone())) {
            Some(existing) => {
                if existing.sign != edge.sign {
                    conflicts += 1;
                }
                if edge.confidence > existing.confidence {
                    *existing = edge;
                }
            }
            None => {
                edges.insert((a, b), edge);
            }
        }
    }
    let mut nodes = BTreeMap::new();
    for e in edges.values() {
        for q in [&e.question_a, &e.question_b] {
            let m = markets
                .get(q)
                .ok_or_else(|| Error::Integrity(format!("graph node {q:?} has no market record")))?;
            nodes.insert(q.clone(), m.outcome);
        }
    }
    Ok(SignedGraph { nodes, edges: edges.into_values().collect(), conflicts })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriangleViolation {
    /// Sorted question triple `(a, b, c)`.
    pub questions: [String; 3],
    /// Signs of edges `ab`, `bc`, `ac`.
    pub signs: [Sign; 3],
}

fn closed_triangles(graph: &SignedGraph) -> Vec<([String; 3], [Sign; 3])> {
    let signs = graph.sign_map();
    let mut neighbors: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for (a, b) in signs.keys() {
        neighbors.entry(a).or_default().insert(b);
        neighbors.entry(b).or_default().insert(a);
    }
    let mut out = Vec::new();
    for (&(a, b), &s_ab) in &signs {
        // a < b; look for c > b adjacent to both so each triangle is seen once
        let (Some(na), Some(nb)) = (neighbors.get(a), neighbors.get(b)) else {
            continue;
        };
        for &c in na.intersection(nb).filter(|c| **c > b) {
            let s_bc = signs[&(b, c)];
            let s_ac = signs[&(a, c)];
            out.push(([a.to_string(), b.to_string(), c.to_string()], [s_ab, s_bc, s_ac]));
        }
    }
    out
}

/// True when the triangle's sign product is negative, i.e. it has an odd
/// number of `different` edges.
pub fn is_unbalanced(signs: [Sign; 3]) -> bool {
    signs.iter().map(|s| s.value()).product::<i8>() < 0
}

/// Every closed triangle with an odd number of `different` edges.
pub fn find_triangle_violations(graph: &SignedGraph) -> Vec<TriangleViolation> {
    closed_triangles(graph)
        .into_iter()
        .filter(|(_, s)| is_unbalanced(*s))
        .map(|(questions, signs)| TriangleViolation { questions, signs })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BalanceSummary {
    pub triangles: usize,
    pub violations: usize,
    pub violation_rate: Option<f64>,
}

pub fn balance_summary(graph: &SignedGraph) -> BalanceSummary {
    let all = closed_triangles(graph);
    let violations = all.iter().filter(|(_, s)| is_unbalanced(*s)).count();
    BalanceSummary {
        triangles: all.len(),
        violations,
        violation_rate: (!all.is_empty()).then(|| violations as f64 / all.len() as f64),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphFormat {
    Dot,
    Json,
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"").replace('\n', "\\n")
}

/// Renders the graph. In DOT, node fill encodes the realized outcome
/// (green YES, red NO), edge color the predicted sign (black same, blue
/// different) and edge style whether the prediction held (solid) or not
/// (dashed).
pub fn export_graph(graph: &SignedGraph, format: GraphFormat) -> Result<String> {
    match format {
        GraphFormat::Json => graph.to_json(),
        GraphFormat::Dot => Ok(to_dot(graph)),
    }
}

fn to_dot(graph: &SignedGraph) -> String {
    let ids: BTreeMap<&str, usize> = graph.nodes.keys().enumerate().map(|(i, q)| (q.as_str(), i)).collect();
    let mut out = String::from("graph relations {\n  node [shape=box, style=filled];\n");
    for (q, outcome) in &graph.nodes {
        let fill = match outcome {
            Outcome::Yes => "palegreen",
            Outcome::No => "lightcoral",
        };
        let _ = writeln!(
            out,
            "  n{} [label=\"{}\", fillcolor=\"{fill}\", outcome=\"{outcome}\"];",
            ids[q.as_str()],
            dot_escape(q)
        );
    }
    for e in &graph.edges {
        let color = match e.sign {
            Sign::Same => "black",
            Sign::Different => "blue",
        };
        let style = if e.predicted_correct { "solid" } else { "dashed" };
        let _ = writeln!(
            out,
            "  n{} -- n{} [color=\"{color}\", style=\"{style}\", label=\"{:.2}\"];",
            ids[e.question_a.as_str()],
            ids[e.question_b.as_str()],
            e.confidence
        );
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::simple_market;
    use crate::transduction::{Category, MarketRelation};

    const INCREASE: &str = "Will Trump increase tariffs on Canada before May?";
    const REMOVE: &str = "Will Trump remove tariff on Canada before May?";

    fn evaluated(qi: &str, qj: &str, same: bool, c: f64, correct: bool) -> EvaluatedRelation {
        EvaluatedRelation {
            relation: MarketRelation {
                question_i: qi.into(),
                question_j: qj.into(),
                is_same_outcome: same,
                confidence_score: c,
                rationale: "r".into(),
            },
            cluster_id: 0,
            category: Category::Politics,
            outcome_i: Outcome::Yes,
            outcome_j: Outcome::No,
            ground_truth_same: false,
            is_correct: correct,
            eligible: c >= 0.5,
        }
    }

    fn index(qs: &[(&str, Outcome)]) -> MarketIndex {
        qs.iter().map(|(q, o)| (q.to_string(), simple_market(q, *o))).collect()
    }

    #[test]
    fn example_pair_becomes_a_different_edge() {
        let m = index(&[(INCREASE, Outcome::No), (REMOVE, Outcome::Yes)]);
        let g = build_graph(&[evaluated(REMOVE, INCREASE, false, 0.95, true)], &m).unwrap();
        assert_eq!(g.edges.len(), 1);
        assert_eq!(g.edges[0].sign, Sign::Different);
        assert_eq!(g.edges[0].confidence, 0.95);
        assert_eq!(g.edges[0].question_a, INCREASE);
        assert_eq!(g.nodes[REMOVE], Outcome::Yes);
        let dot = export_graph(&g, GraphFormat::Dot).unwrap();
        assert!(dot.contains("color=\"blue\", style=\"solid\""));
    }

    #[test]
    fn empty_input_gives_empty_graph() {
        let g = build_graph(&[], &MarketIndex::new()).unwrap();
        assert!(g.nodes.is_empty() && g.edges.is_empty());
        assert_eq!(export_graph(&g, GraphFormat::Dot).unwrap(), "graph relations {\n  node [shape=box, style=filled];\n}\n");
        let json = export_graph(&g, GraphFormat::Json).unwrap();
        assert_eq!(SignedGraph::from_json(&json).unwrap(), g);
    }

    #[test]
    fn conflicting_repeats_keep_the_confident_edge() {
        let m = index(&[("A", Outcome::Yes), ("B", Outcome::Yes)]);
        let g = build_graph(
            &[evaluated("A", "B", true, 0.9, true), evaluated("B", "A", false, 0.6, false)],
            &m,
        )
        .unwrap();
        assert_eq!(g.edges.len(), 1);
        assert_eq!(g.edges[0].sign, Sign::Same);
        assert_eq!(g.conflicts, 1);
    }

    #[test]
    fn ineligible_relations_are_not_edges() {
        let m = index(&[("A", Outcome::Yes), ("B", Outcome::Yes)]);
        let g = build_graph(&[evaluated("A", "B", true, 0.4, true)], &m).unwrap();
        assert!(g.edges.is_empty() && g.nodes.is_empty());
    }

    #[test]
    fn parity_rule_matches_realizability() {
        // a sign triple is balanced iff some outcome assignment realizes it
        let signs = [Sign::Same, Sign::Different];
        for &ab in &signs {
            for &bc in &signs {
                for &ac in &signs {
                    let realizable = (0..8u8).any(|bits| {
                        let o = |i: u8| bits >> i & 1;
                        Sign::from_same(o(0) == o(1)) == ab
                            && Sign::from_same(o(1) == o(2)) == bc
                            && Sign::from_same(o(0) == o(2)) == ac
                    });
                    assert_eq!(is_unbalanced([ab, bc, ac]), !realizable, "{ab:?} {bc:?} {ac:?}");
                }
            }
        }
        assert!(!is_unbalanced([Sign::Different, Sign::Different, Sign::Same]));
        assert!(is_unbalanced([Sign::Same, Sign::Same, Sign::Different]));
    }

    #[test]
    fn dot_escapes_quotes() {
        let q = "Will \"X\" win?";
        let m = index(&[(q, Outcome::Yes), ("B", Outcome::No)]);
        let g = build_graph(&[evaluated(q, "B", false, 0.7, false)], &m).unwrap();
        let dot = export_graph(&g, GraphFormat::Dot).unwrap();
        assert!(dot.contains("Will \\\"X\\\" win?"));
        assert!(dot.contains("style=\"dashed\""));
    }
}
