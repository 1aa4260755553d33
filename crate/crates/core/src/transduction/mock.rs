//! Offline gateways: a scripted table lookup and a planted-accuracy
//! simulator.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gateway::{fingerprint, ChatGateway, ChatRequest, GatewayError, TemplateId};
use super::schema::{MarketRelation, MarketRelationList};
use super::Category;
use crate::error::{Error, Result};
use crate::market_data::Outcome;

pub const EMPTY_RELATIONS: &str = r#"{"relations": []}"#;
pub const OTHER_LABEL: &str = r#"{"category": "other"}"#;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptDefaults {
    pub cluster_labeling: String,
    pub relationship_discovery: String,
}

impl Default for ScriptDefaults {
    fn default() -> Self {
        ScriptDefaults {
            cluster_labeling: OTHER_LABEL.into(),
            relationship_discovery: EMPTY_RELATIONS.into(),
        }
    }
}

/// Canned responses for one cluster. `responses[n]` answers attempt `n`;
/// later attempts reuse the last entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub template: TemplateId,
    pub questions: Vec<String>,
    pub responses: Vec<String>,
}

/// On-disk form of a scripted mock (JSON).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockScript {
    #[serde(default)]
    pub defaults: ScriptDefaults,
    #[serde(default)]
    pub entries: Vec<ScriptEntry>,
}

impl MockScript {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Captures `gateway`'s first-attempt answers for both templates on
    /// every cluster, so a live or simulated session can be replayed
    /// offline. Clusters with the same member set are recorded once.
    pub fn record(gateway: &dyn ChatGateway, clusters: &[Vec<String>], seed: u64) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        let mut entries = Vec::new();
        for questions in clusters {
            for template in [TemplateId::ClusterLabeling, TemplateId::RelationshipDiscovery] {
                if !seen.insert(fingerprint(template, questions)) {
                    continue;
                }
                let request = ChatRequest {
                    model: "recorder".into(),
                    temperature: 0.0,
                    messages: Vec::new(),
                    template,
                    questions: questions.clone(),
                    attempt: 0,
                    seed,
                };
                let response = gateway
                    .complete(&request)
                    .map_err(|e| Error::Config(format!("recording failed: {e}")))?;
                entries.push(ScriptEntry { template, questions: questions.clone(), responses: vec![response] });
            }
        }
        Ok(MockScript { defaults: ScriptDefaults::default(), entries })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(Error::io(path))
    }
}

/// Deterministic gateway that answers from a fingerprint-keyed table.
#[derive(Debug, Clone, Default)]
pub struct ScriptedGateway {
    table: BTreeMap<String, Vec<String>>,
    defaults: ScriptDefaults,
}

impl ScriptedGateway {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_script(script: &MockScript) -> Self {
        let mut g = ScriptedGateway { table: BTreeMap::new(), defaults: script.defaults.clone() };
        for e in &script.entries {
            g.insert(e.template, &e.questions, e.responses.clone());
        }
        g
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(Self::from_script(&MockScript::load(path)?))
    }

    pub fn with_default(mut self, template: TemplateId, response: impl Into<String>) -> Self {
        match template {
            TemplateId::ClusterLabeling => self.defaults.cluster_labeling = response.into(),
            TemplateId::RelationshipDiscovery => self.defaults.relationship_discovery = response.into(),
        }
        self
    }

    pub fn with_response(mut self, template: TemplateId, questions: &[String], response: impl Into<String>) -> Self {
        self.insert(template, questions, vec![response.into()]);
        self
    }

    pub fn insert(&mut self, template: TemplateId, questions: &[String], responses: Vec<String>) {
        self.table.insert(fingerprint(template, questions), responses);
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

impl ChatGateway for ScriptedGateway {
    fn complete(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        if let Some(responses) = self.table.get(&request.fingerprint()) {
            if let Some(last) = responses.last() {
                let idx = (request.attempt as usize).min(responses.len() - 1);
                return Ok(responses.get(idx).unwrap_or(last).clone());
            }
        }
        Ok(match request.template {
            TemplateId::ClusterLabeling => self.defaults.cluster_labeling.clone(),
            TemplateId::RelationshipDiscovery => self.defaults.relationship_discovery.clone(),
        })
    }
}

const KEYWORDS: &[(Category, &[&str])] = &[
    (Category::Crypto, &["bitcoin", "btc", "ethereum", "eth", "solana", "crypto", "token", "memecoin"]),
    (Category::Sports, &["nba", "nfl", "mlb", "nhl", "finals", "championship", "cup", "league", "win", "match", "open"]),
    (Category::Elections, &["election", "elected", "primary", "vote", "ballot", "mayor", "nominee"]),
    (Category::Economy, &["fed", "rates", "rate", "inflation", "cpi", "gdp", "recession", "unemployment", "tariff", "tariffs"]),
    (Category::Earnings, &["earnings", "revenue", "eps", "quarterly"]),
    (Category::Finance, &["stock", "s&p", "nasdaq", "ipo", "shares", "price", "dow"]),
    (Category::Tech, &["ai", "openai", "apple", "google", "release", "launch", "gpt", "iphone"]),
    (Category::Geopolitics, &["ukraine", "russia", "israel", "iran", "china", "ceasefire", "nato", "war"]),
    (Category::Politics, &["trump", "biden", "president", "congress", "senate", "bill", "executive", "order"]),
    (Category::Culture, &["movie", "album", "oscar", "grammy", "song", "box", "office", "celebrity"]),
];

/// Offline stand-in for a model with a known hit rate.
///
/// For discovery it proposes up to `max_pairs_per_cluster` member pairs and
/// states the realized relation with probability `accuracy` (the opposite
/// otherwise). Confidences are drawn uniformly from `confidence_range`.
/// Labels come from a keyword vote. All draws are seeded from the request
/// fingerprint and trial seed, so responses are reproducible.
#[derive(Debug, Clone)]
pub struct SimulatedGateway {
    outcomes: BTreeMap<String, Outcome>,
    pub accuracy: f64,
    pub max_pairs_per_cluster: usize,
    pub confidence_range: (f64, f64),
}

impl SimulatedGateway {
    pub fn new(outcomes: BTreeMap<String, Outcome>, accuracy: f64) -> Self {
        SimulatedGateway {
            outcomes,
            accuracy,
            max_pairs_per_cluster: 6,
            confidence_range: (0.3, 1.0),
        }
    }

    fn rng(&self, request: &ChatRequest) -> ChaCha8Rng {
        let fp = request.fingerprint();
        let base = u64::from_str_radix(&fp[..16], 16).unwrap_or(0);
        ChaCha8Rng::seed_from_u64(base ^ request.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15))
    }

    fn label(&self, request: &ChatRequest) -> String {
        let mut votes = [0usize; 11];
        for q in &request.questions {
            let lowered = q.to_lowercase();
            for word in lowered.split(|c: char| !c.is_alphanumeric() && c != '&') {
                for (cat, words) in KEYWORDS {
                    if words.contains(&word) {
                        votes[*cat as usize] += 1;
                    }
                }
            }
        }
        let best = Category::ALL
            .iter()
            .copied()
            .filter(|c| votes[*c as usize] > 0)
            .max_by_key(|c| (votes[*c as usize], std::cmp::Reverse(*c as usize)))
            .unwrap_or(Category::Other);
        serde_json::json!({ "category": best.as_str() }).to_string()
    }

    fn relations(&self, request: &ChatRequest) -> String {
        let mut rng = self.rng(request);
        let mut members: Vec<&String> = request
            .questions
            .iter()
            .filter(|q| self.outcomes.contains_key(q.as_str()))
            .collect();
        members.sort();
        let mut pairs = Vec::new();
        for (a, qa) in members.iter().enumerate() {
            for qb in &members[a + 1..] {
                pairs.push((*qa, *qb));
            }
        }
        pairs.shuffle(&mut rng);
        pairs.truncate(self.max_pairs_per_cluster);
        let (lo, hi) = self.confidence_range;
        let relations = pairs
            .into_iter()
            .map(|(qi, qj)| {
                let truth = self.outcomes[qi.as_str()] == self.outcomes[qj.as_str()];
                let correct = rng.gen_bool(self.accuracy.clamp(0.0, 1.0));
                let is_same_outcome = if correct { truth } else { !truth };
                let confidence_score = (rng.gen_range(lo..=hi) * 100.0).round() / 100.0;
                MarketRelation {
                    question_i: qi.clone(),
                    question_j: qj.clone(),
                    is_same_outcome,
                    confidence_score,
                    rationale: if is_same_outcome {
                        "Both questions hinge on the same underlying event.".into()
                    } else {
                        "The questions describe mutually exclusive developments.".into()
                    },
                }
            })
            .collect();
        serde_json::to_string(&MarketRelationList { relations }).expect("relations serialize")
    }
}

impl ChatGateway for SimulatedGateway {
    fn complete(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        Ok(match request.template {
            TemplateId::ClusterLabeling => self.label(request),
            TemplateId::RelationshipDiscovery => self.relations(request),
        })
    }
}
