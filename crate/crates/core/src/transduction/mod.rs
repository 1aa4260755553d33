//! Cluster labeling and relationship discovery through a chat model.
//!
//! Both stages render a prompt template, call a [`ChatGateway`], and
//! validate the reply against a strict schema. Invalid replies are retried
//! with the validation error appended to the conversation; once retries are
//! exhausted the stage degrades (label `other`, or no relations) and the
//! failure is recorded instead of aborting the run.

mod gateway;
mod mock;
mod schema;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::clustering::ClusterManifest;
use crate::error::{Error, Result};
use crate::market_data::{format_timestamp, MarketIndex};

pub use gateway::{
    fingerprint, ChatGateway, ChatMessage, ChatRequest, GatewayError, HttpChatGateway, TemplateId,
};
pub use mock::{
    MockScript, ScriptDefaults, ScriptEntry, ScriptedGateway, SimulatedGateway, EMPTY_RELATIONS,
    OTHER_LABEL,
};
pub use schema::{
    parse_relation_list, strip_code_fence, FieldIssue, MarketRelation, MarketRelationList,
    SchemaError,
};

/// Closed cluster taxonomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Politics,
    Geopolitics,
    Elections,
    Economy,
    Finance,
    Earnings,
    Crypto,
    Tech,
    Sports,
    Culture,
    Other,
}

impl Category {
    pub const ALL: [Category; 11] = [
        Category::Politics,
        Category::Geopolitics,
        Category::Elections,
        Category::Economy,
        Category::Finance,
        Category::Earnings,
        Category::Crypto,
        Category::Tech,
        Category::Sports,
        Category::Culture,
        Category::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Politics => "politics",
            Category::Geopolitics => "geopolitics",
            Category::Elections => "elections",
            Category::Economy => "economy",
            Category::Finance => "finance",
            Category::Earnings => "earnings",
            Category::Crypto => "crypto",
            Category::Tech => "tech",
            Category::Sports => "sports",
            Category::Culture => "culture",
            Category::Other => "other",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        Category::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(t))
            .ok_or_else(|| format!("category {t:?} is not in the taxonomy"))
    }
}

/// Prompt-side view of a market.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SingleMarket {
    pub question: String,
    pub market_start_time: String,
    pub market_end_time: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub news_summary: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledCluster {
    pub cluster_id: usize,
    /// Member questions serialized as a JSON array.
    pub markets: String,
    pub category: Category,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransductionConfig {
    pub model_name: String,
    pub temperature: f64,
    pub max_retries: u32,
    pub concurrency_cap: usize,
}

impl Default for TransductionConfig {
    fn default() -> Self {
        TransductionConfig {
            model_name: "mock".into(),
            temperature: 0.0,
            max_retries: 2,
            concurrency_cap: 4,
        }
    }
}

impl TransductionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(Error::Config("temperature must be non-negative".into()));
        }
        if self.concurrency_cap == 0 {
            return Err(Error::Config("concurrency_cap must be positive".into()));
        }
        Ok(())
    }
}

pub const LABELING_TEMPLATE: &str = include_str!("../../prompts/cluster_labeling.txt");
pub const DISCOVERY_TEMPLATE: &str = include_str!("../../prompts/relationship_discovery.txt");
pub const QUESTIONS_PLACEHOLDER: &str = "{{questions}}";

const LABELING_FORMAT: &str = "Respond with a single JSON object of the form \
{\"markets\": <the market list as given>, \"category\": <one category name>}.";
const DISCOVERY_FORMAT: &str = "Respond with a single JSON object of the form \
{\"relations\": [{\"question_i\": string, \"question_j\": string, \"is_same_outcome\": boolean, \
\"confidence_score\": number, \"rationale\": string}]}. Return {\"relations\": []} if no pair qualifies.";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplates {
    pub labeling: String,
    pub discovery: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        PromptTemplates {
            labeling: LABELING_TEMPLATE.into(),
            discovery: DISCOVERY_TEMPLATE.into(),
        }
    }
}

impl PromptTemplates {
    /// Reads `cluster_labeling.txt` and `relationship_discovery.txt`.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let read = |name: &str| -> Result<String> {
            let p = dir.join(name);
            let text = std::fs::read_to_string(&p).map_err(Error::io(&p))?;
            if !text.contains(QUESTIONS_PLACEHOLDER) {
                return Err(Error::Config(format!("{} lacks {QUESTIONS_PLACEHOLDER}", p.display())));
            }
            Ok(text)
        };
        Ok(PromptTemplates {
            labeling: read("cluster_labeling.txt")?,
            discovery: read("relationship_discovery.txt")?,
        })
    }

    pub fn render(&self, template: TemplateId, questions: &str) -> String {
        let t = match template {
            TemplateId::ClusterLabeling => &self.labeling,
            TemplateId::RelationshipDiscovery => &self.discovery,
        };
        t.replace(QUESTIONS_PLACEHOLDER, questions)
    }
}

/// Everything a stage needs to talk to the model.
#[derive(Clone, Copy)]
pub struct StageContext<'a> {
    pub gateway: &'a dyn ChatGateway,
    pub config: &'a TransductionConfig,
    pub templates: &'a PromptTemplates,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttemptError {
    pub attempt: u32,
    pub message: String,
}

/// Runs the propose-validate-retry loop. `validate` turns raw text into a
/// value or an error message that is fed back on the next attempt.
fn converse<T>(
    ctx: &StageContext<'_>,
    template: TemplateId,
    questions: &[String],
    prompt: String,
    validate: impl Fn(&str) -> std::result::Result<T, String>,
) -> (Option<T>, Vec<AttemptError>) {
    let format = match template {
        TemplateId::ClusterLabeling => LABELING_FORMAT,
        TemplateId::RelationshipDiscovery => DISCOVERY_FORMAT,
    };
    let mut messages = vec![ChatMessage::system(format), ChatMessage::user(prompt)];
    let mut errors = Vec::new();
    for attempt in 0..=ctx.config.max_retries {
        let request = ChatRequest {
            model: ctx.config.model_name.clone(),
            temperature: ctx.config.temperature,
            messages: messages.clone(),
            template,
            questions: questions.to_vec(),
            attempt,
            seed: ctx.seed,
        };
        let raw = match ctx.gateway.complete(&request) {
            Ok(raw) => raw,
            Err(e) => {
                errors.push(AttemptError { attempt, message: e.to_string() });
                continue;
            }
        };
        match validate(&raw) {
            Ok(v) => return (Some(v), errors),
            Err(message) => {
                messages.push(ChatMessage::assistant(raw));
                messages.push(ChatMessage::user(format!(
                    "Your previous response was rejected: {message}. Respond again with a corrected JSON object."
                )));
                errors.push(AttemptError { attempt, message });
            }
        }
    }
    (None, errors)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelOutcome {
    pub labeled: LabeledCluster,
    /// True when retries ran out and the label defaulted to `other`.
    pub fell_back: bool,
    pub errors: Vec<AttemptError>,
}

fn parse_label(raw: &str) -> std::result::Result<Category, String> {
    let obj = schema::parse_object(raw).map_err(|e| e.to_string())?;
    for key in obj.keys() {
        if key != "category" && key != "markets" {
            return Err(format!("{key}: unknown field"));
        }
    }
    match obj.get("markets") {
        None | Some(serde_json::Value::String(_)) => {}
        Some(_) => return Err("markets: expected a string".into()),
    }
    match obj.get("category") {
        Some(serde_json::Value::String(s)) => s.parse().map_err(|e| format!("category: {e}")),
        Some(_) => Err("category: expected a string".into()),
        None => Err("category: missing field; you must assign a category".into()),
    }
}

/// Assigns exactly one taxonomy label to a cluster.
pub fn label_cluster(cluster: &ClusterManifest, ctx: &StageContext<'_>) -> Result<LabelOutcome> {
    if cluster.questions.is_empty() {
        return Err(Error::InvalidArgument(format!("cluster {} is empty", cluster.cluster_id)));
    }
    let markets = serde_json::to_string(&cluster.questions)?;
    let prompt = ctx.templates.render(TemplateId::ClusterLabeling, &markets);
    let (category, errors) = converse(ctx, TemplateId::ClusterLabeling, &cluster.questions, prompt, parse_label);
    Ok(LabelOutcome {
        fell_back: category.is_none(),
        labeled: LabeledCluster {
            cluster_id: cluster.cluster_id,
            markets,
            category: category.unwrap_or(Category::Other),
        },
        errors,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryOutcome {
    pub cluster_id: usize,
    pub relations: MarketRelationList,
    /// True when no response passed the schema within the retry budget.
    pub failed: bool,
    pub verbatim_mismatches: usize,
    pub duplicates_collapsed: usize,
    pub errors: Vec<AttemptError>,
}

pub fn single_markets(cluster: &ClusterManifest, markets: &MarketIndex) -> Result<Vec<SingleMarket>> {
    cluster
        .questions
        .iter()
        .map(|q| {
            let m = markets
                .get(q)
                .ok_or_else(|| Error::Integrity(format!("cluster member {q:?} has no market record")))?;
            Ok(SingleMarket {
                question: m.question.clone(),
                market_start_time: format_timestamp(&m.market_start_time),
                market_end_time: format_timestamp(&m.market_end_time),
                news_summary: None,
            })
        })
        .collect()
}

/// Proposes same/different pairs inside one cluster. Relations naming a
/// question that is not a verbatim member (outer whitespace aside) are
/// dropped and counted; duplicate pairs collapse to the most confident.
pub fn discover_relations(
    cluster: &ClusterManifest,
    markets: &[SingleMarket],
    ctx: &StageContext<'_>,
) -> Result<DiscoveryOutcome> {
    let members: HashMap<&str, &str> = cluster
        .questions
        .iter()
        .map(|q| (q.trim(), q.as_str()))
        .collect();
    if let Some(stray) = markets.iter().find(|m| !members.contains_key(m.question.trim())) {
        return Err(Error::InvalidArgument(format!(
            "market {:?} is not a member of cluster {}",
            stray.question, cluster.cluster_id
        )));
    }
    let payload = serde_json::to_string_pretty(markets)?;
    let prompt = ctx.templates.render(TemplateId::RelationshipDiscovery, &payload);
    let (list, errors) = converse(ctx, TemplateId::RelationshipDiscovery, &cluster.questions, prompt, |raw| {
        parse_relation_list(raw).map_err(|e| e.to_string())
    });
    let failed = list.is_none();
    let mut verbatim_mismatches = 0;
    let mut relations = MarketRelationList::default();
    for mut r in list.unwrap_or_default().relations {
        match (members.get(r.question_i.trim()), members.get(r.question_j.trim())) {
            (Some(qi), Some(qj)) => {
                r.question_i = qi.to_string();
                r.question_j = qj.to_string();
                relations.relations.push(r);
            }
            _ => verbatim_mismatches += 1,
        }
    }
    let duplicates_collapsed = relations.dedupe();
    Ok(DiscoveryOutcome {
        cluster_id: cluster.cluster_id,
        relations,
        failed,
        verbatim_mismatches,
        duplicates_collapsed,
        errors,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterTransduction {
    pub label: LabelOutcome,
    pub discovery: DiscoveryOutcome,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorCounters {
    pub label_fallbacks: usize,
    pub discovery_failures: usize,
    pub failed_attempts: usize,
    pub verbatim_mismatches: usize,
    pub duplicates_collapsed: usize,
}

impl ErrorCounters {
    pub fn tally(results: &[ClusterTransduction]) -> Self {
        let mut c = ErrorCounters::default();
        for r in results {
            c.label_fallbacks += usize::from(r.label.fell_back);
            c.discovery_failures += usize::from(r.discovery.failed);
            c.failed_attempts += r.label.errors.len() + r.discovery.errors.len();
            c.verbatim_mismatches += r.discovery.verbatim_mismatches;
            c.duplicates_collapsed += r.discovery.duplicates_collapsed;
        }
        c
    }

    pub fn add(&mut self, other: &ErrorCounters) {
        self.label_fallbacks += other.label_fallbacks;
        self.discovery_failures += other.discovery_failures;
        self.failed_attempts += other.failed_attempts;
        self.verbatim_mismatches += other.verbatim_mismatches;
        self.duplicates_collapsed += other.duplicates_collapsed;
    }
}

/// Labels and mines every cluster, at most `concurrency_cap` clusters at a
/// time. Results come back in ascending cluster id order.
pub fn transduce_clusters(
    clusters: &[ClusterManifest],
    markets: &MarketIndex,
    ctx: &StageContext<'_>,
) -> Result<Vec<ClusterTransduction>> {
    let run_one = |c: &ClusterManifest| -> Result<ClusterTransduction> {
        let label = label_cluster(c, ctx)?;
        let singles = single_markets(c, markets)?;
        let discovery = discover_relations(c, &singles, ctx)?;
        Ok(ClusterTransduction { label, discovery })
    };
    let mut out = Vec::with_capacity(clusters.len());
    for wave in clusters.chunks(ctx.config.concurrency_cap.max(1)) {
        let results: Vec<Result<ClusterTransduction>> = std::thread::scope(|s| {
            let handles: Vec<_> = wave.iter().map(|c| s.spawn(move || run_one(c))).collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("transduction worker panicked"))
                .collect()
        });
        for r in results {
            out.push(r?);
        }
    }
    out.sort_by_key(|r| r.label.labeled.cluster_id);
    Ok(out)
}

/// Row of the `relations.json` artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterRelation {
    pub cluster_id: usize,
    pub question_i: String,
    pub question_j: String,
    pub is_same_outcome: bool,
    pub confidence_score: f64,
    pub rationale: String,
}

impl ClusterRelation {
    pub fn new(cluster_id: usize, r: &MarketRelation) -> Self {
        ClusterRelation {
            cluster_id,
            question_i: r.question_i.clone(),
            question_j: r.question_j.clone(),
            is_same_outcome: r.is_same_outcome,
            confidence_score: r.confidence_score,
            rationale: r.rationale.clone(),
        }
    }

    pub fn relation(&self) -> MarketRelation {
        MarketRelation {
            question_i: self.question_i.clone(),
            question_j: self.question_j.clone(),
            is_same_outcome: self.is_same_outcome,
            confidence_score: self.confidence_score,
            rationale: self.rationale.clone(),
        }
    }
}

pub fn flatten_relations(results: &[ClusterTransduction]) -> Vec<ClusterRelation> {
    results
        .iter()
        .flat_map(|r| {
            r.discovery
                .relations
                .relations
                .iter()
                .map(move |rel| ClusterRelation::new(r.discovery.cluster_id, rel))
        })
        .collect()
}

pub fn category_map(results: &[ClusterTransduction]) -> BTreeMap<usize, Category> {
    results
        .iter()
        .map(|r| (r.label.labeled.cluster_id, r.label.labeled.category))
        .collect()
}
