//! Strict validation of model output against the relation schema.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

/// One proposed link between two cluster members.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketRelation {
    pub question_i: String,
    pub question_j: String,
    pub is_same_outcome: bool,
    pub confidence_score: f64,
    pub rationale: String,
}

impl MarketRelation {
    /// Orders the pair so that `question_i < question_j`. Sameness is
    /// symmetric, so the direction flag is untouched.
    pub fn canonicalize(&mut self) {
        if self.question_j < self.question_i {
            std::mem::swap(&mut self.question_i, &mut self.question_j);
        }
    }

    pub fn pair_key(&self) -> (String, String) {
        if self.question_i <= self.question_j {
            (self.question_i.clone(), self.question_j.clone())
        } else {
            (self.question_j.clone(), self.question_i.clone())
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MarketRelationList {
    pub relations: Vec<MarketRelation>,
}

impl MarketRelationList {
    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }

    /// Canonicalizes every pair and collapses unordered duplicates, keeping
    /// the higher confidence (the earlier one on ties). Returns how many
    /// relations were dropped. The result is sorted by pair.
    pub fn dedupe(&mut self) -> usize {
        let before = self.relations.len();
        let mut kept: std::collections::BTreeMap<(String, String), MarketRelation> = Default::default();
        for mut r in self.relations.drain(..) {
            r.canonicalize();
            let key = r.pair_key();
            match kept.get(&key) {
                Some(existing) if existing.confidence_score >= r.confidence_score => {}
                _ => {
                    kept.insert(key, r);
                }
            }
        }
        self.relations = kept.into_values().collect();
        before - self.relations.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldIssue {
    /// Leaf field name, e.g. `rationale`.
    pub field: String,
    /// JSON path of the offending value, e.g. `relations[2].rationale`.
    pub location: String,
    pub message: String,
}

/// Field-level diagnostics for a rejected model response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaError {
    pub issues: Vec<FieldIssue>,
}

impl SchemaError {
    pub(crate) fn single(field: &str, location: &str, message: impl Into<String>) -> Self {
        SchemaError {
            issues: vec![FieldIssue {
                field: field.into(),
                location: location.into(),
                message: message.into(),
            }],
        }
    }

    pub fn fields(&self) -> Vec<&str> {
        self.issues.iter().map(|i| i.field.as_str()).collect()
    }

    pub fn mentions(&self, field: &str) -> bool {
        self.issues.iter().any(|i| i.field == field)
    }
}

impl fmt::Display for SchemaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, issue) in self.issues.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{}: {}", issue.location, issue.message)?;
        }
        Ok(())
    }
}

impl std::error::Error for SchemaError {}

/// Removes a surrounding Markdown code fence, if any.
pub fn strip_code_fence(raw: &str) -> &str {
    let s = raw.trim();
    let Some(rest) = s.strip_prefix("```") else {
        return s;
    };
    let Some(body) = rest.strip_suffix("```") else {
        return s;
    };
    // drop an info string such as `json`
    match body.find('\n') {
        Some(nl) if !body[..nl].contains('{') => body[nl + 1..].trim(),
        _ => body.trim(),
    }
}

/// Parses a single JSON object, after fence stripping.
pub(crate) fn parse_object(raw: &str) -> Result<Map<String, Value>, SchemaError> {
    let body = strip_code_fence(raw);
    let value: Value = serde_json::from_str(body)
        .map_err(|e| SchemaError::single("$", "$", format!("response is not valid JSON: {e}")))?;
    match value {
        Value::Object(map) => Ok(map),
        other => Err(SchemaError::single(
            "$",
            "$",
            format!("expected a single JSON object, got {}", kind(&other)),
        )),
    }
}

fn kind(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a number",
        Value::String(_) => "a string",
        Value::Array(_) => "an array",
        Value::Object(_) => "an object",
    }
}

const RELATION_FIELDS: [&str; 5] = [
    "question_i",
    "question_j",
    "is_same_outcome",
    "confidence_score",
    "rationale",
];

fn missing_message(field: &str) -> &'static str {
    match field {
        "is_same_outcome" => "missing field; you must provide a boolean",
        "confidence_score" => "missing field; you must provide a confidence score",
        "rationale" => "missing field; you must provide a rationale",
        _ => "missing field; output the question exactly as given",
    }
}

fn parse_relation(value: &Value, at: &str, issues: &mut Vec<FieldIssue>) -> Option<MarketRelation> {
    let mut push = |field: &str, message: String| {
        issues.push(FieldIssue {
            field: field.into(),
            location: format!("{at}.{field}"),
            message,
        })
    };
    let Value::Object(obj) = value else {
        issues.push(FieldIssue {
            field: "relations".into(),
            location: at.into(),
            message: format!("expected an object, got {}", kind(value)),
        });
        return None;
    };
    for key in obj.keys() {
        if !RELATION_FIELDS.contains(&key.as_str()) {
            push(key, "unknown field".into());
        }
    }
    let before = issues.len();
    let text = |field: &str, issues: &mut Vec<FieldIssue>| -> Option<String> {
        match obj.get(field) {
            None => {
                issues.push(FieldIssue {
                    field: field.into(),
                    location: format!("{at}.{field}"),
                    message: missing_message(field).into(),
                });
                None
            }
            Some(Value::String(s)) if s.trim().is_empty() => {
                issues.push(FieldIssue {
                    field: field.into(),
                    location: format!("{at}.{field}"),
                    message: "must be a non-empty string".into(),
                });
                None
            }
            Some(Value::String(s)) => Some(s.clone()),
            Some(other) => {
                issues.push(FieldIssue {
                    field: field.into(),
                    location: format!("{at}.{field}"),
                    message: format!("expected a string, got {}", kind(other)),
                });
                None
            }
        }
    };
    let question_i = text("question_i", issues);
    let question_j = text("question_j", issues);
    let rationale = text("rationale", issues);
    let mut push = |field: &str, message: String| {
        issues.push(FieldIssue {
            field: field.into(),
            location: format!("{at}.{field}"),
            message,
        })
    };
    let is_same_outcome = match obj.get("is_same_outcome") {
        None => {
            push("is_same_outcome", missing_message("is_same_outcome").into());
            None
        }
        Some(Value::Bool(b)) => Some(*b),
        Some(other) => {
            push("is_same_outcome", format!("expected a JSON boolean, got {}", kind(other)));
            None
        }
    };
    let confidence_score = match obj.get("confidence_score") {
        None => {
            push("confidence_score", missing_message("confidence_score").into());
            None
        }
        Some(Value::Number(n)) => match n.as_f64() {
            Some(c) if (0.0..=1.0).contains(&c) => Some(c),
            _ => {
                push("confidence_score", format!("{n} is outside [0, 1]"));
                None
            }
        },
        Some(other) => {
            push("confidence_score", format!("expected a number, got {}", kind(other)));
            None
        }
    };
    if let (Some(qi), Some(qj)) = (&question_i, &question_j) {
        if qi.trim() == qj.trim() {
            push("question_j", "question_j must differ from question_i".into());
        }
    }
    if issues.len() > before {
        return None;
    }
    Some(MarketRelation {
        question_i: question_i?,
        question_j: question_j?,
        is_same_outcome: is_same_outcome?,
        confidence_score: confidence_score?,
        rationale: rationale?,
    })
}

/// Strictly parses a relation list. Every issue in the document is
/// reported, not just the first.
pub fn parse_relation_list(raw: &str) -> Result<MarketRelationList, SchemaError> {
    let obj = parse_object(raw)?;
    let mut issues = Vec::new();
    for key in obj.keys() {
        if key != "relations" {
            issues.push(FieldIssue {
                field: key.clone(),
                location: key.clone(),
                message: "unknown field".into(),
            });
        }
    }
    let items = match obj.get("relations") {
        Some(Value::Array(items)) => items,
        Some(other) => {
            issues.push(FieldIssue {
                field: "relations".into(),
                location: "relations".into(),
                message: format!("expected an array, got {}", kind(other)),
            });
            return Err(SchemaError { issues });
        }
        None => {
            issues.push(FieldIssue {
                field: "relations".into(),
                location: "relations".into(),
                message: "missing field".into(),
            });
            return Err(SchemaError { issues });
        }
    };
    let mut relations = Vec::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        if let Some(r) = parse_relation(item, &format!("relations[{i}]"), &mut issues) {
            relations.push(r);
        }
    }
    if issues.is_empty() {
        Ok(MarketRelationList { relations })
    } else {
        Err(SchemaError { issues })
    }
}
