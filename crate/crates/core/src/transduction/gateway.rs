//! Chat-completion gateways.

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    ClusterLabeling,
    RelationshipDiscovery,
}

impl TemplateId {
    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::ClusterLabeling => "cluster_labeling",
            TemplateId::RelationshipDiscovery => "relationship_discovery",
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage { role: "system".into(), content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage { role: "user".into(), content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage { role: "assistant".into(), content: content.into() }
    }
}

/// A chat-completion request plus the routing metadata offline gateways
/// key on. Only `model`, `temperature` and `messages` go over the wire.
#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub model: String,
    pub temperature: f64,
    pub messages: Vec<ChatMessage>,
    pub template: TemplateId,
    /// Cluster members the prompt was built from.
    pub questions: Vec<String>,
    /// 0 for the first try, incremented on each schema retry.
    pub attempt: u32,
    /// Trial seed, for gateways that simulate run-to-run variation.
    pub seed: u64,
}

impl ChatRequest {
    pub fn fingerprint(&self) -> String {
        fingerprint(self.template, &self.questions)
    }
}

/// Stable key for a (template, cluster) request: SHA-256 over the template
/// id and the sorted, trimmed member questions.
pub fn fingerprint(template: TemplateId, questions: &[String]) -> String {
    let mut sorted: Vec<&str> = questions.iter().map(|q| q.trim()).collect();
    sorted.sort_unstable();
    let mut hasher = Sha256::new();
    hasher.update(template.as_str().as_bytes());
    for q in sorted {
        hasher.update(b"\n");
        hasher.update(q.as_bytes());
    }
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum GatewayError {
    #[error("gateway unreachable: {0}")]
    Unreachable(String),
    #[error("gateway returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed gateway response: {0}")]
    Malformed(String),
    #[error("missing credential: environment variable {0} is unset")]
    MissingCredential(String),
}

/// A chat model. Implementations are shared across worker threads.
pub trait ChatGateway: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, GatewayError>;
}

impl<G: ChatGateway + ?Sized> ChatGateway for &G {
    fn complete(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        (**self).complete(request)
    }
}

impl<G: ChatGateway + ?Sized> ChatGateway for Box<G> {
    fn complete(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        (**self).complete(request)
    }
}

/// JSON-over-HTTP chat endpoint: posts `{model, temperature, messages}`
/// and expects `{content}` back.
#[derive(Debug, Clone)]
pub struct HttpChatGateway {
    pub url: String,
    pub credential_env: Option<String>,
    client: reqwest::blocking::Client,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    temperature: f64,
    messages: &'a [ChatMessage],
}

#[derive(Deserialize)]
struct WireResponse {
    content: String,
}

impl HttpChatGateway {
    pub fn new(url: impl Into<String>, credential_env: Option<String>) -> Self {
        HttpChatGateway {
            url: url.into(),
            credential_env,
            client: reqwest::blocking::Client::new(),
        }
    }
}

impl ChatGateway for HttpChatGateway {
    fn complete(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        let mut req = self.client.post(&self.url).json(&WireRequest {
            model: &request.model,
            temperature: request.temperature,
            messages: &request.messages,
        });
        if let Some(var) = &self.credential_env {
            let token = std::env::var(var).map_err(|_| GatewayError::MissingCredential(var.clone()))?;
            req = req.bearer_auth(token);
        }
        let resp = req.send().map_err(|e| GatewayError::Unreachable(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            let body = resp.text().unwrap_or_default();
            return Err(GatewayError::Status { status: status.as_u16(), body });
        }
        let body: WireResponse = resp.json().map_err(|e| GatewayError::Malformed(e.to_string()))?;
        Ok(body.content)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fingerprint_ignores_member_order_and_outer_whitespace() {
        let a = fingerprint(TemplateId::RelationshipDiscovery, &["B?".into(), "A?".into()]);
        let b = fingerprint(TemplateId::RelationshipDiscovery, &[" A?".into(), "B?".into()]);
        let c = fingerprint(TemplateId::ClusterLabeling, &["A?".into(), "B?".into()]);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 64);
    }

    #[test]
    fn unreachable_endpoint_is_reported() {
        let g = HttpChatGateway::new("http://127.0.0.1:9/chat", None);
        let req = ChatRequest {
            model: "m".into(),
            temperature: 0.0,
            messages: vec![ChatMessage::user("hi")],
            template: TemplateId::ClusterLabeling,
            questions: vec![],
            attempt: 0,
            seed: 0,
        };
        assert!(matches!(g.complete(&req), Err(GatewayError::Unreachable(_))));
    }
}
