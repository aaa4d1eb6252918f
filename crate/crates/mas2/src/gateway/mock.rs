use std::collections::HashMap;
use std::sync::Mutex;

use mas2_core::ir::PLACEHOLDER;
use serde::{Deserialize, Serialize};

use super::{Backend, BackboneCard, BackendError, ChatRequest, RawCompletion};

/// Mock tokenizer: one token per started group of four bytes.
pub fn mock_tokens(bytes: usize) -> u64 {
    bytes.div_ceil(4) as u64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MockReply {
    Text(String),
    /// Echo the workflow found in the request with every backbone
    /// placeholder replaced, cycling through `fill_slots`.
    FillSlots { fill_slots: Vec<String> },
    /// Fail the call. Statuses of 500 and above (or none) are transient.
    Error { error: String, #[serde(default)] status: Option<u16> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockRule {
    /// Only requests to this backbone match.
    #[serde(default)]
    pub backbone: Option<String>,
    /// Substring that must occur in some message.
    #[serde(default)]
    pub contains: Option<String>,
    /// Substring that must not occur in any message.
    #[serde(default)]
    pub not_contains: Option<String>,
    /// Replies in order; the last one repeats unless `cycle` is set.
    pub responses: Vec<MockReply>,
    #[serde(default)]
    pub cycle: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MockScript {
    #[serde(default)]
    pub rules: Vec<MockRule>,
    /// Reply when no rule matches.
    #[serde(default)]
    pub default: Option<String>,
}

impl MockScript {
    pub fn rule(mut self, rule: MockRule) -> Self {
        self.rules.push(rule);
        self
    }
}

impl MockRule {
    pub fn when(contains: &str, responses: Vec<MockReply>) -> Self {
        MockRule { backbone: None, contains: Some(contains.into()), not_contains: None, responses, cycle: false }
    }

    pub fn text(contains: &str, replies: &[&str]) -> Self {
        Self::when(contains, replies.iter().map(|r| MockReply::Text(r.to_string())).collect())
    }
}

/// Scripted backend. Each rule keeps a separate position per request
/// stream, so concurrent trajectories replay their scripts identically
/// regardless of interleaving.
pub struct MockBackend {
    script: MockScript,
    positions: Mutex<HashMap<(usize, String), usize>>,
}

impl MockBackend {
    pub fn new(script: MockScript) -> Self {
        MockBackend { script, positions: Mutex::new(HashMap::new()) }
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        Ok(Self::new(serde_json::from_str(text)?))
    }

    fn matches(rule: &MockRule, card: &BackboneCard, request: &ChatRequest) -> bool {
        if rule.backbone.as_deref().is_some_and(|b| b != card.id) {
            return false;
        }
        let any = |needle: &str| request.messages.iter().any(|m| m.content.contains(needle));
        if rule.contains.as_deref().is_some_and(|c| !any(c)) {
            return false;
        }
        !rule.not_contains.as_deref().is_some_and(any)
    }
}

impl Backend for MockBackend {
    fn complete(&self, card: &BackboneCard, request: &ChatRequest) -> Result<RawCompletion, BackendError> {
        let found = self.script.rules.iter().enumerate().find(|(_, r)| Self::matches(r, card, request));
        let reply = match found {
            None => MockReply::Text(self.script.default.clone().unwrap_or_else(|| "mock response".into())),
            Some((_, rule)) if rule.responses.is_empty() => MockReply::Text(String::new()),
            Some((idx, rule)) => {
                let mut positions = self.positions.lock().expect("mock position lock");
                let pos = positions.entry((idx, request.stream.clone())).or_insert(0);
                let n = rule.responses.len();
                let pick = if rule.cycle { *pos % n } else { (*pos).min(n - 1) };
                *pos += 1;
                rule.responses[pick].clone()
            }
        };
        let text = match reply {
            MockReply::Text(t) => t,
            MockReply::FillSlots { fill_slots } => fill_placeholders(request, &fill_slots),
            MockReply::Error { error, status } => {
                return Err(match status {
                    Some(s) if s < 500 && s != 429 => BackendError::Provider { status: s, message: error },
                    _ => BackendError::Transient(error),
                })
            }
        };
        Ok(RawCompletion { text, prompt_tokens: None, completion_tokens: None })
    }

    fn measures_latency(&self) -> bool {
        false
    }
}

fn fill_placeholders(request: &ChatRequest, backbones: &[String]) -> String {
    let last = request.messages.last().map(|m| m.content.as_str()).unwrap_or("");
    let body = match (last.find("<graph>"), last.find("</graph>")) {
        (Some(a), Some(b)) if b > a => &last[a + "<graph>".len()..b],
        _ => last,
    };
    let quoted = format!("\"{PLACEHOLDER}\"");
    let mut out = String::new();
    let mut rest = body;
    let mut i = 0;
    while let Some(at) = rest.find(&quoted) {
        out.push_str(&rest[..at]);
        let b = if backbones.is_empty() { PLACEHOLDER } else { backbones[i % backbones.len()].as_str() };
        out.push_str(&format!("\"{b}\""));
        rest = &rest[at + quoted.len()..];
        i += 1;
    }
    out.push_str(rest);
    format!("<graph>\n{}\n</graph>", out.trim())
}
