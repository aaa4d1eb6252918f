//! Backbone catalog, chat-completion transport and cost accounting.

mod catalog;
mod http;
mod mock;

use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use mas2_core::Money;
use serde::{Deserialize, Serialize};

pub use catalog::{BackboneCard, Catalog, CatalogError, CatalogFile, META_BACKBONE, SEED_POOL};
pub use http::HttpBackend;
pub use mock::{mock_tokens, MockBackend, MockReply, MockRule, MockScript};

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
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingParams {
    pub temperature: f64,
    pub max_tokens: u32,
    pub seed: u64,
}

impl Default for SamplingParams {
    fn default() -> Self {
        SamplingParams { temperature: 0.0, max_tokens: 2048, seed: 0 }
    }
}

/// One completion request. `stream` names the logical caller (a trajectory,
/// a generator fan-out) and never reaches the provider; the mock backend
/// uses it to keep scripted sequences independent of thread scheduling.
#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub messages: Vec<ChatMessage>,
    pub params: SamplingParams,
    pub stream: String,
}

impl ChatRequest {
    pub fn new(messages: Vec<ChatMessage>, params: SamplingParams, stream: impl Into<String>) -> Self {
        ChatRequest { messages, params, stream: stream.into() }
    }

    pub fn prompt_bytes(&self) -> usize {
        self.messages.iter().map(|m| m.content.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatExchange {
    pub backbone_id: String,
    pub messages: Vec<ChatMessage>,
    pub params: SamplingParams,
    pub response: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub latency_ms: u64,
    pub cost: Money,
}

/// What a backend hands back before accounting.
#[derive(Debug, Clone, PartialEq)]
pub struct RawCompletion {
    pub text: String,
    /// Provider-reported usage, when available.
    pub prompt_tokens: Option<u64>,
    pub completion_tokens: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendError {
    /// Worth retrying: connection failures, timeouts, 5xx, 429.
    Transient(String),
    /// Provider rejected the request.
    Provider { status: u16, message: String },
}

pub trait Backend: Send + Sync {
    fn complete(&self, card: &BackboneCard, request: &ChatRequest) -> Result<RawCompletion, BackendError>;

    /// False for backends whose timing is meaningless and would only make
    /// output files differ between reruns.
    fn measures_latency(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GatewayError {
    #[error("unknown backbone `{id}`")]
    UnknownBackbone { id: String },
    #[error("request has no messages")]
    EmptyRequest,
    #[error("transport failed after {attempts} attempts: {message}")]
    TransportError { attempts: u32, message: String },
    #[error("provider returned HTTP {status}: {message}")]
    ProviderError { status: u16, message: String },
    #[error("projected cost {projected} exceeds the per-call ceiling {ceiling}")]
    BudgetExceeded { projected: Money, ceiling: Money },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub retries: u32,
    pub backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { retries: 2, backoff_ms: 250 }
    }
}

/// Shared entry point for every completion. Cheap to clone.
#[derive(Clone)]
pub struct Gateway {
    catalog: Arc<Catalog>,
    backend: Arc<dyn Backend>,
    retry: RetryPolicy,
    call_ceiling: Option<Money>,
}

impl Gateway {
    pub fn new(catalog: Catalog, backend: Arc<dyn Backend>) -> Self {
        Gateway { catalog: Arc::new(catalog), backend, retry: RetryPolicy::default(), call_ceiling: None }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_call_ceiling(mut self, ceiling: Option<Money>) -> Self {
        self.call_ceiling = ceiling;
        self
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn complete(&self, backbone_id: &str, request: &ChatRequest) -> Result<ChatExchange, GatewayError> {
        let card = self.catalog.get(backbone_id).ok_or_else(|| GatewayError::UnknownBackbone { id: backbone_id.into() })?;
        if request.messages.is_empty() {
            return Err(GatewayError::EmptyRequest);
        }
        if let Some(ceiling) = self.call_ceiling {
            let projected = card.price_in.cost(mock_tokens(request.prompt_bytes())) + card.price_out.cost(request.params.max_tokens as u64);
            if projected > ceiling {
                return Err(GatewayError::BudgetExceeded { projected, ceiling });
            }
        }
        let started = Instant::now();
        let mut attempt = 0;
        let raw = loop {
            attempt += 1;
            match self.backend.complete(card, request) {
                Ok(raw) => break raw,
                Err(BackendError::Provider { status, message }) => return Err(GatewayError::ProviderError { status, message }),
                Err(BackendError::Transient(message)) => {
                    if attempt > self.retry.retries {
                        return Err(GatewayError::TransportError { attempts: attempt, message });
                    }
                    let wait = self.retry.backoff_ms.saturating_mul(1 << (attempt - 1).min(16));
                    thread::sleep(Duration::from_millis(wait));
                }
            }
        };
        let latency_ms = if self.backend.measures_latency() { started.elapsed().as_millis() as u64 } else { 0 };
        let prompt_tokens = raw.prompt_tokens.unwrap_or_else(|| mock_tokens(request.prompt_bytes()));
        let completion_tokens = raw.completion_tokens.unwrap_or_else(|| mock_tokens(raw.text.len()));
        Ok(ChatExchange {
            backbone_id: backbone_id.into(),
            messages: request.messages.clone(),
            params: request.params.clone(),
            response: raw.text,
            prompt_tokens,
            completion_tokens,
            latency_ms,
            cost: card.cost(prompt_tokens, completion_tokens),
        })
    }

    /// Recompute an exchange's cost from the catalog.
    pub fn cost_of(&self, exchange: &ChatExchange) -> Result<Money, GatewayError> {
        cost_of(&self.catalog, exchange)
    }
}

pub fn cost_of(catalog: &Catalog, exchange: &ChatExchange) -> Result<Money, GatewayError> {
    let card = catalog.get(&exchange.backbone_id).ok_or_else(|| GatewayError::UnknownBackbone { id: exchange.backbone_id.clone() })?;
    Ok(card.cost(exchange.prompt_tokens, exchange.completion_tokens))
}
