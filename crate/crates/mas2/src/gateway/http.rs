use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{Backend, BackboneCard, BackendError, ChatRequest, RawCompletion};

/// OpenAI-compatible chat-completions client.
pub struct HttpBackend {
    agent: ureq::Agent,
    api_key: Option<String>,
}

impl HttpBackend {
    /// `api_key_env` names the environment variable holding the bearer token.
    pub fn new(api_key_env: &str, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        HttpBackend { agent, api_key: std::env::var(api_key_env).ok().filter(|k| !k.is_empty()) }
    }

    fn url(endpoint: &str) -> String {
        let base = endpoint.trim_end_matches('/');
        if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/chat/completions")
        }
    }
}

#[derive(Deserialize)]
struct Reply {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct Choice {
    message: ReplyMessage,
}

#[derive(Deserialize)]
struct ReplyMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct Usage {
    prompt_tokens: Option<u64>,
    completion_tokens: Option<u64>,
}

impl Backend for HttpBackend {
    fn complete(&self, card: &BackboneCard, request: &ChatRequest) -> Result<RawCompletion, BackendError> {
        let body = json!({
            "model": card.model_name,
            "messages": request.messages,
            "temperature": request.params.temperature,
            "max_tokens": request.params.max_tokens,
            "seed": request.params.seed,
        });
        let mut req = self.agent.post(&Self::url(&card.endpoint)).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(&body).map_err(|e| BackendError::Transient(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(|e| BackendError::Transient(e.to_string()))?;
        if status == 429 || status >= 500 {
            return Err(BackendError::Transient(format!("HTTP {status}: {}", snippet(&text))));
        }
        if !(200..300).contains(&status) {
            return Err(BackendError::Provider { status, message: snippet(&text) });
        }
        let reply: Reply = serde_json::from_str(&text)
            .map_err(|e| BackendError::Provider { status, message: format!("unreadable completion body: {e}") })?;
        let content = reply
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| BackendError::Provider { status, message: "completion has no choices".into() })?;
        let usage = reply.usage.unwrap_or(Usage { prompt_tokens: None, completion_tokens: None });
        Ok(RawCompletion { text: content, prompt_tokens: usage.prompt_tokens, completion_tokens: usage.completion_tokens })
    }
}

fn snippet(body: &str) -> String {
    let trimmed = body.trim();
    match trimmed.char_indices().nth(300) {
        Some((i, _)) => format!("{}...", &trimmed[..i]),
        None => trimmed.to_string(),
    }
}
