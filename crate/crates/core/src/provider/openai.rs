use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{Backend, BackendError, ProviderParams};

/// Environment variable holding the bearer token.
pub const API_KEY_ENV: &str = "ARENA_API_KEY";

/// Client for an OpenAI-compatible chat-completions endpoint.
///
/// Each prompt is sent as a single user message; there is no conversation state.
pub struct OpenAiProvider {
    id: String,
    endpoint: String,
    api_key: Option<String>,
    http: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    #[serde(default)]
    content: Option<String>,
}

impl OpenAiProvider {
    /// `endpoint` is the full URL that requests are POSTed to.
    pub fn new(id: impl Into<String>, endpoint: impl Into<String>, api_key: Option<String>) -> Result<Self, String> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| e.to_string())?;
        Ok(OpenAiProvider { id: id.into(), endpoint: endpoint.into(), api_key, http })
    }

    /// Reads the key from `ARENA_API_KEY`.
    pub fn from_env(id: impl Into<String>, endpoint: impl Into<String>) -> Result<Self, String> {
        OpenAiProvider::new(id, endpoint, std::env::var(API_KEY_ENV).ok())
    }

    pub fn request_body(prompt: &str, params: &ProviderParams) -> serde_json::Value {
        let mut body = json!({
            "model": params.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": params.temperature,
            "max_tokens": params.max_completion_tokens,
        });
        if let Some(seed) = params.seed {
            body["seed"] = json!(seed);
        }
        body
    }
}

impl Backend for OpenAiProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn is_network(&self) -> bool {
        true
    }

    fn complete(&self, prompt: &str, params: &ProviderParams) -> Result<String, BackendError> {
        let mut req = self.http.post(&self.endpoint).json(&Self::request_body(prompt, params));
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| BackendError::Transient(e.to_string()))?;
        let status = resp.status();
        if status.as_u16() == 429 {
            return Err(BackendError::RateLimited);
        }
        if status.is_server_error() {
            return Err(BackendError::Transient(format!("HTTP {status}")));
        }
        if !status.is_success() {
            let text = resp.text().unwrap_or_default();
            return Err(BackendError::Config(format!("HTTP {status}: {text}")));
        }
        let body: ChatResponse = resp.json().map_err(|e| BackendError::Transient(format!("bad response body: {e}")))?;
        body.choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| BackendError::Transient("response has no choices".into()))
    }
}
