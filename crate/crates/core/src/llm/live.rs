use super::{BackendError, CompletionBackend, CompletionRequest, OBSERVATION_STOP};
use crate::navigator::prompt::PREFIX;
use serde::{Deserialize, Serialize};
use std::thread;
use std::time::Duration;

pub const ENV_BASE_URL: &str = "CHANGEGPT_BASE_URL";
pub const ENV_API_KEY: &str = "CHANGEGPT_API_KEY";
pub const ENV_MODEL: &str = "CHANGEGPT_MODEL";

#[derive(Debug, Clone, PartialEq)]
pub struct LiveConfig {
    /// Base URL; `/chat/completions` is appended.
    pub base_url: String,
    pub api_key: Option<String>,
    pub model: String,
    pub temperature: f64,
    pub system_message: String,
    pub timeout: Duration,
    pub max_retries: u32,
    pub backoff: Duration,
}

impl LiveConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            api_key: None,
            model: model.into(),
            temperature: 0.0,
            system_message: PREFIX.to_string(),
            timeout: Duration::from_secs(60),
            max_retries: 2,
            backoff: Duration::from_millis(500),
        }
    }

    pub fn from_env() -> Result<Self, BackendError> {
        let base = std::env::var(ENV_BASE_URL)
            .map_err(|_| BackendError::InvalidRequest(format!("{ENV_BASE_URL} is not set")))?;
        let model = std::env::var(ENV_MODEL)
            .map_err(|_| BackendError::InvalidRequest(format!("{ENV_MODEL} is not set")))?;
        let mut cfg = Self::new(base, model);
        cfg.api_key = std::env::var(ENV_API_KEY).ok().filter(|k| !k.is_empty());
        Ok(cfg)
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequestBody {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub stop: Vec<String>,
}

impl ChatRequestBody {
    pub fn validate(&self, configured_temperature: f64) -> Result<(), BackendError> {
        let bad = |m: &str| Err(BackendError::InvalidRequest(m.to_string()));
        if self.model.trim().is_empty() {
            return bad("empty model name");
        }
        if self.temperature != configured_temperature {
            return bad("temperature differs from configuration");
        }
        if !self.temperature.is_finite() || !(0.0..=2.0).contains(&self.temperature) {
            return bad("temperature out of range");
        }
        if self.messages.is_empty() || self.messages.last().map(|m| m.role.as_str()) != Some("user") {
            return bad("last message must be from the user");
        }
        if self
            .messages
            .iter()
            .any(|m| !matches!(m.role.as_str(), "system" | "user" | "assistant"))
        {
            return bad("unknown message role");
        }
        if !self.stop.iter().any(|s| s == OBSERVATION_STOP) {
            return bad("missing Observation stop sequence");
        }
        if self.stop.len() > 4 || self.stop.iter().any(String::is_empty) {
            return bad("stop sequences must be 1 to 4 non-empty strings");
        }
        Ok(())
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ResponseMessage,
}

#[derive(Deserialize)]
struct ResponseMessage {
    #[serde(default)]
    content: Option<String>,
}

/// Cuts `text` at the earliest occurrence of any stop sequence.
pub fn truncate_at_stop<'a>(text: &'a str, stops: &[String]) -> &'a str {
    let cut = stops
        .iter()
        .filter(|s| !s.is_empty())
        .filter_map(|s| text.find(s.as_str()))
        .min()
        .unwrap_or(text.len());
    &text[..cut]
}

/// Blocking chat-completions client. Cloning shares the connection pool, so
/// distinct sessions can call concurrently through clones.
#[derive(Debug, Clone)]
pub struct ChatCompletionsClient {
    config: LiveConfig,
    http: reqwest::blocking::Client,
}

impl ChatCompletionsClient {
    pub fn new(config: LiveConfig) -> Result<Self, BackendError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        Ok(Self { config, http })
    }

    pub fn from_env() -> Result<Self, BackendError> {
        Self::new(LiveConfig::from_env()?)
    }

    pub fn config(&self) -> &LiveConfig {
        &self.config
    }

    pub fn request_body(&self, request: &CompletionRequest) -> ChatRequestBody {
        let mut stop = request.stop_sequences.clone();
        if !stop.iter().any(|s| s == OBSERVATION_STOP) {
            stop.insert(0, OBSERVATION_STOP.to_string());
        }
        ChatRequestBody {
            model: self.config.model.clone(),
            messages: vec![
                ChatMessage {
                    role: "system".into(),
                    content: self.config.system_message.clone(),
                },
                ChatMessage {
                    role: "user".into(),
                    content: request.prompt.clone(),
                },
            ],
            temperature: self.config.temperature,
            stop,
        }
    }

    fn send_once(&self, body: &ChatRequestBody) -> Result<String, BackendError> {
        let mut req = self.http.post(self.config.endpoint()).json(body);
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(map_transport)?;
        let status = resp.status();
        if !status.is_success() {
            let body = resp.text().unwrap_or_default();
            return Err(BackendError::Http {
                status: status.as_u16(),
                body,
            });
        }
        let parsed: ChatResponse = resp.json().map_err(|e| {
            if e.is_timeout() {
                BackendError::Timeout
            } else {
                BackendError::BadResponse(e.to_string())
            }
        })?;
        let choice = parsed
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| BackendError::BadResponse("no choices".into()))?;
        Ok(choice.message.content.unwrap_or_default())
    }
}

fn map_transport(e: reqwest::Error) -> BackendError {
    if e.is_timeout() {
        BackendError::Timeout
    } else {
        BackendError::Transport(e.to_string())
    }
}

fn retryable(e: &BackendError) -> bool {
    matches!(e, BackendError::Http { status, .. } if *status == 429 || *status >= 500)
}

impl CompletionBackend for ChatCompletionsClient {
    fn complete(&mut self, request: &CompletionRequest) -> Result<String, BackendError> {
        let body = self.request_body(request);
        body.validate(self.config.temperature)?;
        let mut attempt = 0;
        loop {
            match self.send_once(&body) {
                Ok(text) => return Ok(truncate_at_stop(&text, &body.stop).to_string()),
                Err(e) if retryable(&e) && attempt < self.config.max_retries => {
                    let wait = self.config.backoff * 2u32.pow(attempt);
                    tracing::warn!(attempt, ?wait, error = %e, "retrying completion");
                    thread::sleep(wait);
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncation_takes_earliest_stop() {
        let stops = vec!["Observation:".to_string(), "\nHuman:".to_string()];
        assert_eq!(truncate_at_stop("a\nHuman: b Observation: c", &stops), "a");
        assert_eq!(truncate_at_stop("Thought: x\nObservation: 42", &stops), "Thought: x\n");
        assert_eq!(truncate_at_stop("plain", &stops), "plain");
    }

    #[test]
    fn body_carries_prefix_and_stop() {
        let client = ChatCompletionsClient::new(LiveConfig::new("http://localhost:1", "m")).unwrap();
        let mut req = CompletionRequest::new("hello");
        req.stop_sequences.clear();
        let body = client.request_body(&req);
        assert_eq!(body.messages[0].role, "system");
        assert_eq!(body.messages[0].content, PREFIX);
        assert_eq!(body.messages[1].content, "hello");
        assert_eq!(body.stop, vec!["Observation:"]);
        assert_eq!(body.temperature, 0.0);
        body.validate(0.0).unwrap();
    }

    #[test]
    fn validation_rejects_drift() {
        let client = ChatCompletionsClient::new(LiveConfig::new("http://x", "m")).unwrap();
        let body = client.request_body(&CompletionRequest::new("q"));
        assert!(body.validate(0.7).is_err());
        let mut no_stop = body.clone();
        no_stop.stop.clear();
        assert!(no_stop.validate(0.0).is_err());
        let mut bad_role = body.clone();
        bad_role.messages[0].role = "tool".into();
        assert!(bad_role.validate(0.0).is_err());
        let mut no_model = body;
        no_model.model = " ".into();
        assert!(no_model.validate(0.0).is_err());
    }
}
