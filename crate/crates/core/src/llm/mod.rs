//! Completion providers behind one trait: a scripted replay backend for
//! deterministic runs, a recorder that turns any live session into a
//! script, and a chat-completions HTTP client.

mod live;
mod scripted;

pub use live::{truncate_at_stop, ChatCompletionsClient, ChatMessage, ChatRequestBody, LiveConfig};
pub use scripted::{RecordedCall, RecordingBackend, ScriptedBackend};

use thiserror::Error;

/// The stop sequence every request carries, so a model can never write its
/// own tool results.
pub const OBSERVATION_STOP: &str = "Observation:";

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionRequest {
    pub prompt: String,
    pub stop_sequences: Vec<String>,
    pub temperature: f64,
}

impl CompletionRequest {
    /// Temperature 0 and the `Observation:` stop sequence.
    pub fn new(prompt: impl Into<String>) -> Self {
        Self {
            prompt: prompt.into(),
            stop_sequences: vec![OBSERVATION_STOP.to_string()],
            temperature: 0.0,
        }
    }
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("script exhausted after {0} completions")]
    ScriptExhausted(usize),
    #[error("http {status}: {body}")]
    Http { status: u16, body: String },
    #[error("request timed out")]
    Timeout,
    #[error("transport: {0}")]
    Transport(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("malformed response: {0}")]
    BadResponse(String),
    #[error("script file: {0}")]
    Script(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub trait CompletionBackend: Send {
    fn complete(&mut self, request: &CompletionRequest) -> Result<String, BackendError>;
}

impl<B: CompletionBackend + ?Sized> CompletionBackend for Box<B> {
    fn complete(&mut self, request: &CompletionRequest) -> Result<String, BackendError> {
        (**self).complete(request)
    }
}

impl<B: CompletionBackend + ?Sized> CompletionBackend for &mut B {
    fn complete(&mut self, request: &CompletionRequest) -> Result<String, BackendError> {
        (**self).complete(request)
    }
}
