use super::{BackendError, CompletionBackend, CompletionRequest};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

/// Replays completions in order. Running past the end is an error.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScriptedBackend {
    entries: Vec<String>,
    cursor: usize,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ScriptEntry {
    Text(String),
    Recorded { completion: String },
}

impl ScriptedBackend {
    pub fn new<I, S>(entries: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            entries: entries.into_iter().map(Into::into).collect(),
            cursor: 0,
        }
    }

    /// Loads a JSON array of completion strings, or of `{prompt, completion}`
    /// objects as written by [`RecordingBackend`].
    pub fn from_file(path: &Path) -> Result<Self, BackendError> {
        let bytes = fs::read(path)?;
        Self::from_json(&bytes).map_err(|e| BackendError::Script(format!("{}: {e}", path.display())))
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, serde_json::Error> {
        let entries: Vec<ScriptEntry> = serde_json::from_slice(bytes)?;
        Ok(Self::new(entries.into_iter().map(|e| match e {
            ScriptEntry::Text(t) => t,
            ScriptEntry::Recorded { completion } => completion,
        })))
    }

    pub fn remaining(&self) -> usize {
        self.entries.len() - self.cursor
    }

    pub fn consumed(&self) -> usize {
        self.cursor
    }
}

impl CompletionBackend for ScriptedBackend {
    fn complete(&mut self, _request: &CompletionRequest) -> Result<String, BackendError> {
        let entry = self
            .entries
            .get(self.cursor)
            .ok_or(BackendError::ScriptExhausted(self.cursor))?
            .clone();
        self.cursor += 1;
        Ok(entry)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordedCall {
    pub prompt: String,
    pub completion: String,
}

/// Proxies to another backend and keeps `sink` in sync with every call made
/// so far, as a script [`ScriptedBackend::from_file`] can replay.
pub struct RecordingBackend<B> {
    inner: B,
    sink: PathBuf,
    calls: Vec<RecordedCall>,
}

impl<B: CompletionBackend> RecordingBackend<B> {
    pub fn new(inner: B, sink: impl Into<PathBuf>) -> Result<Self, BackendError> {
        let rec = Self {
            inner,
            sink: sink.into(),
            calls: Vec::new(),
        };
        rec.flush()?;
        Ok(rec)
    }

    pub fn calls(&self) -> &[RecordedCall] {
        &self.calls
    }

    pub fn into_inner(self) -> B {
        self.inner
    }

    fn flush(&self) -> Result<(), BackendError> {
        let json = serde_json::to_vec_pretty(&self.calls)
            .map_err(|e| BackendError::Script(e.to_string()))?;
        fs::write(&self.sink, json)?;
        Ok(())
    }
}

impl<B: CompletionBackend> CompletionBackend for RecordingBackend<B> {
    fn complete(&mut self, request: &CompletionRequest) -> Result<String, BackendError> {
        let completion = self.inner.complete(request)?;
        self.calls.push(RecordedCall {
            prompt: request.prompt.clone(),
            completion: completion.clone(),
        });
        self.flush()?;
        Ok(completion)
    }
}
