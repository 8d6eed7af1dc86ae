//! Reference log, dialogue history and the clock that timestamps them.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{SystemTime, UNIX_EPOCH};

pub trait Clock: Send + Sync + fmt::Debug {
    fn now_ms(&self) -> u64;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0)
    }
}

/// Logical clock advancing by one millisecond per reading. Used for
/// replayable sessions where wall time would break byte-level equality.
#[derive(Debug, Default)]
pub struct TickClock {
    now: AtomicU64,
}

impl TickClock {
    pub fn starting_at(ms: u64) -> Self {
        Self {
            now: AtomicU64::new(ms),
        }
    }
}

impl Clock for TickClock {
    fn now_ms(&self) -> u64 {
        self.now.fetch_add(1, Ordering::SeqCst)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogKind {
    Query,
    Step,
    ToolCall,
    ImageRegistered,
    Answer,
}

impl LogKind {
    fn label(self) -> &'static str {
        match self {
            LogKind::Query => "query",
            LogKind::Step => "step",
            LogKind::ToolCall => "tool",
            LogKind::ImageRegistered => "image",
            LogKind::Answer => "answer",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    pub seq: u64,
    pub timestamp_ms: u64,
    pub kind: LogKind,
    pub payload: String,
}

impl fmt::Display for LogEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.kind.label(), self.payload)
    }
}

/// Append-only record of everything the navigator did in a session.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceLog {
    entries: Vec<LogEntry>,
}

impl ReferenceLog {
    pub fn append(&mut self, timestamp_ms: u64, kind: LogKind, payload: impl Into<String>) {
        let seq = self.entries.len() as u64;
        self.entries.push(LogEntry {
            seq,
            timestamp_ms,
            kind,
            payload: payload.into(),
        });
    }

    pub fn entries(&self) -> &[LogEntry] {
        &self.entries
    }

    pub fn recent(&self, n: usize) -> &[LogEntry] {
        &self.entries[self.entries.len().saturating_sub(n)..]
    }

    pub fn of_kind(&self, kind: LogKind) -> impl Iterator<Item = &LogEntry> {
        self.entries.iter().filter(move |e| e.kind == kind)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub query: String,
    pub answer: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueHistory {
    turns: Vec<Turn>,
}

impl DialogueHistory {
    pub fn push(&mut self, query: impl Into<String>, answer: impl Into<String>) {
        self.turns.push(Turn {
            query: query.into(),
            answer: answer.into(),
        });
    }

    pub fn turns(&self) -> &[Turn] {
        &self.turns
    }

    pub fn len(&self) -> usize {
        self.turns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }

    /// What round `round` (1-based) sees: turns `1..round`.
    pub fn view(&self, round: usize) -> DialogueHistory {
        let upto = round.saturating_sub(1).min(self.turns.len());
        DialogueHistory {
            turns: self.turns[..upto].to_vec(),
        }
    }

    /// `Human:` / `AI:` transcript used for the `{chat_history}` slot.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for t in &self.turns {
            out.push_str("Human: ");
            out.push_str(&t.query);
            out.push_str("\nAI: ");
            out.push_str(&t.answer);
            out.push('\n');
        }
        out
    }
}
