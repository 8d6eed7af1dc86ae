//! Reads one ReAct step out of a model completion.

use super::trace::AgentStep;
use crate::llm::OBSERVATION_STOP;
use crate::toolkit::Toolkit;
use regex::Regex;
use std::sync::LazyLock;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("malformed step: {reason}")]
pub struct MalformedStep {
    pub reason: &'static str,
    pub text: String,
}

static THOUGHT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?m)^[ \t]*Thought[ \t]*:").unwrap());
static ACTION: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?m)^[ \t]*Action[ \t]*:").unwrap());
static INPUT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?m)^[ \t]*Action[ \t]+Input[ \t]*:").unwrap());
static FINAL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?m)^[ \t]*Final[ \t]+Answer[ \t]*:").unwrap());

/// Drops everything from the first `Observation:` on. Observations only ever
/// come from real tool calls.
pub fn strip_observations(completion: &str) -> &str {
    match completion.find(OBSERVATION_STOP) {
        Some(i) => &completion[..i],
        None => completion,
    }
}

/// End of the field starting at `from`: the next keyword line, or the end.
fn field_end(text: &str, from: usize) -> usize {
    [&*THOUGHT, &*ACTION, &*INPUT, &*FINAL]
        .iter()
        .filter_map(|re| re.find_at(text, from).map(|m| m.start()))
        .min()
        .unwrap_or(text.len())
}

fn field(text: &str, start: usize) -> &str {
    text[start..field_end(text, start)].trim()
}

/// Parses the first step. Known tool names are normalized to their
/// registered form; unknown ones are kept as written so the loop can report
/// them back to the model.
pub fn parse_step(completion: &str, toolkit: &Toolkit) -> Result<AgentStep, MalformedStep> {
    let text = strip_observations(completion);
    let bad = |reason| MalformedStep {
        reason,
        text: completion.to_string(),
    };
    let thought = THOUGHT.find(text).ok_or_else(|| bad("no Thought"))?;
    let thought_text = field(text, thought.end());
    let action = ACTION.find_at(text, thought.end());
    let fin = FINAL.find_at(text, thought.end());

    match (action, fin) {
        (Some(a), f) if f.is_none_or(|f| a.start() < f.start()) => {
            let name = field(text, a.end());
            if name.is_empty() {
                return Err(bad("empty Action"));
            }
            let input = INPUT.find_at(text, a.end()).ok_or_else(|| bad("Action without Action Input"))?;
            let name = toolkit
                .lookup(name)
                .map(|s| s.name.clone())
                .unwrap_or_else(|| name.to_string());
            Ok(AgentStep::action(thought_text, &name, field(text, input.end())))
        }
        (_, Some(f)) => {
            let answer = text[f.end()..].trim();
            if answer.is_empty() {
                return Err(bad("empty Final Answer"));
            }
            Ok(AgentStep::final_answer(thought_text, answer))
        }
        _ => Err(bad("neither Action nor Final Answer")),
    }
}
