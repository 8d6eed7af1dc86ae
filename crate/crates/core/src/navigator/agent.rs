//! The reasoning loop: prompt, complete, parse, invoke, repeat.

use super::memory::LogKind;
use super::parser::parse_step;
use super::prompt::assemble;
use super::session::Session;
use super::trace::{Outcome, StepBody, StepTiming, Trace, PARSE_FAILURE_MARKER, STEP_LIMIT_MARKER};
use crate::llm::{BackendError, CompletionBackend, CompletionRequest};
use crate::toolkit::{ToolError, Toolkit};
use thiserror::Error;

pub const DEFAULT_MAX_STEPS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AgentConfig {
    pub max_steps: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            max_steps: DEFAULT_MAX_STEPS,
        }
    }
}

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("session has no registered images")]
    NoImages,
    #[error(transparent)]
    Toolkit(#[from] ToolError),
    #[error("no final answer within {} steps", .0.steps.len())]
    StepLimitExceeded(Box<Trace>),
    #[error("model output could not be parsed twice in a row")]
    ParseFailure(Box<Trace>),
    #[error("backend: {error}")]
    Backend {
        error: BackendError,
        trace: Box<Trace>,
    },
}

impl AgentError {
    /// The partial trace, when the loop got far enough to have one.
    pub fn trace(&self) -> Option<&Trace> {
        match self {
            AgentError::StepLimitExceeded(t) | AgentError::ParseFailure(t) => Some(t),
            AgentError::Backend { trace, .. } => Some(trace),
            _ => None,
        }
    }
}

/// Answers one query. On success the answer is `trace.final_answer`, and the
/// turn is appended to the session's dialogue history. Step-limit and parse
/// failures also record a turn, with a failure marker as the answer.
pub fn run_query<B: CompletionBackend + ?Sized>(
    session: &mut Session,
    toolkit: &Toolkit,
    backend: &mut B,
    query: &str,
    config: &AgentConfig,
) -> Result<Trace, AgentError> {
    if session.image_count() == 0 {
        return Err(AgentError::NoImages);
    }
    toolkit.render_prompt()?;
    let started = session.now_ms();
    session.record_log(LogKind::Query, query);
    let mut trace = Trace::new(query);
    let mut malformed: Option<String> = None;

    loop {
        if trace.steps.len() >= config.max_steps {
            return Err(finish_failed(session, trace, started, Outcome::StepLimitExceeded));
        }
        let prompt = assemble(session, toolkit, query, &trace.steps, malformed.as_deref())?.render();
        let t0 = session.now_ms();
        trace.llm_calls += 1;
        let completion = match backend.complete(&CompletionRequest::new(prompt)) {
            Ok(c) => c,
            Err(error) => {
                trace.outcome = Outcome::BackendError;
                trace.total_ms = session.now_ms().saturating_sub(started);
                session.record_log(LogKind::Answer, format!("backend error: {error}"));
                return Err(AgentError::Backend {
                    error,
                    trace: Box::new(trace),
                });
            }
        };
        let llm_ms = session.now_ms().saturating_sub(t0);

        let mut step = match parse_step(&completion, toolkit) {
            Ok(step) => {
                malformed = None;
                step
            }
            Err(e) => {
                tracing::debug!(reason = e.reason, "malformed step");
                trace.parse_failures.push(completion.clone());
                if malformed.is_some() {
                    return Err(finish_failed(session, trace, started, Outcome::ParseFailure));
                }
                malformed = Some(completion);
                continue;
            }
        };

        let mut tool_ms = 0;
        match &mut step.body {
            StepBody::Final { final_answer } => {
                session.record_log(LogKind::Step, format!("{} => final answer", step.thought));
                let answer = final_answer.clone();
                trace.push(step, StepTiming { llm_ms, tool_ms });
                trace.final_answer = answer.clone();
                trace.total_ms = session.now_ms().saturating_sub(started);
                session.record_log(LogKind::Answer, answer.as_str());
                session.push_turn(query, &answer);
                return Ok(trace);
            }
            StepBody::Action {
                action,
                action_input,
                observation,
            } => {
                session.record_log(LogKind::Step, format!("{} => {action}({action_input})", step.thought));
                let t1 = session.now_ms();
                *observation = match toolkit.invoke(session, action, action_input) {
                    Ok(inv) => inv.observation,
                    Err(e) => format!("Error: {e}"),
                };
                tool_ms = session.now_ms().saturating_sub(t1);
            }
        }
        trace.push(step, StepTiming { llm_ms, tool_ms });
    }
}

fn finish_failed(session: &mut Session, mut trace: Trace, started: u64, outcome: Outcome) -> AgentError {
    let marker = match outcome {
        Outcome::StepLimitExceeded => STEP_LIMIT_MARKER,
        _ => PARSE_FAILURE_MARKER,
    };
    trace.outcome = outcome;
    trace.final_answer = marker.to_string();
    trace.total_ms = session.now_ms().saturating_sub(started);
    session.record_log(LogKind::Answer, marker);
    session.push_turn(&trace.query, marker);
    match outcome {
        Outcome::StepLimitExceeded => AgentError::StepLimitExceeded(Box::new(trace)),
        _ => AgentError::ParseFailure(Box::new(trace)),
    }
}
