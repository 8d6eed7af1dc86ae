use super::dataset::{CropTarget, Question};
use super::judge::judge_answer;
use super::metrics::{bucket_difficulty, precision, recall, Taxonomy};
use super::report::{EvalRecord, EvalReport};
use crate::llm::{BackendError, CompletionBackend, ScriptedBackend};
use crate::navigator::memory::{Clock, SystemClock, TickClock};
use crate::navigator::session::{Session, SessionError, Temporal, DEFAULT_SEED};
use crate::navigator::{run_query, AgentConfig, AgentError, Trace};
use crate::toolkit::{FixtureStore, ToolError, Toolkit};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("image {path}: {reason}")]
    Image { path: String, reason: String },
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Tool(#[from] ToolError),
}

/// What one agent run produced for one question.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuestionRun {
    pub answer: String,
    pub trace: Option<Trace>,
    pub failure: Option<String>,
}

impl QuestionRun {
    pub fn failed(reason: impl Into<String>, trace: Option<Trace>) -> Self {
        Self {
            answer: trace.as_ref().map(|t| t.final_answer.clone()).unwrap_or_default(),
            trace,
            failure: Some(reason.into()),
        }
    }
}

/// Supplies a fresh completion backend for each question.
pub trait BackendFactory {
    fn backend_for(&mut self, question: &Question) -> Result<Box<dyn CompletionBackend>, BackendError>;
}

impl<F> BackendFactory for F
where
    F: FnMut(&Question) -> Result<Box<dyn CompletionBackend>, BackendError>,
{
    fn backend_for(&mut self, question: &Question) -> Result<Box<dyn CompletionBackend>, BackendError> {
        self(question)
    }
}

/// Scripts named `<dir>/<question id>.json`.
#[derive(Debug, Clone)]
pub struct ScriptDir(pub PathBuf);

impl BackendFactory for ScriptDir {
    fn backend_for(&mut self, question: &Question) -> Result<Box<dyn CompletionBackend>, BackendError> {
        let path = self.0.join(format!("{}.json", question.id));
        Ok(Box::new(ScriptedBackend::from_file(&path)?))
    }
}

#[derive(Debug, Clone)]
pub struct RunnerConfig {
    pub agent: AgentConfig,
    pub seed: u64,
    /// Logical clock (deterministic timings) instead of wall time.
    pub logical_clock: bool,
    pub taxonomy: Taxonomy,
    /// Fixture root for questions that do not name their own.
    pub fixtures: Option<PathBuf>,
    /// `(tool, endpoint)` pairs served remotely.
    pub remote: Vec<(String, String)>,
}

impl Default for RunnerConfig {
    fn default() -> Self {
        Self {
            agent: AgentConfig::default(),
            seed: DEFAULT_SEED,
            logical_clock: true,
            taxonomy: Taxonomy::default(),
            fixtures: None,
            remote: Vec::new(),
        }
    }
}

fn read_png(base: &Path, rel: &str) -> Result<Vec<u8>, RunError> {
    let path = base.join(rel);
    std::fs::read(&path).map_err(|e| RunError::Image {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

/// Registers the question's pair (and crops) in a new session.
pub fn prepare_session(question: &Question, base_dir: &Path, config: &RunnerConfig) -> Result<Session, RunError> {
    let clock: Arc<dyn Clock> = if config.logical_clock {
        Arc::new(TickClock::starting_at(0))
    } else {
        Arc::new(SystemClock)
    };
    let mut session = Session::with_clock(config.seed, clock);
    let pre = session.register_image(&read_png(base_dir, &question.images.pre)?, Temporal::Pre, None)?;
    let cur = session.register_image(
        &read_png(base_dir, &question.images.cur)?,
        Temporal::Cur,
        Some(pre.link_id.as_str()),
    )?;
    if let Some(crop) = &question.images.crop {
        let targets: &[&str] = match crop.parent {
            CropTarget::Pre => &[pre.self_id.as_str()],
            CropTarget::Cur => &[cur.self_id.as_str()],
            CropTarget::Both => &[pre.self_id.as_str(), cur.self_id.as_str()],
        };
        for t in targets {
            session.crop_and_register(t, crop.region)?;
        }
    }
    Ok(session)
}

pub fn toolkit_for(question: &Question, base_dir: &Path, config: &RunnerConfig) -> Result<Toolkit, RunError> {
    let fixtures = question
        .fixtures
        .as_ref()
        .map(|f| base_dir.join(f))
        .or_else(|| config.fixtures.clone());
    let mut kit = Toolkit::standard(fixtures.map(FixtureStore::new));
    for (tool, endpoint) in &config.remote {
        kit.route_remote(tool, endpoint)?;
    }
    Ok(kit)
}

/// Runs the agent on one question. Never fails: problems become a failed run.
pub fn run_question(
    question: &Question,
    base_dir: &Path,
    backends: &mut dyn BackendFactory,
    config: &RunnerConfig,
) -> QuestionRun {
    let setup = (|| {
        let session = prepare_session(question, base_dir, config)?;
        let kit = toolkit_for(question, base_dir, config)?;
        let backend = backends.backend_for(question)?;
        Ok::<_, RunError>((session, kit, backend))
    })();
    let (mut session, kit, mut backend) = match setup {
        Ok(s) => s,
        Err(e) => return QuestionRun::failed(format!("setup: {e}"), None),
    };
    match run_query(&mut session, &kit, &mut backend, &question.text, &config.agent) {
        Ok(trace) => QuestionRun {
            answer: trace.final_answer.clone(),
            trace: Some(trace),
            failure: None,
        },
        Err(e) => {
            let trace = e.trace().cloned();
            QuestionRun::failed(e.to_string(), trace)
        }
    }
}

/// Scores one run. A failed run is always incorrect.
pub fn score(question: &Question, run: &QuestionRun, taxonomy: &Taxonomy) -> EvalRecord {
    let tools_used = run.trace.as_ref().map(|t| t.tools_used.clone()).unwrap_or_default();
    let p = precision(&tools_used, &question.required_tools);
    let r = recall(&tools_used, &question.required_tools).unwrap_or(0.0);
    let judged = judge_answer(&run.answer, &question.reference);
    let correct = run.failure.is_none() && judged.correct;
    EvalRecord {
        question_id: question.id.clone(),
        qtype: question.qtype,
        subtype: question.subtype,
        difficulty: bucket_difficulty(question.required_tools.len()),
        required_tools: question.required_tools.clone(),
        tools_used,
        precision: p,
        recall: r,
        correct,
        error_class: taxonomy.classify(p, r, correct),
        no_number_found: judged.no_number_found,
        answer: run.answer.clone(),
        latency_ms: run.trace.as_ref().map_or(0, |t| t.total_ms),
        failure: run.failure.clone(),
    }
}

#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub report: EvalReport,
    /// Per question, in dataset order.
    pub traces: Vec<(String, Option<Trace>)>,
}

/// Evaluates every question with `agent`; a panicking agent run is recorded
/// as a failure and the rest of the run continues.
pub fn run_eval_with(
    questions: &[Question],
    taxonomy: &Taxonomy,
    mut agent: impl FnMut(&Question) -> QuestionRun,
) -> Option<EvalOutcome> {
    let mut records = Vec::with_capacity(questions.len());
    let mut traces = Vec::with_capacity(questions.len());
    for q in questions {
        let run = catch_unwind(AssertUnwindSafe(|| agent(q)))
            .unwrap_or_else(|_| QuestionRun::failed("agent run panicked", None));
        records.push(score(q, &run, taxonomy));
        traces.push((q.id.clone(), run.trace));
    }
    Some(EvalOutcome {
        report: EvalReport::from_records(records)?,
        traces,
    })
}

pub fn run_eval(
    questions: &[Question],
    base_dir: &Path,
    backends: &mut dyn BackendFactory,
    config: &RunnerConfig,
) -> Option<EvalOutcome> {
    run_eval_with(questions, &config.taxonomy, |q| run_question(q, base_dir, backends, config))
}

impl From<AgentError> for QuestionRun {
    fn from(e: AgentError) -> Self {
        let trace = e.trace().cloned();
        QuestionRun::failed(e.to_string(), trace)
    }
}
