//! Evaluation: question datasets, tool-selection and answer metrics, the
//! error taxonomy, paired significance testing, latency estimates and
//! reports.

pub mod corpus;
pub mod dataset;
pub mod judge;
pub mod metrics;
pub mod report;
pub mod runner;
pub mod stats;

pub use dataset::{load_dataset, parse_dataset, AnswerSpec, ChecklistItem, DatasetError, Question, QuestionType, Subtype};
pub use judge::{judge_answer, Judgement};
pub use metrics::{bucket_difficulty, classify_error, match_rate, precision, recall, Difficulty, ErrorClass, Taxonomy};
pub use report::{Aggregate, EvalRecord, EvalReport};
pub use runner::{run_eval, run_eval_with, run_question, BackendFactory, EvalOutcome, QuestionRun, RunnerConfig, ScriptDir};
pub use stats::{estimate_latency, mcnemar, LatencyEstimate, McNemar};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("required tool list is empty")]
    EmptyRequirement,
    #[error("no records to aggregate")]
    EmptySet,
    #[error("no discordant pairs")]
    NoDiscordantPairs,
    #[error("tool count must be at least 1")]
    NoTools,
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}
