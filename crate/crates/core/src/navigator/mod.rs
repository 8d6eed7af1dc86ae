pub mod agent;
pub mod memory;
pub mod naming;
pub mod parser;
pub mod prompt;
pub mod session;
pub mod trace;

pub use agent::{run_query, AgentConfig, AgentError, DEFAULT_MAX_STEPS};
pub use trace::{AgentStep, Outcome, StepBody, Trace};
