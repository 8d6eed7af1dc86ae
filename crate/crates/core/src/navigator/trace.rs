use serde::{Deserialize, Serialize};

/// Answer text recorded when a query ends without a final answer.
pub const STEP_LIMIT_MARKER: &str = "[no answer: step limit exceeded]";
pub const PARSE_FAILURE_MARKER: &str = "[no answer: unparseable model output]";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StepBody {
    Action {
        action: String,
        action_input: String,
        /// Empty until the tool has run.
        observation: String,
    },
    Final { final_answer: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentStep {
    pub thought: String,
    #[serde(flatten)]
    pub body: StepBody,
}

impl AgentStep {
    pub fn action(thought: &str, action: &str, input: &str) -> Self {
        Self {
            thought: thought.to_string(),
            body: StepBody::Action {
                action: action.to_string(),
                action_input: input.to_string(),
                observation: String::new(),
            },
        }
    }

    pub fn final_answer(thought: &str, answer: &str) -> Self {
        Self {
            thought: thought.to_string(),
            body: StepBody::Final {
                final_answer: answer.to_string(),
            },
        }
    }

    pub fn with_observation(mut self, text: &str) -> Self {
        if let StepBody::Action { observation, .. } = &mut self.body {
            *observation = text.to_string();
        }
        self
    }

    pub fn tool(&self) -> Option<&str> {
        match &self.body {
            StepBody::Action { action, .. } => Some(action),
            StepBody::Final { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Answered,
    StepLimitExceeded,
    ParseFailure,
    BackendError,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepTiming {
    pub llm_ms: u64,
    pub tool_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub query: String,
    pub steps: Vec<AgentStep>,
    /// Tool names of the action steps, in order (a multiset).
    pub tools_used: Vec<String>,
    pub final_answer: String,
    pub outcome: Outcome,
    /// Completions rejected by the parser, verbatim.
    pub parse_failures: Vec<String>,
    pub llm_calls: usize,
    pub timings: Vec<StepTiming>,
    pub total_ms: u64,
}

impl Trace {
    pub fn new(query: &str) -> Self {
        Self {
            query: query.to_string(),
            steps: Vec::new(),
            tools_used: Vec::new(),
            final_answer: String::new(),
            outcome: Outcome::Answered,
            parse_failures: Vec::new(),
            llm_calls: 0,
            timings: Vec::new(),
            total_ms: 0,
        }
    }

    pub fn push(&mut self, step: AgentStep, timing: StepTiming) {
        if let Some(tool) = step.tool() {
            self.tools_used.push(tool.to_string());
        }
        self.steps.push(step);
        self.timings.push(timing);
    }

    pub fn tool_count(&self) -> usize {
        self.tools_used.len()
    }

    pub fn is_answered(&self) -> bool {
        self.outcome == Outcome::Answered
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tools_used_follows_steps() {
        let mut t = Trace::new("q");
        t.push(AgentStep::action("a", "pixel_counting", "x"), StepTiming::default());
        t.push(AgentStep::action("b", "pixel_counting", "y"), StepTiming::default());
        t.push(AgentStep::final_answer("c", "done"), StepTiming::default());
        assert_eq!(t.tools_used, vec!["pixel_counting", "pixel_counting"]);
        let back: Trace = serde_json::from_str(&t.to_json()).unwrap();
        assert_eq!(back, t);
        assert!(t.to_json().contains("\"type\": \"final\""));
    }
}
