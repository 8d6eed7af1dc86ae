//! The executing layer: a closed registry of tools the planner can call.
//!
//! Tools take a comma-separated `key=value` argument string and return an
//! observation text. Observations mix a readable sentence with
//! `key: value` lines so downstream code can pick numbers out without any
//! language processing.

mod args;
mod builtin;
mod fixtures;
mod remote;

pub use args::ToolArgs;
pub use builtin::{standard_specs, StandardTool};
pub use fixtures::{Artifact, FixtureStore};
pub use remote::{RemoteImage, RemoteProduct, RemoteRequest, RemoteResponse, RemoteTool};

use crate::navigator::memory::LogKind;
use crate::navigator::session::{Session, SessionError};
use crate::raster::RasterError;
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ToolError {
    #[error("tool '{0}' is already registered")]
    DuplicateName(String),
    #[error("no tools registered")]
    EmptyRegistry,
    #[error("unknown tool '{0}'")]
    UnknownTool(String),
    #[error("bad input: {0}")]
    BadInput(String),
    #[error("no {tool} fixture for {key}")]
    FixtureMissing { tool: String, key: String },
    #[error("fixture {path}: {reason}")]
    BadFixture { path: String, reason: String },
    #[error("remote tool failed: {0}")]
    Remote(String),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Raster(#[from] RasterError),
}

pub type ToolResult<T> = Result<T, ToolError>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Backing {
    /// Computed in-process from session rasters.
    Native,
    /// Served from a fixture directory.
    Stub,
    /// Forwarded to a model service.
    Remote { endpoint: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolSpec {
    pub name: String,
    pub description: String,
    pub arg_grammar: String,
    pub backing: Backing,
}

impl ToolSpec {
    fn validate(&self) -> ToolResult<()> {
        if self.name.is_empty() || self.name.chars().any(char::is_whitespace) {
            return Err(ToolError::BadInput(format!(
                "tool name '{}' must be a non-empty token",
                self.name
            )));
        }
        if self.description.trim().is_empty() {
            return Err(ToolError::BadInput(format!(
                "tool '{}' needs a description",
                self.name
            )));
        }
        Ok(())
    }
}

/// What a handler hands back to the registry.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ToolOutput {
    pub observation: String,
    pub produced_images: Vec<String>,
}

pub trait ToolHandler: Send + Sync {
    fn run(&self, session: &mut Session, args: &ToolArgs) -> ToolResult<ToolOutput>;
}

/// One completed tool call.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolInvocation {
    pub tool: String,
    pub input: String,
    pub observation: String,
    pub produced_images: Vec<String>,
    pub duration_ms: u64,
}

struct RegisteredTool {
    spec: ToolSpec,
    handler: Arc<dyn ToolHandler>,
}

/// Closed set of tools. Built once at startup and shared read-only.
#[derive(Default)]
pub struct Toolkit {
    tools: IndexMap<String, RegisteredTool>,
}

impl std::fmt::Debug for Toolkit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.tools.keys()).finish()
    }
}

impl Toolkit {
    pub fn new() -> Self {
        Self::default()
    }

    /// The eight standard tools; deep-learning ones read from `fixtures`.
    pub fn standard(fixtures: Option<FixtureStore>) -> Self {
        let fixtures = fixtures.map(Arc::new);
        let mut kit = Self::new();
        for spec in standard_specs() {
            let tool = StandardTool::from_name(&spec.name).expect("standard tool");
            kit.register(spec, Arc::new(tool.handler(fixtures.clone())))
                .expect("standard names are unique");
        }
        kit
    }

    pub fn register(&mut self, spec: ToolSpec, handler: Arc<dyn ToolHandler>) -> ToolResult<()> {
        spec.validate()?;
        if self.tools.contains_key(&spec.name) {
            return Err(ToolError::DuplicateName(spec.name));
        }
        self.tools
            .insert(spec.name.clone(), RegisteredTool { spec, handler });
        Ok(())
    }

    /// Swaps the handler of an already registered tool for a remote service.
    pub fn route_remote(&mut self, name: &str, endpoint: &str) -> ToolResult<()> {
        let tool = self
            .tools
            .get_mut(name)
            .ok_or_else(|| ToolError::UnknownTool(name.to_string()))?;
        tool.spec.backing = Backing::Remote {
            endpoint: endpoint.to_string(),
        };
        tool.handler = Arc::new(RemoteTool::new(name, endpoint));
        Ok(())
    }

    pub fn specs(&self) -> impl Iterator<Item = &ToolSpec> {
        self.tools.values().map(|t| &t.spec)
    }

    pub fn names(&self) -> Vec<&str> {
        self.tools.keys().map(String::as_str).collect()
    }

    pub fn len(&self) -> usize {
        self.tools.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tools.is_empty()
    }

    /// Matches a planner-supplied action name: trimmed, case-folded, with
    /// spaces and dashes read as underscores.
    pub fn lookup(&self, name: &str) -> Option<&ToolSpec> {
        let norm = normalize_tool_name(name);
        self.tools.get(&norm).map(|t| &t.spec)
    }

    /// `(tools_block, tool_names)` for the prompt's `{tools}` and
    /// `{tool_names}` slots.
    pub fn render_prompt(&self) -> ToolResult<(String, String)> {
        if self.tools.is_empty() {
            return Err(ToolError::EmptyRegistry);
        }
        let block = self
            .specs()
            .map(|s| format!("{}: {}", s.name, s.description))
            .collect::<Vec<_>>()
            .join("\n");
        Ok((block, self.names().join(", ")))
    }

    /// Runs a registered tool against the session. Every call is logged to
    /// the session's reference log exactly once, failed or not.
    pub fn invoke(
        &self,
        session: &mut Session,
        tool: &str,
        input: &str,
    ) -> ToolResult<ToolInvocation> {
        let started = session.now_ms();
        let result = self.run(session, tool, input);
        let duration_ms = session.now_ms().saturating_sub(started);
        match result {
            Ok((name, out)) => {
                session.record_log(
                    LogKind::ToolCall,
                    format!("{name}({input}) -> {}", first_line(&out.observation)),
                );
                Ok(ToolInvocation {
                    tool: name,
                    input: input.to_string(),
                    observation: out.observation,
                    produced_images: out.produced_images,
                    duration_ms,
                })
            }
            Err(e) => {
                session.record_log(LogKind::ToolCall, format!("{tool}({input}) -> error: {e}"));
                Err(e)
            }
        }
    }

    fn run(&self, session: &mut Session, tool: &str, input: &str) -> ToolResult<(String, ToolOutput)> {
        let norm = normalize_tool_name(tool);
        let registered = self
            .tools
            .get(&norm)
            .ok_or_else(|| ToolError::UnknownTool(tool.trim().to_string()))?;
        let args = ToolArgs::parse(input)?;
        let out = registered.handler.run(session, &args)?;
        if out.observation.trim().is_empty() {
            return Err(ToolError::Remote(format!("{norm} returned an empty observation")));
        }
        Ok((norm, out))
    }
}

pub(crate) fn normalize_tool_name(name: &str) -> String {
    name.trim()
        .trim_matches(|c| c == '`' || c == '"' || c == '\'' || c == '[' || c == ']')
        .to_ascii_lowercase()
        .replace([' ', '-'], "_")
}

fn first_line(s: &str) -> &str {
    s.lines().next().unwrap_or("")
}
