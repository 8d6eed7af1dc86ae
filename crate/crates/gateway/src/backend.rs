use changescope_core::eval::{BackendFactory, Question};
use changescope_core::llm::{BackendError, ChatCompletionsClient, CompletionBackend, ScriptedBackend};
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// `scripted:<path>` or `http`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendSelector {
    /// A script file, or a directory of `<question id>.json` scripts.
    Scripted(PathBuf),
    /// Chat-completions endpoint configured through the environment.
    Http,
}

impl FromStr for BackendSelector {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if s == "http" {
            return Ok(Self::Http);
        }
        match s.strip_prefix("scripted:") {
            Some(p) if !p.is_empty() => Ok(Self::Scripted(PathBuf::from(p))),
            _ => Err(format!("backend must be 'scripted:<path>' or 'http', got '{s}'")),
        }
    }
}

impl std::fmt::Display for BackendSelector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Scripted(p) => write!(f, "scripted:{}", p.display()),
            Self::Http => f.write_str("http"),
        }
    }
}

impl BackendSelector {
    /// A fresh backend. A scripted selector must name a file here.
    pub fn open(&self) -> Result<Box<dyn CompletionBackend>, BackendError> {
        match self {
            Self::Scripted(p) => Ok(Box::new(ScriptedBackend::from_file(p)?)),
            Self::Http => Ok(Box::new(ChatCompletionsClient::from_env()?)),
        }
    }

    /// Per-question backends for batch evaluation.
    pub fn factory(&self) -> Result<SelectorFactory, BackendError> {
        Ok(match self {
            Self::Scripted(p) => SelectorFactory::Scripts(p.clone()),
            Self::Http => SelectorFactory::Live(ChatCompletionsClient::from_env()?),
        })
    }
}

pub enum SelectorFactory {
    Scripts(PathBuf),
    Live(ChatCompletionsClient),
}

fn script_for(path: &Path, question: &Question) -> PathBuf {
    if path.is_dir() {
        path.join(format!("{}.json", question.id))
    } else {
        path.to_path_buf()
    }
}

impl BackendFactory for SelectorFactory {
    fn backend_for(&mut self, question: &Question) -> Result<Box<dyn CompletionBackend>, BackendError> {
        match self {
            Self::Scripts(p) => Ok(Box::new(ScriptedBackend::from_file(&script_for(p, question))?)),
            Self::Live(client) => Ok(Box::new(client.clone())),
        }
    }
}
