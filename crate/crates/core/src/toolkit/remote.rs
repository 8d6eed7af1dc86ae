//! Adapter for tools served by an external model service.
//!
//! One endpoint, JSON over HTTP POST. The request carries the tool name, the
//! raw and parsed arguments, and every session image the arguments refer to
//! (PNG, base64). The response carries the observation text and any images
//! the service produced, which are registered as derived records before the
//! invocation returns. See `docs/remote-tool.md`.

use super::{ToolArgs, ToolError, ToolHandler, ToolOutput, ToolResult};
use crate::navigator::session::{ImagePayload, PayloadKind, Session};
use base64::Engine as _;
use base64::engine::general_purpose::STANDARD as B64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::time::Duration;

pub const REMOTE_PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemoteImage {
    pub id: String,
    pub filename: String,
    pub role: String,
    pub png_base64: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteRequest {
    pub version: u32,
    pub tool: String,
    pub input: String,
    pub args: BTreeMap<String, String>,
    pub images: Vec<RemoteImage>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemoteProduct {
    pub parent_id: String,
    pub tag: String,
    pub kind: PayloadKind,
    pub png_base64: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemoteResponse {
    pub observation: String,
    #[serde(default)]
    pub images: Vec<RemoteProduct>,
}

pub struct RemoteTool {
    tool: String,
    endpoint: String,
    client: reqwest::blocking::Client,
}

impl RemoteTool {
    pub fn new(tool: &str, endpoint: &str) -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .expect("http client");
        Self {
            tool: tool.to_string(),
            endpoint: endpoint.to_string(),
            client,
        }
    }

    pub fn build_request(&self, session: &Session, args: &ToolArgs, input: String) -> ToolResult<RemoteRequest> {
        let mut images = Vec::new();
        let refs = args
            .named()
            .iter()
            .map(|(_, v)| v.as_str())
            .chain(args.positionals().iter().map(String::as_str));
        for r in refs {
            let Ok(stored) = session.resolve(r) else {
                continue;
            };
            if images.iter().any(|i: &RemoteImage| i.id == stored.record.self_id.as_str()) {
                continue;
            }
            images.push(RemoteImage {
                id: stored.record.self_id.to_string(),
                filename: stored.record.filename.clone(),
                role: stored.record.role.to_string(),
                png_base64: B64.encode(stored.payload.to_png()?),
            });
        }
        Ok(RemoteRequest {
            version: REMOTE_PROTOCOL_VERSION,
            tool: self.tool.clone(),
            input,
            args: args.named().iter().cloned().collect(),
            images,
        })
    }
}

impl ToolHandler for RemoteTool {
    fn run(&self, session: &mut Session, args: &ToolArgs) -> ToolResult<ToolOutput> {
        let input = args
            .named()
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .chain(args.positionals().iter().cloned())
            .collect::<Vec<_>>()
            .join(", ");
        let request = self.build_request(session, args, input)?;
        let resp = self
            .client
            .post(&self.endpoint)
            .json(&request)
            .send()
            .map_err(|e| ToolError::Remote(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            let body = resp.text().unwrap_or_default();
            return Err(ToolError::Remote(format!("{status}: {body}")));
        }
        let body: RemoteResponse = resp
            .json()
            .map_err(|e| ToolError::Remote(format!("malformed response: {e}")))?;

        let mut observation = body.observation;
        let mut produced = Vec::new();
        for product in body.images {
            let bytes = B64
                .decode(product.png_base64.as_bytes())
                .map_err(|e| ToolError::Remote(format!("bad image payload: {e}")))?;
            let payload = ImagePayload::from_png(product.kind, &bytes)?;
            let parent = session.resolve(&product.parent_id)?.record.self_id.to_string();
            let rec = session.register_derived(&parent, &product.tag, payload)?;
            observation.push_str(&format!("\nimage: {}", rec.filename));
            produced.push(rec.self_id.to_string());
        }
        Ok(ToolOutput {
            observation,
            produced_images: produced,
        })
    }
}
