use super::{ToolError, ToolResult};
use crate::raster::LandCover;

/// Parsed `key=value, key=value` tool input.
///
/// Keys are trimmed and lowercased. Items without `=` are kept as
/// positional values, so `"be9519_5092de_pre.png"` alone works as an image
/// argument. A JSON object is accepted as well.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ToolArgs {
    named: Vec<(String, String)>,
    positional: Vec<String>,
}

fn clean(v: &str) -> String {
    v.trim()
        .trim_matches(|c| c == '"' || c == '\'' || c == '`')
        .trim()
        .to_string()
}

impl ToolArgs {
    pub fn parse(input: &str) -> ToolResult<Self> {
        let input = input.trim();
        if input.starts_with('{') {
            return Self::parse_json(input);
        }
        let mut args = ToolArgs::default();
        for item in input.split([',', '\n']) {
            let item = item.trim();
            if item.is_empty() {
                continue;
            }
            match item.split_once(['=', ':']) {
                Some((k, v)) if is_key(k) => {
                    let key = k.trim().to_ascii_lowercase();
                    let value = clean(v);
                    if value.is_empty() {
                        return Err(ToolError::BadInput(format!("empty value for '{key}'")));
                    }
                    args.named.push((key, value));
                }
                _ => args.positional.push(clean(item)),
            }
        }
        Ok(args)
    }

    fn parse_json(input: &str) -> ToolResult<Self> {
        let value: serde_json::Value = serde_json::from_str(input)
            .map_err(|e| ToolError::BadInput(format!("invalid JSON input: {e}")))?;
        let obj = value
            .as_object()
            .ok_or_else(|| ToolError::BadInput("JSON input must be an object".into()))?;
        let mut args = ToolArgs::default();
        for (k, v) in obj {
            let v = match v {
                serde_json::Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            args.named.push((k.trim().to_ascii_lowercase(), clean(&v)));
        }
        Ok(args)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.named
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// First of `keys` that is present.
    pub fn get_any(&self, keys: &[&str]) -> Option<&str> {
        keys.iter().find_map(|k| self.get(k))
    }

    pub fn positional(&self, i: usize) -> Option<&str> {
        self.positional.get(i).map(String::as_str)
    }

    /// The single image argument: `image=`, `img=`, `path=`, `file=`, or the
    /// first positional item.
    pub fn image(&self) -> ToolResult<&str> {
        self.get_any(&["image", "img", "image_path", "path", "file", "filename"])
            .or_else(|| self.positional(0))
            .ok_or_else(|| ToolError::BadInput("missing image=<id or filename>".into()))
    }

    pub fn land_cover(&self) -> ToolResult<Option<LandCover>> {
        match self.get_any(&["class", "category", "label"]) {
            None => Ok(None),
            Some(name) => LandCover::from_name(name)
                .map(Some)
                .ok_or_else(|| ToolError::BadInput(format!("unknown land-cover class '{name}'"))),
        }
    }

    pub fn number(&self, keys: &[&str]) -> ToolResult<Option<f64>> {
        match self.get_any(keys) {
            None => Ok(None),
            Some(v) => {
                let t = v.trim_end_matches('%');
                let n: f64 = t
                    .trim()
                    .parse()
                    .map_err(|_| ToolError::BadInput(format!("'{v}' is not a number")))?;
                Ok(Some(if v.ends_with('%') { n / 100.0 } else { n }))
            }
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.named.iter().map(|(k, _)| k.as_str())
    }

    pub fn named(&self) -> &[(String, String)] {
        &self.named
    }

    pub fn positionals(&self) -> &[String] {
        &self.positional
    }
}

fn is_key(k: &str) -> bool {
    let k = k.trim();
    !k.is_empty()
        && k.len() <= 32
        && k.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}
