//! Question dataset: JSON Lines, one question per line.

use crate::raster::CropRegion;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("dataset line {line}: {reason}")]
pub struct DatasetError {
    /// 1-based; 0 when the file itself could not be read.
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionType {
    Whether,
    Size,
    Number,
    Class,
}

impl QuestionType {
    pub const ALL: [QuestionType; 4] = [Self::Whether, Self::Size, Self::Number, Self::Class];

    pub fn label(self) -> &'static str {
        match self {
            Self::Whether => "Whether",
            Self::Size => "Size",
            Self::Number => "Number",
            Self::Class => "Class",
        }
    }

    /// Legal subtypes; `Whether` has none.
    pub fn subtypes(self) -> &'static [Subtype] {
        use Subtype::*;
        match self {
            Self::Whether => &[],
            Self::Size => &[Basic, CertainClass, LocalArea, Analysis],
            Self::Number => &[Basic, LocalArea, Comparison],
            Self::Class => &[WholeImage, LocalArea],
        }
    }
}

impl fmt::Display for QuestionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subtype {
    Basic,
    CertainClass,
    LocalArea,
    Analysis,
    Comparison,
    WholeImage,
}

impl Subtype {
    pub fn label(self) -> &'static str {
        match self {
            Self::Basic => "Basic",
            Self::CertainClass => "Certain Class",
            Self::LocalArea => "Local Area",
            Self::Analysis => "Analysis",
            Self::Comparison => "Comparison",
            Self::WholeImage => "Whole Image",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CropTarget {
    Pre,
    Cur,
    #[default]
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropSpec {
    pub region: CropRegion,
    #[serde(default)]
    pub parent: CropTarget,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionImages {
    /// Paths relative to the dataset file.
    pub pre: String,
    pub cur: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crop: Option<CropSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChecklistItem {
    /// Any of the terms appears.
    Mentions { any: Vec<String> },
    /// Land-cover class named as the earlier state.
    BeforeClass { class: String },
    /// Land-cover class named as the later state.
    AfterClass { class: String },
    /// Some number in the answer is within tolerance.
    Number {
        value: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tolerance: Option<f64>,
    },
    Polarity { value: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnswerSpec {
    Boolean { value: bool },
    /// `tolerance` is relative when `|value| > 1`, absolute otherwise. When
    /// absent: exact for integers, 1% otherwise.
    Numeric {
        value: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tolerance: Option<f64>,
    },
    Categorical { accepted: Vec<String> },
    Checklist { items: Vec<ChecklistItem> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub qtype: QuestionType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subtype: Option<Subtype>,
    pub text: String,
    pub images: QuestionImages,
    pub required_tools: Vec<String>,
    pub reference: AnswerSpec,
    /// Stub-tool fixture directory, relative to the dataset file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixtures: Option<String>,
}

impl Question {
    pub fn validate(&self) -> Result<(), String> {
        if self.id.trim().is_empty() {
            return Err("empty id".into());
        }
        match self.subtype {
            None if self.qtype != QuestionType::Whether => {
                return Err(format!("{} questions need a subtype", self.qtype))
            }
            Some(s) if !self.qtype.subtypes().contains(&s) => {
                return Err(format!("subtype {} is not valid for {}", s.label(), self.qtype))
            }
            _ => {}
        }
        if self.required_tools.is_empty() {
            return Err("required_tools is empty".into());
        }
        check_spec(&self.reference)?;
        if self.subtype == Some(Subtype::Analysis)
            && !matches!(&self.reference, AnswerSpec::Checklist { .. })
        {
            return Err("Analysis questions need a checklist reference".into());
        }
        Ok(())
    }

    pub fn cell_label(&self) -> String {
        match self.subtype {
            Some(s) => format!("{} / {}", self.qtype, s.label()),
            None => self.qtype.to_string(),
        }
    }
}

fn check_tolerance(t: Option<f64>) -> Result<(), String> {
    match t {
        Some(t) if !(t >= 0.0 && t.is_finite()) => Err(format!("bad tolerance {t}")),
        _ => Ok(()),
    }
}

fn check_spec(spec: &AnswerSpec) -> Result<(), String> {
    match spec {
        AnswerSpec::Numeric { tolerance, .. } => check_tolerance(*tolerance),
        AnswerSpec::Categorical { accepted } if accepted.is_empty() => {
            Err("categorical answer with no accepted names".into())
        }
        AnswerSpec::Checklist { items } if items.is_empty() => Err("empty checklist".into()),
        AnswerSpec::Checklist { items } => items.iter().try_for_each(|i| match i {
            ChecklistItem::Number { tolerance, .. } => check_tolerance(*tolerance),
            ChecklistItem::Mentions { any } if any.is_empty() => Err("empty mentions item".into()),
            _ => Ok(()),
        }),
        _ => Ok(()),
    }
}

pub fn parse_dataset(text: &str) -> Result<Vec<Question>, DatasetError> {
    let mut out: Vec<Question> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let err = |reason: String| DatasetError {
            line: line_no,
            reason,
        };
        let q: Question = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        q.validate().map_err(err)?;
        if out.iter().any(|o| o.id == q.id) {
            return Err(err(format!("duplicate id {}", q.id)));
        }
        out.push(q);
    }
    if out.is_empty() {
        return Err(DatasetError {
            line: 0,
            reason: "dataset has no questions".into(),
        });
    }
    Ok(out)
}

pub fn load_dataset(path: &Path) -> Result<Vec<Question>, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|e| DatasetError {
        line: 0,
        reason: format!("{}: {e}", path.display()),
    })?;
    parse_dataset(&text)
}

pub fn write_dataset(path: &Path, questions: &[Question]) -> std::io::Result<()> {
    let mut s = String::new();
    for q in questions {
        s.push_str(&serde_json::to_string(q).expect("question serializes"));
        s.push('\n');
    }
    std::fs::write(path, s)
}
