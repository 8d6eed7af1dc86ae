//! Tool-selection precision/recall, answer match rate, difficulty buckets and
//! the error taxonomy.

use super::EvalError;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

fn multiset<S: AsRef<str>>(items: &[S]) -> BTreeMap<&str, usize> {
    let mut m = BTreeMap::new();
    for i in items {
        *m.entry(i.as_ref()).or_insert(0) += 1;
    }
    m
}

/// Size of the multiset intersection: per-name minimum of multiplicities.
pub fn intersection_size<A: AsRef<str>, B: AsRef<str>>(a: &[A], b: &[B]) -> usize {
    let mb = multiset(b);
    multiset(a)
        .into_iter()
        .map(|(k, n)| n.min(mb.get(k).copied().unwrap_or(0)))
        .sum()
}

/// Share of used tools that were required. Zero when nothing was used.
pub fn precision<A: AsRef<str>, B: AsRef<str>>(used: &[A], required: &[B]) -> f64 {
    if used.is_empty() {
        return 0.0;
    }
    intersection_size(used, required) as f64 / used.len() as f64
}

/// Share of required tools that were used.
pub fn recall<A: AsRef<str>, B: AsRef<str>>(used: &[A], required: &[B]) -> Result<f64, EvalError> {
    if required.is_empty() {
        return Err(EvalError::EmptyRequirement);
    }
    Ok(intersection_size(used, required) as f64 / required.len() as f64)
}

pub fn match_rate(correct: impl IntoIterator<Item = bool>) -> Result<f64, EvalError> {
    let (mut hits, mut total) = (0usize, 0usize);
    for c in correct {
        hits += c as usize;
        total += 1;
    }
    if total == 0 {
        return Err(EvalError::EmptySet);
    }
    Ok(hits as f64 / total as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Difficulty {
    Easy,
    Medium,
    Difficult,
}

impl Difficulty {
    pub const ALL: [Difficulty; 3] = [Self::Easy, Self::Medium, Self::Difficult];

    pub fn label(self) -> &'static str {
        match self {
            Self::Easy => "Easy",
            Self::Medium => "Medium",
            Self::Difficult => "Difficult",
        }
    }
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// 1 required tool is easy, 2 medium, more difficult.
pub fn bucket_difficulty(required_tools: usize) -> Difficulty {
    match required_tools {
        0 | 1 => Difficulty::Easy,
        2 => Difficulty::Medium,
        _ => Difficulty::Difficult,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorClass {
    Misunderstood,
    InsufficientTools,
    IncorrectTools,
    TooComplex,
}

impl ErrorClass {
    pub const ALL: [ErrorClass; 4] = [
        Self::Misunderstood,
        Self::InsufficientTools,
        Self::IncorrectTools,
        Self::TooComplex,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Self::Misunderstood => "Misunderstood Query",
            Self::InsufficientTools => "Insufficient Tools Used",
            Self::IncorrectTools => "Incorrect Tools Used",
            Self::TooComplex => "Too Complex",
        }
    }
}

impl fmt::Display for ErrorClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Taxonomy {
    /// Class for wrong answers with equal precision and recall strictly
    /// between 0 and 1.
    pub tie: ErrorClass,
}

impl Default for Taxonomy {
    fn default() -> Self {
        Self {
            tie: ErrorClass::IncorrectTools,
        }
    }
}

impl Taxonomy {
    pub fn classify(&self, precision: f64, recall: f64, correct: bool) -> Option<ErrorClass> {
        if correct {
            return None;
        }
        Some(if precision == 0.0 && recall == 0.0 {
            ErrorClass::TooComplex
        } else if precision == 1.0 && recall == 1.0 {
            ErrorClass::Misunderstood
        } else if recall < precision {
            ErrorClass::InsufficientTools
        } else if precision < recall {
            ErrorClass::IncorrectTools
        } else {
            self.tie
        })
    }
}

pub fn classify_error(precision: f64, recall: f64, correct: bool) -> Option<ErrorClass> {
    Taxonomy::default().classify(precision, recall, correct)
}
