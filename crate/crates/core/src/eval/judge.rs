//! Answer matching against reference specs.

use super::dataset::{AnswerSpec, ChecklistItem};
use crate::raster::LandCover;
use regex::Regex;
use std::sync::LazyLock;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Judgement {
    pub correct: bool,
    /// A numeric reference met an answer without any number.
    pub no_number_found: bool,
}

static NUMBER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[-+]?\d{1,3}(?:,\d{3})+(?:\.\d+)?|[-+]?\d+(?:\.\d+)?").unwrap());

pub fn extract_numbers(text: &str) -> Vec<f64> {
    NUMBER
        .find_iter(text)
        .filter_map(|m| m.as_str().replace(',', "").parse().ok())
        .collect()
}

/// Lowercase words separated by single spaces, with a space at each end so
/// whole-word checks are plain substring checks.
fn normalize(text: &str) -> String {
    let mut out = String::from(" ");
    for word in text
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
    {
        out.push_str(&word.to_lowercase());
        out.push(' ');
    }
    out
}

fn find_term(norm: &str, term: &str) -> Option<usize> {
    let t = normalize(term);
    if t.trim().is_empty() {
        return None;
    }
    norm.find(&t).or_else(|| {
        // plural form of the last word
        let plural = format!("{}s ", t.trim_end());
        norm.find(&plural)
    })
}

fn polarity(norm: &str) -> Option<bool> {
    norm.split(' ').find_map(|w| match w {
        "yes" | "true" => Some(true),
        "no" | "false" => Some(false),
        _ => None,
    })
}

fn default_tolerance(value: f64) -> f64 {
    if value.fract() == 0.0 {
        0.0
    } else {
        0.01
    }
}

pub fn within(answer: f64, value: f64, tolerance: Option<f64>) -> bool {
    let tol = tolerance.unwrap_or_else(|| default_tolerance(value));
    let err = (answer - value).abs();
    let bound = if value.abs() > 1.0 { tol * value.abs() } else { tol };
    err <= bound + 1e-12
}

/// Names that count as mentioning a land-cover class.
fn class_terms(class: &str) -> Vec<String> {
    let mut terms = vec![class.to_string()];
    if let Some(lc) = LandCover::from_name(class) {
        let name = lc.name().to_string();
        if !terms.contains(&name) {
            terms.push(name);
        }
    }
    terms
}

fn first_mention(norm: &str, class: &str) -> Option<usize> {
    class_terms(class).iter().filter_map(|t| find_term(norm, t)).min()
}

fn last_mention(norm: &str, class: &str) -> Option<usize> {
    class_terms(class)
        .iter()
        .filter_map(|t| {
            let n = normalize(t);
            norm.rfind(&n).or_else(|| norm.rfind(&format!("{}s ", n.trim_end())))
        })
        .max()
}

pub fn judge_answer(answer: &str, spec: &AnswerSpec) -> Judgement {
    let norm = normalize(answer);
    match spec {
        AnswerSpec::Boolean { value } => Judgement {
            correct: polarity(&norm) == Some(*value),
            no_number_found: false,
        },
        AnswerSpec::Numeric { value, tolerance } => match extract_numbers(answer).first() {
            Some(n) => Judgement {
                correct: within(*n, *value, *tolerance),
                no_number_found: false,
            },
            None => Judgement {
                correct: false,
                no_number_found: true,
            },
        },
        AnswerSpec::Categorical { accepted } => Judgement {
            correct: accepted.iter().any(|a| find_term(&norm, a).is_some()),
            no_number_found: false,
        },
        AnswerSpec::Checklist { items } => {
            let numbers = extract_numbers(answer);
            let mut no_number = false;
            let correct = items.iter().all(|item| match item {
                ChecklistItem::Mentions { any } => any.iter().any(|t| find_term(&norm, t).is_some()),
                ChecklistItem::Polarity { value } => polarity(&norm) == Some(*value),
                ChecklistItem::Number { value, tolerance } => {
                    no_number |= numbers.is_empty();
                    numbers.iter().any(|n| within(*n, *value, *tolerance))
                }
                ChecklistItem::BeforeClass { class } => {
                    let Some(pos) = first_mention(&norm, class) else {
                        return false;
                    };
                    // must come before every after-class named in the list
                    items.iter().all(|other| match other {
                        ChecklistItem::AfterClass { class: after } if after != class => {
                            last_mention(&norm, after).is_some_and(|a| pos < a)
                        }
                        _ => true,
                    })
                }
                ChecklistItem::AfterClass { class } => first_mention(&norm, class).is_some(),
            });
            Judgement {
                correct,
                no_number_found: no_number,
            }
        }
    }
}
