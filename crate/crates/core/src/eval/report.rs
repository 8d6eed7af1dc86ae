use super::dataset::{QuestionType, Subtype};
use super::metrics::{Difficulty, ErrorClass};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub question_id: String,
    pub qtype: QuestionType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subtype: Option<Subtype>,
    pub difficulty: Difficulty,
    pub required_tools: Vec<String>,
    pub tools_used: Vec<String>,
    pub precision: f64,
    pub recall: f64,
    pub correct: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_class: Option<ErrorClass>,
    #[serde(default)]
    pub no_number_found: bool,
    pub answer: String,
    pub latency_ms: u64,
    /// Why the agent run ended without an answer, if it did.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub label: String,
    pub count: usize,
    pub correct: usize,
    /// Unweighted means of the per-question values, as fractions.
    pub precision: f64,
    pub recall: f64,
    pub match_rate: f64,
}

impl Aggregate {
    fn of<'a>(label: String, records: impl IntoIterator<Item = &'a EvalRecord>) -> Option<Self> {
        let (mut n, mut p, mut r, mut hits) = (0usize, 0.0, 0.0, 0usize);
        for rec in records {
            n += 1;
            p += rec.precision;
            r += rec.recall;
            hits += rec.correct as usize;
        }
        (n > 0).then(|| Aggregate {
            label,
            count: n,
            correct: hits,
            precision: p / n as f64,
            recall: r / n as f64,
            match_rate: hits as f64 / n as f64,
        })
    }

    fn row(&self) -> String {
        format!(
            "| {} | {} | {} | {} | {} |",
            self.label,
            self.count,
            pct(self.precision),
            pct(self.recall),
            pct(self.match_rate)
        )
    }
}

pub fn pct(fraction: f64) -> String {
    format!("{:.2}", fraction * 100.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub records: Vec<EvalRecord>,
    pub by_cell: Vec<Aggregate>,
    pub by_difficulty: Vec<Aggregate>,
    pub total: Aggregate,
    pub error_histogram: BTreeMap<ErrorClass, usize>,
    pub no_number_found: usize,
}

impl EvalReport {
    /// Aggregates are always recomputed from the records. Returns `None` for
    /// an empty record list.
    pub fn from_records(records: Vec<EvalRecord>) -> Option<Self> {
        let total = Aggregate::of("Total".into(), &records)?;
        let mut by_cell = Vec::new();
        for qt in QuestionType::ALL {
            let subs: Vec<Option<Subtype>> = if qt.subtypes().is_empty() {
                vec![None]
            } else {
                qt.subtypes().iter().copied().map(Some).collect()
            };
            for sub in subs {
                let label = match sub {
                    Some(s) => format!("{qt} / {}", s.label()),
                    None => qt.to_string(),
                };
                let cell = records.iter().filter(|r| r.qtype == qt && r.subtype == sub);
                by_cell.extend(Aggregate::of(label, cell));
            }
        }
        let by_difficulty = Difficulty::ALL
            .iter()
            .filter_map(|d| Aggregate::of(d.to_string(), records.iter().filter(|r| r.difficulty == *d)))
            .collect();
        let mut error_histogram: BTreeMap<ErrorClass, usize> =
            ErrorClass::ALL.iter().map(|c| (*c, 0)).collect();
        for r in &records {
            if let Some(c) = r.error_class {
                *error_histogram.get_mut(&c).expect("all classes present") += 1;
            }
        }
        let no_number_found = records.iter().filter(|r| r.no_number_found).count();
        Some(Self {
            records,
            by_cell,
            by_difficulty,
            total,
            error_histogram,
            no_number_found,
        })
    }

    pub fn summary_line(&self) -> String {
        format!(
            "P={} R={} Match={}",
            pct(self.total.precision),
            pct(self.total.recall),
            pct(self.total.match_rate)
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_markdown(&self) -> String {
        let header = "| {} | N | P (%) | R (%) | Match (%) |\n|---|---:|---:|---:|---:|\n";
        let mut s = String::from("## By difficulty\n\n");
        s.push_str(&header.replace("{}", "Difficulty"));
        for a in self.by_difficulty.iter().chain(std::iter::once(&self.total)) {
            s.push_str(&a.row());
            s.push('\n');
        }
        s.push_str("\n## By question type\n\n");
        s.push_str(&header.replace("{}", "Type / Subtype"));
        for a in &self.by_cell {
            s.push_str(&a.row());
            s.push('\n');
        }
        s.push_str("\n## Errors\n\n| Class | Count |\n|---|---:|\n");
        for (class, n) in &self.error_histogram {
            let _ = writeln!(s, "| {class} | {n} |");
        }
        if self.no_number_found > 0 {
            let _ = writeln!(s, "\n{} numeric answers contained no number.", self.no_number_found);
        }
        s
    }
}
