//! Paired comparison of two agents and the latency model.

use super::EvalError;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Below this many discordant pairs the exact binomial p-value is also
/// reported.
pub const EXACT_BELOW: u64 = 25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McNemar {
    pub b: u64,
    pub c: u64,
    /// Continuity-corrected statistic `(|b - c| - 1)^2 / (b + c)`.
    pub statistic: f64,
    /// Upper tail of chi-squared with one degree of freedom.
    pub p_value: f64,
    /// Two-sided exact binomial p-value, when `b + c` is small.
    pub exact_p_value: Option<f64>,
}

/// `b` and `c` count the discordant pairs (first right and second wrong, and
/// the reverse).
pub fn mcnemar(b: u64, c: u64) -> Result<McNemar, EvalError> {
    let n = b + c;
    if n == 0 {
        return Err(EvalError::NoDiscordantPairs);
    }
    let d = b.abs_diff(c) as f64 - 1.0;
    let statistic = d * d / n as f64;
    let chi = ChiSquared::new(1.0).expect("one degree of freedom");
    let p_value = chi.sf(statistic);
    let exact_p_value = (n < EXACT_BELOW).then(|| exact_binomial(b.min(c), n));
    Ok(McNemar {
        b,
        c,
        statistic,
        p_value,
        exact_p_value,
    })
}

/// `min(1, 2 * P[X <= k])` for X ~ Binomial(n, 1/2).
fn exact_binomial(k: u64, n: u64) -> f64 {
    let mut term = 0.5f64.powi(n as i32);
    let mut tail = term;
    for i in 0..k {
        term *= (n - i) as f64 / (i + 1) as f64;
        tail += term;
    }
    (2.0 * tail).min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyEstimate {
    pub tools: u32,
    /// Model calls: one per tool plus two.
    pub rounds: u32,
    pub min_s: f64,
    pub max_s: f64,
}

/// `tool_s` and `api_s` are per-call (min, max) durations in seconds.
pub fn estimate_latency(tools: u32, tool_s: (f64, f64), api_s: (f64, f64)) -> Result<LatencyEstimate, EvalError> {
    if tools == 0 {
        return Err(EvalError::NoTools);
    }
    let rounds = tools + 2;
    Ok(LatencyEstimate {
        tools,
        rounds,
        min_s: tools as f64 * tool_s.0 + rounds as f64 * api_s.0,
        max_s: tools as f64 * tool_s.1 + rounds as f64 * api_s.1,
    })
}
