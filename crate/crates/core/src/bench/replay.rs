use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::backend::{estimate_cost, CostReport, MeterSnapshot, UnitPrices};
use crate::error::{Error, Result};

/// Recorded usage for one repository run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TokenLogEntry {
    pub repo: String,
    #[serde(default)]
    pub requests: u64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    #[serde(default)]
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub repos: usize,
    pub total: CostReport,
    pub avg_dollars: Option<f64>,
    pub avg_seconds: Option<f64>,
}

pub fn load_token_log(path: &Path) -> Result<Vec<TokenLogEntry>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Manifest(format!("token log line {}: {e}", i + 1)))
        })
        .collect()
}

/// Price a recorded token log as if it had been metered live.
pub fn replay_token_log(entries: &[TokenLogEntry], prices: UnitPrices) -> ReplayReport {
    let snapshot = entries.iter().fold(MeterSnapshot::default(), |mut s, e| {
        s.requests += e.requests;
        s.prompt_tokens += e.prompt_tokens;
        s.completion_tokens += e.completion_tokens;
        s.wall_nanos += (e.wall_seconds.max(0.0) * 1e9) as u64;
        s
    });
    let total = estimate_cost(&snapshot, prices);
    let n = entries.len();
    ReplayReport {
        repos: n,
        avg_dollars: (n > 0).then(|| total.estimated_dollars / n as f64),
        avg_seconds: (n > 0).then(|| total.wall_seconds / n as f64),
        total,
    }
}
