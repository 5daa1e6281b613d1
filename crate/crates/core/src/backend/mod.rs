//! Semantic-analysis backends. Every check agent and the commander talk to a
//! backend through [`AnalysisBackend::complete`]: a rendered prompt goes in,
//! reply text with token usage comes out. The reply carries one JSON object
//! (usually in a fenced block) that callers extract with [`parse_reply`].

mod cost;
mod deterministic;
mod http;
mod reply;

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cost::{estimate_cost, CostReport, PriceTable, UnitPrices};
pub use deterministic::DeterministicBackend;
pub use http::HttpBackend;
pub use reply::{evidence_block, extract_evidence, json_reply, parse_reply};

use crate::config::BackendConfig;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("request timed out")]
    Timeout,
    #[error("HTTP status {status}")]
    Status { status: u16, body: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("response body is not a valid completion: {0}")]
    InvalidBody(String),
    #[error("gave up after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: Box<BackendError> },
    #[error("backend configuration: {0}")]
    Config(String),
}

/// A rendered prompt. `sensitive` lists raw secret values that must never be
/// written to logs.
#[derive(Debug, Clone, Default)]
pub struct Prompt {
    pub system: Option<String>,
    pub text: String,
    pub sensitive: Vec<String>,
}

impl Prompt {
    pub fn new(text: impl Into<String>) -> Self {
        Prompt {
            system: None,
            text: text.into(),
            sensitive: Vec::new(),
        }
    }

    pub fn with_sensitive(mut self, values: impl IntoIterator<Item = String>) -> Self {
        self.sensitive.extend(values.into_iter().filter(|v| !v.is_empty()));
        self
    }

    /// Prompt text with every sensitive value replaced by its digest.
    pub fn redacted(&self) -> String {
        redact_all(&self.text, &self.sensitive)
    }
}

pub(crate) fn redact_all(text: &str, sensitive: &[String]) -> String {
    let mut out = text.to_string();
    let mut values: Vec<&String> = sensitive.iter().collect();
    // Longer values first so a value containing another is replaced whole.
    values.sort_by_key(|v| std::cmp::Reverse(v.len()));
    for v in values {
        if !v.is_empty() {
            out = out.replace(v.as_str(), &crate::types::redact(v));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

/// Request and token counters. Every field only ever increases.
#[derive(Debug, Default)]
pub struct CostMeter {
    requests: AtomicU64,
    prompt_tokens: AtomicU64,
    completion_tokens: AtomicU64,
    wall_nanos: AtomicU64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MeterSnapshot {
    pub requests: u64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub wall_nanos: u64,
}

impl MeterSnapshot {
    pub fn wall_seconds(&self) -> f64 {
        self.wall_nanos as f64 / 1e9
    }
}

impl CostMeter {
    pub fn record_request(&self) {
        self.requests.fetch_add(1, Ordering::Relaxed);
    }

    pub fn record_tokens(&self, prompt: u64, completion: u64) {
        self.prompt_tokens.fetch_add(prompt, Ordering::Relaxed);
        self.completion_tokens.fetch_add(completion, Ordering::Relaxed);
    }

    pub fn record_wall(&self, elapsed: Duration) {
        let nanos = u64::try_from(elapsed.as_nanos()).unwrap_or(u64::MAX);
        self.wall_nanos.fetch_add(nanos, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> MeterSnapshot {
        MeterSnapshot {
            requests: self.requests.load(Ordering::Relaxed),
            prompt_tokens: self.prompt_tokens.load(Ordering::Relaxed),
            completion_tokens: self.completion_tokens.load(Ordering::Relaxed),
            wall_nanos: self.wall_nanos.load(Ordering::Relaxed),
        }
    }
}

/// Capability contract shared by all backends. `complete` must not touch the
/// repository or any memory pool; implementations are shared across
/// concurrent verification sessions.
pub trait AnalysisBackend: Send + Sync {
    fn name(&self) -> &str;

    /// Model identifier used to look up prices.
    fn model(&self) -> &str;

    fn complete(&self, prompt: &Prompt) -> Result<Completion, BackendError>;

    fn meter(&self) -> &CostMeter;
}

/// Build the backend named by `config`.
pub fn from_config(config: &BackendConfig) -> Result<Box<dyn AnalysisBackend>, BackendError> {
    match config {
        BackendConfig::Deterministic => Ok(Box::new(DeterministicBackend::new())),
        BackendConfig::Http(http) => Ok(Box::new(HttpBackend::new(http.clone())?)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn redaction_replaces_longest_first() {
        let p = Prompt::new("a=SECRETXYZ b=SECRET").with_sensitive(["SECRET".into(), "SECRETXYZ".into()]);
        let red = p.redacted();
        assert!(!red.contains("SECRET"), "{red}");
        assert!(red.contains(&crate::types::redact("SECRETXYZ")));
    }

    #[test]
    fn meter_accumulates() {
        let m = CostMeter::default();
        m.record_request();
        m.record_tokens(10, 5);
        m.record_request();
        m.record_tokens(1, 1);
        let s = m.snapshot();
        assert_eq!((s.requests, s.prompt_tokens, s.completion_tokens), (2, 11, 6));
    }
}
