//! Secret-leak detection for source repositories.
//!
//! A broad screener proposes candidates; each candidate is then verified in
//! up to three levels (the key itself, its surrounding file, and how the
//! project references that file) by check agents that a commander loop
//! dispatches over a per-candidate memory pool. Semantic judgments go
//! through a pluggable [`backend::AnalysisBackend`]; the deterministic
//! backend makes every run reproducible offline.

pub mod advanced_check;
pub mod backend;
pub mod basic_check;
pub mod bench;
pub mod config;
pub mod error;
pub mod orchestrator;
pub mod pipeline;
pub mod rules;
pub mod screener;
pub mod types;
pub mod uri;

pub use config::ScanConfig;
pub use error::{Error, Result};
pub use types::{CandidateSecret, Classification, Confidence, SecretType, Verdict};
