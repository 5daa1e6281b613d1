//! Three-tier shared memory pool for one verification session.
//!
//! - tier 1: facts about the candidate and its repository;
//! - tier 2: raw tool transcripts, append-only;
//! - tier 3: refined conclusions synthesized from tier 2, append-only.

use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::advanced_check::AdvancedReport;
use crate::basic_check::BasicReport;
use crate::error::{Error, Result};
use crate::types::{to_hex, CandidateSecret, Level};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Agent {
    Basic,
    Advanced,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tool {
    KeyFormat,
    Placeholder,
    Readability,
    ContextCheck,
    ReferenceCheck,
}

impl Tool {
    pub fn level(self) -> Level {
        match self {
            Tool::KeyFormat | Tool::Placeholder | Tool::Readability => Level::Intrinsic,
            Tool::ContextCheck => Level::Context,
            Tool::ReferenceCheck => Level::Reference,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepoFacts {
    /// Final component of the scanned root.
    pub name: String,
    pub files_indexed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Facts {
    pub candidate: CandidateSecret,
    pub repository: RepoFacts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub tool: Tool,
    pub agent: Agent,
    pub iteration: usize,
    pub input_digest: String,
    pub output: Value,
    /// Milliseconds since the Unix epoch; zero after normalization.
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConclusionBody {
    Basic(BasicReport),
    Advanced(AdvancedReport),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conclusion {
    pub agent: Agent,
    pub iteration: usize,
    /// Tools whose tier-2 transcripts this conclusion summarizes.
    pub tools: Vec<Tool>,
    pub body: ConclusionBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryPool {
    pub tier1: Facts,
    pub tier2: Vec<Transcript>,
    pub tier3: Vec<Conclusion>,
}

pub fn digest_input(input: &str) -> String {
    to_hex(&Sha256::digest(input.as_bytes())[..8])
}

fn now_millis() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

impl MemoryPool {
    pub fn new(facts: Facts) -> Self {
        MemoryPool {
            tier1: facts,
            tier2: Vec::new(),
            tier3: Vec::new(),
        }
    }

    pub fn candidate(&self) -> &CandidateSecret {
        &self.tier1.candidate
    }

    /// Entries in tiers 2 and 3 combined.
    pub fn size(&self) -> usize {
        self.tier2.len() + self.tier3.len()
    }

    pub fn record_transcript(
        &mut self,
        tool: Tool,
        agent: Agent,
        iteration: usize,
        input: &str,
        output: Value,
    ) {
        self.tier2.push(Transcript {
            tool,
            agent,
            iteration,
            input_digest: digest_input(input),
            output,
            timestamp: now_millis(),
        });
    }

    /// Append a conclusion. Every tool it cites must already have a
    /// transcript in tier 2.
    pub fn append_conclusion(&mut self, conclusion: Conclusion) -> Result<()> {
        if let Some(missing) = conclusion
            .tools
            .iter()
            .find(|t| !self.tier2.iter().any(|tr| tr.tool == **t))
        {
            return Err(Error::Pool(format!(
                "conclusion cites {missing:?} without a tier-2 transcript"
            )));
        }
        self.tier3.push(conclusion);
        Ok(())
    }

    pub fn latest_basic(&self) -> Option<&BasicReport> {
        self.tier3.iter().rev().find_map(|c| match &c.body {
            ConclusionBody::Basic(b) => Some(b),
            _ => None,
        })
    }

    pub fn latest_advanced(&self) -> Option<&AdvancedReport> {
        self.tier3.iter().rev().find_map(|c| match &c.body {
            ConclusionBody::Advanced(a) => Some(a),
            _ => None,
        })
    }

    pub fn levels_used(&self) -> std::collections::BTreeSet<Level> {
        self.tier2.iter().map(|t| t.tool.level()).collect()
    }

    /// `self` extends `earlier`: same facts, and each tier has `earlier`'s
    /// entries as a prefix.
    pub fn extends(&self, earlier: &MemoryPool) -> bool {
        self.tier1 == earlier.tier1
            && self.tier2.len() >= earlier.tier2.len()
            && self.tier3.len() >= earlier.tier3.len()
            && self.tier2[..earlier.tier2.len()] == earlier.tier2[..]
            && self.tier3[..earlier.tier3.len()] == earlier.tier3[..]
    }

    /// Zero all transcript timestamps, for byte-stable output.
    pub fn normalize_timestamps(&mut self) {
        for t in &mut self.tier2 {
            t.timestamp = 0;
        }
    }
}
