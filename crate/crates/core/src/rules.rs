//! Rule files: broad screening rules and strict format validators share one
//! line-oriented grammar.
//!
//! ```text
//! # comment
//! <name> <secret_type> <min_entropy_bits or -> <regex to end of line>
//! ```

use std::collections::HashSet;

use regex::Regex;

use crate::error::{Error, Result};
use crate::types::SecretType;

pub const BROAD_RULES: &str = include_str!("../data/rules/broad.rules");
pub const STRICT_RULES: &str = include_str!("../data/rules/strict.rules");

#[derive(Debug, Clone)]
pub struct DetectorRule {
    pub name: String,
    pub secret_type: SecretType,
    pub broad_pattern: String,
    pub min_entropy_bits: Option<f64>,
    regex: Regex,
    bytes_regex: regex::bytes::Regex,
}

impl DetectorRule {
    pub fn new(
        name: impl Into<String>,
        secret_type: SecretType,
        pattern: &str,
        min_entropy_bits: Option<f64>,
    ) -> Result<Self, regex::Error> {
        Ok(DetectorRule {
            name: name.into(),
            secret_type,
            broad_pattern: pattern.to_string(),
            min_entropy_bits,
            regex: Regex::new(pattern)?,
            bytes_regex: regex::bytes::Regex::new(pattern)?,
        })
    }

    pub fn regex(&self) -> &Regex {
        &self.regex
    }

    /// The same pattern compiled for scanning raw file bytes.
    pub fn bytes_regex(&self) -> &regex::bytes::Regex {
        &self.bytes_regex
    }
}

/// An ordered, validated collection of rules. Names are unique.
#[derive(Debug, Clone)]
pub struct RuleSet {
    rules: Vec<DetectorRule>,
    version: Option<String>,
}

impl RuleSet {
    pub fn parse(text: &str) -> Result<Self> {
        let mut rules = Vec::new();
        let mut seen = HashSet::new();
        let mut version = None;
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw_line.trim();
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(v) = comment.trim().strip_prefix("version:") {
                    version = Some(v.trim().to_string());
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::RuleFile {
                line: line_no,
                message,
            };
            let mut rest = line;
            let mut fields = [""; 3];
            for field in fields.iter_mut() {
                let (head, tail) = rest
                    .split_once(char::is_whitespace)
                    .ok_or_else(|| err("expected `name type entropy pattern`".into()))?;
                *field = head;
                rest = tail.trim_start();
            }
            let [name, ty, entropy] = fields;
            let secret_type: SecretType = ty.parse().map_err(|e| err(format!("{e}")))?;
            let min_entropy_bits = match entropy {
                "-" => None,
                v => Some(
                    v.parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite() && *x >= 0.0)
                        .ok_or_else(|| err(format!("bad entropy threshold `{v}`")))?,
                ),
            };
            if rest.is_empty() {
                return Err(err("missing pattern".into()));
            }
            if !seen.insert(name.to_string()) {
                return Err(err(format!("duplicate rule name `{name}`")));
            }
            let rule = DetectorRule::new(name, secret_type, rest, min_entropy_bits)
                .map_err(|e| err(format!("pattern does not compile: {e}")))?;
            rules.push(rule);
        }
        Ok(RuleSet { rules, version })
    }

    pub fn broad_default() -> Self {
        Self::parse(BROAD_RULES).expect("shipped broad rules are valid")
    }

    pub fn strict_default() -> Self {
        Self::parse(STRICT_RULES).expect("shipped strict rules are valid")
    }

    pub fn rules(&self) -> &[DetectorRule] {
        &self.rules
    }

    pub fn version(&self) -> Option<&str> {
        self.version.as_deref()
    }

    pub fn for_type(&self, t: SecretType) -> impl Iterator<Item = &DetectorRule> {
        self.rules.iter().filter(move |r| r.secret_type == t)
    }

    /// Types without any rule.
    pub fn uncovered_types(&self) -> Vec<SecretType> {
        SecretType::ALL
            .into_iter()
            .filter(|t| self.for_type(*t).next().is_none())
            .collect()
    }

    /// Keep only rules for which `keep` returns true.
    pub fn retain(&mut self, mut keep: impl FnMut(&DetectorRule) -> bool) {
        self.rules.retain(|r| keep(r));
    }

    pub fn rules_mut(&mut self) -> &mut [DetectorRule] {
        &mut self.rules
    }
}
