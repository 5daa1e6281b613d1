//! Initial screening: walk a working tree and emit candidate secrets using
//! broad per-type rules plus an entropy gate on token bodies.

mod context;
mod ingest;
mod walk;

use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;

pub use context::{extract_context, line_number, WindowConfig};
pub use ingest::{default_aliases, ingest_external_findings, IngestOutcome, UnlocatedFinding};
pub use walk::{is_binary, list_files, relative_path, FileListing, RepoFile, BINARY_SNIFF_BYTES};

use crate::config::ScanConfig;
use crate::error::Result;
use crate::rules::{DetectorRule, RuleSet};
use crate::types::{candidate_id, classify_file_kind, ByteSpan, CandidateSecret, SourceLocation};

/// Shannon entropy in bits per character over the character frequency
/// distribution. Zero for the empty string.
pub fn shannon_entropy(s: &str) -> f64 {
    let mut counts: HashMap<char, usize> = HashMap::new();
    let mut total = 0usize;
    for c in s.chars() {
        *counts.entry(c).or_insert(0) += 1;
        total += 1;
    }
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    let mut freqs: Vec<usize> = counts.into_values().collect();
    // Fixed summation order keeps the result independent of hash order.
    freqs.sort_unstable();
    let h: f64 = freqs
        .into_iter()
        .map(|count| {
            let p = count as f64 / n;
            -p * p.log2()
        })
        .sum();
    h.max(0.0)
}

#[derive(Debug, Default)]
pub struct ScanOutcome {
    pub candidates: Vec<CandidateSecret>,
    pub warnings: Vec<String>,
    pub files_scanned: usize,
}

/// Broad rules with config toggles and entropy overrides applied.
#[derive(Debug, Clone)]
pub struct Screener {
    rules: RuleSet,
    window: WindowConfig,
    max_file_bytes: u64,
}

impl Screener {
    pub fn new(config: &ScanConfig) -> Self {
        Self::with_rules(RuleSet::broad_default(), config)
    }

    pub fn with_rules(mut rules: RuleSet, config: &ScanConfig) -> Self {
        rules.retain(|r| config.rules.get(&r.name).copied().unwrap_or(true));
        for rule in rules.rules_mut() {
            let by_name = config.min_entropy.get(&rule.name);
            let by_type = config.min_entropy.get(rule.secret_type.as_str());
            if let Some(v) = by_name.or(by_type) {
                rule.min_entropy_bits = Some(*v);
            }
        }
        Screener {
            rules,
            window: WindowConfig {
                lines: config.window_lines,
                max_bytes: config.max_context_bytes,
            },
            max_file_bytes: config.max_file_bytes,
        }
    }

    pub fn rules(&self) -> &RuleSet {
        &self.rules
    }

    pub fn window(&self) -> WindowConfig {
        self.window
    }

    /// Scan every text file under `root`. Output is sorted by
    /// `(file_path, byte_span.start)` and independent of worker count.
    pub fn scan_repository(&self, root: &Path) -> Result<ScanOutcome> {
        let listing = list_files(root, self.max_file_bytes)?;
        let mut warnings = listing.warnings;
        let per_file: Vec<(Vec<CandidateSecret>, Option<String>, bool)> = listing
            .files
            .par_iter()
            .map(|file| match std::fs::read(&file.abs_path) {
                Ok(bytes) if is_binary(&bytes) => (Vec::new(), None, false),
                Ok(bytes) => (self.scan_bytes(&file.rel_path, &bytes), None, true),
                Err(e) => (Vec::new(), Some(format!("{}: {e}", file.rel_path)), false),
            })
            .collect();
        let mut candidates = Vec::new();
        let mut files_scanned = 0;
        for (found, warning, scanned) in per_file {
            candidates.extend(found);
            warnings.extend(warning);
            files_scanned += usize::from(scanned);
        }
        sort_candidates(&mut candidates);
        Ok(ScanOutcome {
            candidates,
            warnings,
            files_scanned,
        })
    }

    /// Scan one file's contents.
    pub fn scan_bytes(&self, rel_path: &str, bytes: &[u8]) -> Vec<CandidateSecret> {
        struct Hit<'r> {
            span: ByteSpan,
            body: ByteSpan,
            rule_idx: usize,
            rule: &'r DetectorRule,
        }

        let mut hits = Vec::new();
        for (rule_idx, rule) in self.rules.rules().iter().enumerate() {
            let re = rule.bytes_regex();
            for caps in re.captures_iter(bytes) {
                let m = caps.get(0).expect("group 0");
                if m.is_empty() || std::str::from_utf8(m.as_bytes()).is_err() {
                    continue;
                }
                let body = caps.name("body").unwrap_or(m);
                hits.push(Hit {
                    span: ByteSpan::new(m.start(), m.end()),
                    body: ByteSpan::new(body.start(), body.end()),
                    rule_idx,
                    rule,
                });
            }
        }
        // Earliest start wins, then the longer match, then rule-file order.
        hits.sort_by(|a, b| {
            a.span
                .start
                .cmp(&b.span.start)
                .then(b.span.len().cmp(&a.span.len()))
                .then(a.rule_idx.cmp(&b.rule_idx))
        });
        let mut kept: Vec<Hit> = Vec::new();
        for hit in hits {
            if kept.last().is_some_and(|k| k.span.overlaps(&hit.span)) {
                continue;
            }
            kept.push(hit);
        }

        let file_kind = classify_file_kind(rel_path);
        kept.into_iter()
            .filter_map(|hit| {
                let raw = std::str::from_utf8(&bytes[hit.span.start..hit.span.end]).ok()?;
                if let Some(min) = hit.rule.min_entropy_bits {
                    let body = String::from_utf8_lossy(&bytes[hit.body.start..hit.body.end]);
                    if shannon_entropy(&body) < min {
                        return None;
                    }
                }
                Some(CandidateSecret {
                    id: candidate_id(rel_path, hit.span, hit.rule.secret_type),
                    secret_type: hit.rule.secret_type,
                    raw_value: raw.to_string(),
                    location: SourceLocation {
                        file_path: rel_path.to_string(),
                        line: line_number(bytes, hit.span.start),
                        byte_span: hit.span,
                    },
                    context: extract_context(bytes, hit.span, self.window, file_kind),
                    entropy_bits: shannon_entropy(raw),
                    detector_rule: hit.rule.name.clone(),
                })
            })
            .collect()
    }
}

pub fn sort_candidates(candidates: &mut [CandidateSecret]) {
    candidates.sort_by(|a, b| {
        a.location
            .file_path
            .cmp(&b.location.file_path)
            .then(a.location.byte_span.start.cmp(&b.location.byte_span.start))
            .then(a.secret_type.cmp(&b.secret_type))
    });
}

/// Screen `root` with the rules and limits in `config`.
pub fn scan_repository(root: &Path, config: &ScanConfig) -> Result<ScanOutcome> {
    Screener::new(config).scan_repository(root)
}
