//! Evaluation against labeled manifests: matching, metrics, reports, and
//! cost replay.

mod metrics;
mod replay;
mod report;

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use metrics::{Confusion, EvalMetrics, GroupMetrics};
pub use replay::{load_token_log, replay_token_log, ReplayReport, TokenLogEntry};
pub use report::{render_report, BenchReport, BenchRow, CostSummary, ReportFormat, SkipNotice, REPORT_SCHEMA_VERSION};

use crate::error::{Error, Result};
use crate::types::{Classification, SecretType};

pub const UNGROUPED: &str = "unspecified";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    TrueLeak,
    FalsePositive,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub repo_path: String,
    pub file: String,
    pub secret_type: SecretType,
    pub label: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub language_group: Option<String>,
    /// Optional 1-based line, used by span-level matching.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LabeledManifest {
    pub entries: Vec<ManifestEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    repo_path: String,
    file: String,
    secret_type: String,
    label: Label,
    #[serde(default)]
    language_group: Option<String>,
    #[serde(default)]
    line: Option<usize>,
}

type EntryKey = (String, String, SecretType, Option<usize>);

fn entry_key(e: &ManifestEntry) -> EntryKey {
    (e.repo_path.clone(), e.file.clone(), e.secret_type, e.line)
}

impl LabeledManifest {
    /// Parse line-delimited JSON. Blank lines are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        let mut seen: HashMap<EntryKey, usize> = HashMap::new();
        let mut duplicates = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let lineno = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let raw: RawEntry = serde_json::from_str(line)
                .map_err(|e| Error::Manifest(format!("line {lineno}: {e}")))?;
            let secret_type: SecretType = raw
                .secret_type
                .parse()
                .map_err(|e| Error::Manifest(format!("line {lineno}: {e}")))?;
            if raw.repo_path.is_empty() || raw.file.is_empty() {
                return Err(Error::Manifest(format!("line {lineno}: repo_path and file must be non-empty")));
            }
            let entry = ManifestEntry {
                repo_path: raw.repo_path,
                file: raw.file,
                secret_type,
                label: raw.label,
                language_group: raw.language_group,
                line: raw.line,
            };
            if let Some(first) = seen.insert(entry_key(&entry), lineno) {
                duplicates.push(format!(
                    "({}, {}, {}) on lines {first} and {lineno}",
                    entry.repo_path, entry.file, entry.secret_type
                ));
            }
            entries.push(entry);
        }
        if !duplicates.is_empty() {
            return Err(Error::Manifest(format!("duplicate entries: {}", duplicates.join("; "))));
        }
        Ok(LabeledManifest { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Distinct repositories, in first-appearance order.
    pub fn repos(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for e in &self.entries {
            if !out.contains(&e.repo_path.as_str()) {
                out.push(&e.repo_path);
            }
        }
        out
    }
}

pub fn load_manifest(path: &Path) -> Result<LabeledManifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    LabeledManifest::parse(&text)
}

/// One verdict reduced to what scoring needs.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ScoredFinding {
    pub repo: String,
    pub file: String,
    pub secret_type: SecretType,
    pub line: usize,
    pub classification: Classification,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UndeterminedPolicy {
    /// Undetermined on a true leak is a miss; on a false positive, a false
    /// alarm.
    #[default]
    CountAgainst,
    /// Undetermined entries are left out of the matrix and counted apart.
    Exclude,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ScoreOptions {
    pub policy: UndeterminedPolicy,
    /// Also match on line when the manifest entry gives one.
    pub span_level: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreResult {
    pub metrics: EvalMetrics,
    /// Findings with no manifest entry; not part of the matrix.
    pub extra_findings: Vec<ScoredFinding>,
}

/// Several findings on one entry collapse to the strongest claim: any true
/// leak, else any undetermined, else false positive.
fn combine(a: Classification, b: Classification) -> Classification {
    use Classification::*;
    match (a, b) {
        (TrueLeak, _) | (_, TrueLeak) => TrueLeak,
        (Undetermined, _) | (_, Undetermined) => Undetermined,
        _ => FalsePositive,
    }
}

/// Cell for one entry; `None` when excluded. Entries without any finding
/// were not flagged, which is a negative prediction.
pub fn cell(pred: Option<Classification>, label: Label, policy: UndeterminedPolicy) -> Option<Confusion> {
    use Classification::*;
    let positive = match (pred, policy) {
        (Some(TrueLeak), _) => true,
        (Some(FalsePositive) | None, _) => false,
        (Some(Undetermined), UndeterminedPolicy::Exclude) => return None,
        // Counted against the tool: the opposite of the label.
        (Some(Undetermined), UndeterminedPolicy::CountAgainst) => label == Label::FalsePositive,
    };
    let mut c = Confusion::default();
    match (positive, label) {
        (true, Label::TrueLeak) => c.tp = 1,
        (true, Label::FalsePositive) => c.fp = 1,
        (false, Label::TrueLeak) => c.fn_ = 1,
        (false, Label::FalsePositive) => c.tn = 1,
    }
    Some(c)
}

/// Join findings with the manifest on (repo, file, secret type) and score.
pub fn match_and_score(findings: &[ScoredFinding], manifest: &LabeledManifest, opts: ScoreOptions) -> ScoreResult {
    let mut preds: Vec<Option<Classification>> = vec![None; manifest.entries.len()];
    let mut by_key: HashMap<(&str, &str, SecretType), Vec<usize>> = HashMap::new();
    for (i, e) in manifest.entries.iter().enumerate() {
        by_key
            .entry((e.repo_path.as_str(), e.file.as_str(), e.secret_type))
            .or_default()
            .push(i);
    }
    let mut extra = Vec::new();
    for f in findings {
        let candidates = by_key
            .get(&(f.repo.as_str(), f.file.as_str(), f.secret_type))
            .map(Vec::as_slice)
            .unwrap_or(&[]);
        let hit: Vec<usize> = candidates
            .iter()
            .copied()
            .filter(|&i| !opts.span_level || manifest.entries[i].line.is_none_or(|l| l == f.line))
            .collect();
        if hit.is_empty() {
            extra.push(f.clone());
        }
        for i in hit {
            preds[i] = Some(preds[i].map_or(f.classification, |p| combine(p, f.classification)));
        }
    }

    let mut overall = Confusion::default();
    let mut excluded = 0;
    let mut groups: BTreeMap<String, BTreeMap<String, Confusion>> = BTreeMap::new();
    for (e, pred) in manifest.entries.iter().zip(preds) {
        let Some(c) = cell(pred, e.label, opts.policy) else {
            excluded += 1;
            continue;
        };
        overall.add(&c);
        for (dim, key) in [
            ("secret_type", e.secret_type.as_str().to_string()),
            (
                "language_group",
                e.language_group.clone().unwrap_or_else(|| UNGROUPED.to_string()),
            ),
        ] {
            groups
                .entry(dim.to_string())
                .or_default()
                .entry(key)
                .or_default()
                .add(&c);
        }
    }
    extra.sort();
    ScoreResult {
        metrics: EvalMetrics::from_groups(overall, excluded, groups),
        extra_findings: extra,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(repo: &str, file: &str, t: SecretType, label: Label) -> ManifestEntry {
        ManifestEntry {
            repo_path: repo.into(),
            file: file.into(),
            secret_type: t,
            label,
            language_group: None,
            line: None,
        }
    }

    fn finding(repo: &str, file: &str, t: SecretType, c: Classification) -> ScoredFinding {
        ScoredFinding {
            repo: repo.into(),
            file: file.into(),
            secret_type: t,
            line: 1,
            classification: c,
        }
    }

    #[test]
    fn manifest_parsing() {
        let ok = "{\"repo_path\":\"r\",\"file\":\"a\",\"secret_type\":\"AWS\",\"label\":\"true_leak\"}\n\
                  {\"repo_path\":\"r\",\"file\":\"b\",\"secret_type\":\"aws\",\"label\":\"false_positive\",\"language_group\":\"Python\"}\n";
        assert_eq!(LabeledManifest::parse(ok).unwrap().len(), 2);

        let dup = format!("{}\n{}", ok.lines().next().unwrap(), ok.lines().next().unwrap());
        let err = LabeledManifest::parse(&dup).unwrap_err().to_string();
        assert!(err.contains("lines 1 and 2"), "{err}");

        let unknown = "{\"repo_path\":\"r\",\"file\":\"a\",\"secret_type\":\"FooCloud\",\"label\":\"true_leak\"}";
        let err = LabeledManifest::parse(unknown).unwrap_err().to_string();
        assert!(err.contains("FooCloud") && err.contains("line 1"), "{err}");

        let err = LabeledManifest::parse("\n{\"repo_path\":\"r\"}").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn perfect_toy_set() {
        let mut entries = Vec::new();
        let mut findings = Vec::new();
        for i in 0..10 {
            let (label, class) = if i % 2 == 0 {
                (Label::TrueLeak, Classification::TrueLeak)
            } else {
                (Label::FalsePositive, Classification::FalsePositive)
            };
            let file = format!("f{i}");
            entries.push(entry("r", &file, SecretType::AWS, label));
            findings.push(finding("r", &file, SecretType::AWS, class));
        }
        let m = match_and_score(&findings, &LabeledManifest { entries }, ScoreOptions::default()).metrics;
        for v in [m.overall.accuracy, m.overall.precision, m.overall.recall, m.overall.f1] {
            assert_eq!(v, Some(1.0));
        }
    }

    #[test]
    fn undetermined_policies_and_extras() {
        let manifest = LabeledManifest {
            entries: vec![
                entry("r", "a", SecretType::AWS, Label::TrueLeak),
                entry("r", "b", SecretType::AWS, Label::FalsePositive),
            ],
        };
        let findings = vec![
            finding("r", "a", SecretType::AWS, Classification::Undetermined),
            finding("r", "b", SecretType::AWS, Classification::Undetermined),
            finding("r", "c", SecretType::AWS, Classification::TrueLeak),
        ];
        let r = match_and_score(&findings, &manifest, ScoreOptions::default());
        assert_eq!(r.metrics.counts(), Confusion::new(0, 1, 1, 0));
        assert_eq!(r.extra_findings.len(), 1);
        let r = match_and_score(
            &findings,
            &manifest,
            ScoreOptions {
                policy: UndeterminedPolicy::Exclude,
                span_level: false,
            },
        );
        assert_eq!(r.metrics.counts(), Confusion::default());
        assert_eq!(r.metrics.excluded, 2);
    }

    #[test]
    fn span_level_matching() {
        let mut e = entry("r", "a", SecretType::AWS, Label::TrueLeak);
        e.line = Some(7);
        let manifest = LabeledManifest { entries: vec![e] };
        let f = finding("r", "a", SecretType::AWS, Classification::TrueLeak);
        let file_level = match_and_score(std::slice::from_ref(&f), &manifest, ScoreOptions::default());
        assert_eq!(file_level.metrics.counts().tp, 1);
        let span = match_and_score(
            &[f],
            &manifest,
            ScoreOptions {
                span_level: true,
                ..Default::default()
            },
        );
        assert_eq!(span.metrics.counts().fn_, 1);
        assert_eq!(span.extra_findings.len(), 1);
    }
}
