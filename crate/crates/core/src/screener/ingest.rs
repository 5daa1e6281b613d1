//! Ingestion of findings produced by an external scanner.
//!
//! Input is line-delimited JSON, one record per line:
//! `{"file": "src/a.py", "line": 3, "raw": "AKIA...", "detector_name": "AWS"}`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::context::{extract_context, WindowConfig};
use super::shannon_entropy;
use crate::error::{Error, Result};
use crate::types::{
    candidate_id, classify_file_kind, ByteSpan, CandidateSecret, SecretType, SourceLocation,
};

#[derive(Debug, Deserialize)]
struct ExternalRecord {
    file: String,
    line: usize,
    raw: String,
    detector_name: String,
}

/// A finding whose value could not be tied to bytes in the working tree.
#[derive(Debug, Clone, PartialEq)]
pub struct UnlocatedFinding {
    pub id: String,
    pub file_path: String,
    pub line: usize,
    pub secret_type: SecretType,
    pub raw_value: String,
    pub reason: String,
}

#[derive(Debug, Default)]
pub struct IngestOutcome {
    pub candidates: Vec<CandidateSecret>,
    pub unlocated: Vec<UnlocatedFinding>,
    pub warnings: Vec<String>,
    /// Records whose detector name had no alias.
    pub unmapped: usize,
    pub malformed: usize,
}

impl IngestOutcome {
    pub fn warning_count(&self) -> usize {
        self.warnings.len()
    }
}

/// Built-in detector aliases (lowercased keys), covering the canonical type
/// names and common external detector spellings.
pub fn default_aliases() -> BTreeMap<String, SecretType> {
    let mut map: BTreeMap<String, SecretType> = SecretType::ALL
        .into_iter()
        .map(|t| (t.as_str().to_ascii_lowercase(), t))
        .collect();
    for (name, t) in [
        ("huggingface", SecretType::Huggingface),
        ("postgres", SecretType::PostgreSQL),
        ("github_token", SecretType::GitHub),
        ("githuboauth2", SecretType::GitHub),
        ("aws_access_key", SecretType::AWS),
        ("rsaprivatekey", SecretType::PrivateKey),
        ("private_key", SecretType::PrivateKey),
        ("mongo", SecretType::MongoDB),
    ] {
        map.insert(name.to_string(), t);
    }
    map
}

fn resolve_aliases(extra: &BTreeMap<String, String>) -> Result<BTreeMap<String, SecretType>> {
    let mut map = default_aliases();
    for (name, target) in extra {
        let t: SecretType = target
            .parse()
            .map_err(|e| Error::Config(format!("alias `{name}`: {e}")))?;
        map.insert(name.to_ascii_lowercase(), t);
    }
    Ok(map)
}

fn locate(bytes: &[u8], line: usize, raw: &[u8]) -> Option<ByteSpan> {
    if raw.is_empty() {
        return None;
    }
    let find_from = |from: usize| -> Option<usize> {
        bytes[from..]
            .windows(raw.len())
            .position(|w| w == raw)
            .map(|i| from + i)
    };
    if line >= 1 {
        let mut start = 0usize;
        let mut current = 1usize;
        while current < line {
            match bytes[start..].iter().position(|&b| b == b'\n') {
                Some(i) => {
                    start += i + 1;
                    current += 1;
                }
                None => break,
            }
        }
        if current == line {
            let end = bytes[start..]
                .iter()
                .position(|&b| b == b'\n')
                .map_or(bytes.len(), |i| start + i);
            if let Some(pos) = find_from(start).filter(|&p| p <= end) {
                return Some(ByteSpan::new(pos, pos + raw.len()));
            }
        }
    }
    find_from(0).map(|p| ByteSpan::new(p, p + raw.len()))
}

/// Map external findings onto candidates, recomputing each span from the
/// record's line and the first occurrence of the raw value on it (falling
/// back to the first occurrence in the file).
pub fn ingest_external_findings(
    path: &Path,
    root: &Path,
    aliases: &BTreeMap<String, String>,
    window: WindowConfig,
) -> Result<IngestOutcome> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let aliases = resolve_aliases(aliases)?;
    let mut out = IngestOutcome::default();
    let mut records = 0usize;
    let mut file_cache: BTreeMap<String, std::result::Result<Vec<u8>, String>> = BTreeMap::new();

    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        records += 1;
        let record: ExternalRecord = match serde_json::from_str(line) {
            Ok(r) => r,
            Err(e) => {
                out.malformed += 1;
                out.warnings.push(format!("line {}: malformed record: {e}", idx + 1));
                continue;
            }
        };
        let Some(&secret_type) = aliases.get(&record.detector_name.to_ascii_lowercase()) else {
            out.unmapped += 1;
            out.warnings.push(format!(
                "line {}: no alias for detector `{}`",
                idx + 1,
                record.detector_name
            ));
            continue;
        };
        let rel = normalize_rel(&record.file);
        let shown = rel.clone().unwrap_or_else(|raw| raw);
        let unlocated = |reason: String| UnlocatedFinding {
            id: candidate_id(&shown, ByteSpan::new(record.line, record.line), secret_type),
            file_path: shown.clone(),
            line: record.line,
            secret_type,
            raw_value: record.raw.clone(),
            reason,
        };
        let Ok(rel_ok) = rel.as_deref() else {
            out.warnings.push(format!("line {}: path escapes repository root", idx + 1));
            out.unlocated.push(unlocated("path escapes repository root".into()));
            continue;
        };
        let bytes = file_cache
            .entry(rel_ok.to_string())
            .or_insert_with(|| std::fs::read(root.join(rel_ok)).map_err(|e| e.to_string()));
        let bytes = match bytes {
            Ok(b) => b,
            Err(e) => {
                out.warnings.push(format!("{rel_ok}: {e}"));
                out.unlocated.push(unlocated(format!("file unreadable: {e}")));
                continue;
            }
        };
        let Some(span) = locate(bytes, record.line, record.raw.as_bytes()) else {
            out.warnings
                .push(format!("{rel_ok}: raw value from line {} not found", record.line));
            out.unlocated.push(unlocated("raw value not found in file".into()));
            continue;
        };
        let file_kind = classify_file_kind(rel_ok);
        out.candidates.push(CandidateSecret {
            id: candidate_id(rel_ok, span, secret_type),
            secret_type,
            raw_value: record.raw.clone(),
            location: SourceLocation {
                file_path: rel_ok.to_string(),
                line: super::line_number(bytes, span.start),
                byte_span: span,
            },
            context: extract_context(bytes, span, window, file_kind),
            entropy_bits: shannon_entropy(&record.raw),
            detector_rule: format!("external:{}", record.detector_name),
        });
    }

    if records > 0 && out.malformed == records {
        return Err(Error::Ingest {
            path: PathBuf::from(path),
            message: format!("all {records} records are malformed"),
        });
    }
    super::sort_candidates(&mut out.candidates);
    out.candidates.dedup_by(|a, b| a.id == b.id);
    Ok(out)
}

/// Repository-relative path, or `Err` with the original text when it would
/// leave the root.
fn normalize_rel(file: &str) -> std::result::Result<String, String> {
    let mut parts: Vec<&str> = Vec::new();
    for part in file.split(['/', '\\']) {
        match part {
            "" | "." => {}
            ".." => {
                if parts.pop().is_none() {
                    return Err(file.to_string());
                }
            }
            p => parts.push(p),
        }
    }
    if parts.is_empty() {
        return Err(file.to_string());
    }
    Ok(parts.join("/"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(files: &[(&str, &str)], findings: &str) -> (tempfile::TempDir, PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        for (name, body) in files {
            let p = dir.path().join(name);
            std::fs::create_dir_all(p.parent().unwrap()).unwrap();
            std::fs::write(p, body).unwrap();
        }
        let f = dir.path().join("findings.jsonl");
        std::fs::write(&f, findings).unwrap();
        (dir, f)
    }

    fn ingest(dir: &Path, f: &Path) -> Result<IngestOutcome> {
        ingest_external_findings(f, dir, &BTreeMap::new(), WindowConfig::default())
    }

    #[test]
    fn identity_alias() {
        let (dir, f) = setup(
            &[("a.py", "x = 'AKIAZ7Q3MBX2LKR9TPWD'\n")],
            r#"{"file":"a.py","line":1,"raw":"AKIAZ7Q3MBX2LKR9TPWD","detector_name":"AWS"}"#,
        );
        let out = ingest(dir.path(), &f).unwrap();
        assert_eq!(out.candidates.len(), 1);
        assert_eq!(out.candidates[0].secret_type, SecretType::AWS);
        assert_eq!(out.candidates[0].location.byte_span, ByteSpan::new(5, 25));
        assert_eq!(out.warning_count(), 0);
    }

    #[test]
    fn unknown_detector_is_skipped() {
        let (dir, f) = setup(
            &[("a.py", "token\n")],
            r#"{"file":"a.py","line":1,"raw":"token","detector_name":"FooCloud"}"#,
        );
        let out = ingest(dir.path(), &f).unwrap();
        assert!(out.candidates.is_empty());
        assert_eq!(out.unmapped, 1);
        assert_eq!(out.warning_count(), 1);
    }

    #[test]
    fn configured_alias_maps_detector() {
        let (dir, f) = setup(
            &[("a.py", "token\n")],
            r#"{"file":"a.py","line":1,"raw":"token","detector_name":"FooCloud"}"#,
        );
        let aliases = BTreeMap::from([("FooCloud".to_string(), "URI".to_string())]);
        let out = ingest_external_findings(&f, dir.path(), &aliases, WindowConfig::default())
            .unwrap();
        assert_eq!(out.candidates[0].secret_type, SecretType::URI);
    }

    #[test]
    fn span_recomputed_from_line() {
        // The value occurs on lines 1 and 3; the record points at line 3.
        let body = "a = 'SECRETVALUE'\n\nb = 'SECRETVALUE'\n";
        let (dir, f) = setup(
            &[("cfg.py", body)],
            r#"{"file":"cfg.py","line":3,"raw":"SECRETVALUE","detector_name":"URI"}"#,
        );
        let out = ingest(dir.path(), &f).unwrap();
        let c = &out.candidates[0];
        assert_eq!(c.location.byte_span, ByteSpan::new(24, 35));
        assert_eq!(c.location.line, 3);
        assert_eq!(&body[24..35], "SECRETVALUE");

        // Wrong line: falls back to first occurrence in the file.
        let (dir, f) = setup(
            &[("cfg.py", body)],
            r#"{"file":"cfg.py","line":2,"raw":"SECRETVALUE","detector_name":"URI"}"#,
        );
        let c = &ingest(dir.path(), &f).unwrap().candidates[0];
        assert_eq!(c.location.byte_span, ByteSpan::new(5, 16));
        assert_eq!(c.location.line, 1);
    }

    #[test]
    fn missing_file_is_unlocated() {
        let (dir, f) = setup(
            &[],
            r#"{"file":"gone.py","line":1,"raw":"AKIAZ7Q3MBX2LKR9TPWD","detector_name":"aws"}"#,
        );
        let out = ingest(dir.path(), &f).unwrap();
        assert!(out.candidates.is_empty());
        assert_eq!(out.unlocated.len(), 1);
        assert_eq!(out.unlocated[0].file_path, "gone.py");
        assert_eq!(out.warning_count(), 1);
    }

    #[test]
    fn malformed_lines() {
        let (dir, f) = setup(
            &[("a.py", "tok\n")],
            "not json\n{\"file\":\"a.py\",\"line\":1,\"raw\":\"tok\",\"detector_name\":\"URI\"}\n",
        );
        let out = ingest(dir.path(), &f).unwrap();
        assert_eq!(out.malformed, 1);
        assert_eq!(out.candidates.len(), 1);

        let (dir, f) = setup(&[], "nope\n{\"file\":1}\n");
        assert!(matches!(ingest(dir.path(), &f), Err(Error::Ingest { .. })));

        let (dir, f) = setup(&[], "");
        assert!(ingest(dir.path(), &f).unwrap().candidates.is_empty());
    }

    #[test]
    fn escaping_paths_are_rejected() {
        let (dir, f) = setup(
            &[],
            r#"{"file":"../etc/passwd","line":1,"raw":"root","detector_name":"URI"}"#,
        );
        let out = ingest(dir.path(), &f).unwrap();
        assert_eq!(out.unlocated.len(), 1);
        assert!(out.unlocated[0].reason.contains("escapes"));
    }
}
