use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::backend::{parse_reply, AnalysisBackend};
use crate::orchestrator::{agent_prompt, PromptTemplates};
use crate::types::{CandidateSecret, FileKind};

/// Words in nearby text that mark a key as documentation material.
pub const EXAMPLE_WORDS: [&str; 4] = ["example", "sample", "tutorial", "demo"];
/// Words that mark a value as a stand-in to be replaced.
pub const DISCLAIMER_WORDS: [&str; 4] = ["replace", "placeholder", "todo", "do not use"];
/// Path segments marking test code.
pub const TEST_PATH_WORDS: [&str; 5] = ["test", "spec", "fixture", "mock", "testdata"];
/// Words suggesting the key is wired into running code.
pub const PRODUCTION_WORDS: [&str; 8] = [
    "client",
    "connect",
    "connection",
    "session",
    "login",
    "authenticate",
    "production",
    "deploy",
];

const SNIPPET_MAX: usize = 160;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndicatorKind {
    DocExample,
    TestMarker,
    CommentDisclaimer,
    ProductionHint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndicatorSource {
    Before,
    After,
    Path,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Indicator {
    pub kind: IndicatorKind,
    pub snippet: String,
    /// Byte distance from the match: negative before it, non-negative after
    /// its end, zero for path markers.
    pub offset: i64,
    pub source: IndicatorSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextJudgment {
    Illustrative,
    Operational,
    Insufficient,
}

impl ContextJudgment {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "illustrative" => Some(ContextJudgment::Illustrative),
            "operational" => Some(ContextJudgment::Operational),
            "insufficient" => Some(ContextJudgment::Insufficient),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ContextJudgment::Illustrative => "illustrative",
            ContextJudgment::Operational => "operational",
            ContextJudgment::Insufficient => "insufficient",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextAssessment {
    pub indicators: Vec<Indicator>,
    pub judgment: ContextJudgment,
    pub rationale: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn is_alpha(c: Option<char>) -> bool {
    c.is_some_and(char::is_alphabetic)
}

/// Byte offsets of `word` in `text`, case-insensitively, where the hit is
/// not embedded in a longer alphabetic run. A plural `s` is allowed, and a
/// camel-case hump counts as a boundary.
pub fn keyword_hits(text: &str, word: &str) -> Vec<usize> {
    let lower = text.to_lowercase();
    if lower.len() != text.len() {
        // Case folding changed byte lengths; fall back to ASCII folding so
        // offsets stay valid.
        return keyword_hits_in(text, &text.to_ascii_lowercase(), word);
    }
    keyword_hits_in(text, &lower, word)
}

fn keyword_hits_in(text: &str, lower: &str, word: &str) -> Vec<usize> {
    let mut hits = Vec::new();
    for (i, _) in lower.match_indices(word) {
        let prev = text[..i].chars().next_back();
        let first = text[i..].chars().next();
        let start_ok = !is_alpha(prev)
            || (prev.is_some_and(char::is_lowercase) && first.is_some_and(char::is_uppercase));
        let mut end = i + word.len();
        if text[end..].starts_with(['s', 'S']) && !is_alpha(text[end + 1..].chars().next()) {
            end += 1;
        }
        let last = text[..end].chars().next_back();
        let next = text[end..].chars().next();
        let end_ok = !is_alpha(next)
            || (last.is_some_and(char::is_lowercase) && next.is_some_and(char::is_uppercase));
        if start_ok && end_ok {
            hits.push(i);
        }
    }
    hits
}

/// Split a path or identifier into lowercase words at non-alphanumerics and
/// camel-case humps.
pub fn segments(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut prev_lower = false;
    for c in text.chars() {
        if !c.is_alphanumeric() {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
            prev_lower = false;
            continue;
        }
        if c.is_uppercase() && prev_lower && !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
        prev_lower = c.is_lowercase() || c.is_ascii_digit();
        cur.extend(c.to_lowercase());
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Whether any segment of `text` is one of `words`, allowing `s` and `ing`
/// suffixes.
pub fn has_marker_segment<S: AsRef<str>>(text: &str, words: &[S]) -> bool {
    segments(text).iter().any(|seg| {
        words.iter().any(|w| {
            seg.strip_prefix(w.as_ref())
                .is_some_and(|rest| matches!(rest, "" | "s" | "ing"))
        })
    })
}

fn line_around(text: &str, pos: usize) -> String {
    let start = text[..pos].rfind('\n').map_or(0, |i| i + 1);
    let end = text[pos..].find('\n').map_or(text.len(), |i| pos + i);
    let line = text[start..end].trim();
    if line.len() <= SNIPPET_MAX {
        return line.to_string();
    }
    let mut cut = SNIPPET_MAX;
    while !line.is_char_boundary(cut) {
        cut -= 1;
    }
    line[..cut].to_string()
}

/// Deterministic keyword and path scan over a candidate's surroundings.
pub fn extract_indicators(c: &CandidateSecret) -> Vec<Indicator> {
    let mut out = Vec::new();
    let groups: [(IndicatorKind, &[&str]); 3] = [
        (IndicatorKind::DocExample, &EXAMPLE_WORDS),
        (IndicatorKind::CommentDisclaimer, &DISCLAIMER_WORDS),
        (IndicatorKind::ProductionHint, &PRODUCTION_WORDS),
    ];
    for (source, text) in [
        (IndicatorSource::Before, c.context.before.as_str()),
        (IndicatorSource::After, c.context.after.as_str()),
    ] {
        for (kind, words) in groups {
            for word in words {
                for pos in keyword_hits(text, word) {
                    let offset = match source {
                        IndicatorSource::Before => pos as i64 - text.len() as i64,
                        _ => pos as i64,
                    };
                    out.push(Indicator {
                        kind,
                        snippet: line_around(text, pos),
                        offset,
                        source,
                    });
                }
            }
        }
    }
    if has_marker_segment(&c.location.file_path, &TEST_PATH_WORDS) {
        out.push(Indicator {
            kind: IndicatorKind::TestMarker,
            snippet: c.location.file_path.clone(),
            offset: 0,
            source: IndicatorSource::Path,
        });
    }
    out.sort_by_key(|i| (i.source, i.offset, i.kind));
    out.dedup();
    out
}

/// The reference judgment rule: illustrative markers win, then production
/// hints; with no indicators at all the file kind decides, and only
/// standalone key or data files are left without a call.
pub fn judge_context(file_kind: FileKind, indicators: &[Indicator]) -> (ContextJudgment, String) {
    let has = |k: IndicatorKind| indicators.iter().any(|i| i.kind == k);
    if has(IndicatorKind::DocExample) || has(IndicatorKind::TestMarker) || has(IndicatorKind::CommentDisclaimer) {
        let kinds: Vec<&str> = indicators
            .iter()
            .filter(|i| i.kind != IndicatorKind::ProductionHint)
            .map(|i| match i.kind {
                IndicatorKind::DocExample => "example wording",
                IndicatorKind::TestMarker => "test path",
                _ => "replacement note",
            })
            .collect();
        let mut kinds = kinds;
        kinds.dedup();
        return (
            ContextJudgment::Illustrative,
            format!("surroundings carry {}", kinds.join(", ")),
        );
    }
    if has(IndicatorKind::ProductionHint) {
        return (
            ContextJudgment::Operational,
            "key sits next to client or connection code".to_string(),
        );
    }
    match file_kind {
        FileKind::KeyMaterial | FileKind::Data => (
            ContextJudgment::Insufficient,
            format!("standalone {file_kind} file with no usable context"),
        ),
        FileKind::Document => (
            ContextJudgment::Illustrative,
            "key appears in documentation prose".to_string(),
        ),
        FileKind::Code | FileKind::Config => (
            ContextJudgment::Operational,
            format!("key assigned in a {file_kind} file without example markers"),
        ),
    }
}

fn invariant_holds(file_kind: FileKind, indicators: &[Indicator], j: ContextJudgment) -> bool {
    let standalone = indicators.is_empty() && matches!(file_kind, FileKind::KeyMaterial | FileKind::Data);
    (j == ContextJudgment::Insufficient) == standalone
}

/// Level-2 analysis. Indicators are extracted here; the judgment comes from
/// the backend and is checked against them.
pub fn analyze_context(
    c: &CandidateSecret,
    templates: &PromptTemplates,
    backend: &dyn AnalysisBackend,
    basic_conclusion: Option<&Value>,
) -> ContextAssessment {
    let indicators = extract_indicators(c);
    let evidence = json!({
        "task": "context_judgment",
        "file_path": c.location.file_path,
        "file_kind": c.context.file_kind,
        "indicators": indicators,
        "basic_conclusion": basic_conclusion,
    });
    let reply = agent_prompt(templates, c, &evidence)
        .map_err(|e| e.to_string())
        .and_then(|p| backend.complete(&p).map_err(|e| e.to_string()))
        .and_then(|completion| {
            let map = parse_reply(&completion.text).ok_or("reply contains no JSON object")?;
            let judgment = map
                .get("judgment")
                .and_then(Value::as_str)
                .and_then(ContextJudgment::parse)
                .ok_or("reply has no valid `judgment`")?;
            let rationale = map
                .get("rationale")
                .and_then(Value::as_str)
                .unwrap_or_default()
                .to_string();
            Ok((judgment, rationale))
        });
    match reply {
        Ok((judgment, rationale)) if invariant_holds(c.context.file_kind, &indicators, judgment) => {
            ContextAssessment {
                indicators,
                judgment,
                rationale,
                error: None,
            }
        }
        Ok((judgment, _)) => {
            let (fixed, rationale) = judge_context(c.context.file_kind, &indicators);
            ContextAssessment {
                indicators,
                judgment: fixed,
                rationale,
                error: Some(format!(
                    "backend judgment `{}` contradicts the indicators; rule table applied",
                    judgment.as_str()
                )),
            }
        }
        Err(err) => ContextAssessment {
            indicators,
            judgment: ContextJudgment::Insufficient,
            rationale: "context judgment unavailable".to_string(),
            error: Some(err),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keyword_boundaries() {
        assert_eq!(keyword_hits("see the Example below", "example"), vec![8]);
        assert_eq!(keyword_hits("examples:", "example"), vec![0]);
        assert!(keyword_hits("counterexample", "example").is_empty());
        assert_eq!(keyword_hits("boto3.client(", "client"), vec![6]);
        assert_eq!(keyword_hits("createClient()", "client"), vec![6]);
        assert!(keyword_hits("clientele", "client").is_empty());
        assert_eq!(keyword_hits("# TODO: rotate", "todo"), vec![2]);
        assert_eq!(keyword_hits("Do not use in prod", "do not use"), vec![0]);
    }

    #[test]
    fn path_segments() {
        assert_eq!(segments("src/TestPayment_v2.py"), vec!["src", "test", "payment", "v2", "py"]);
        assert!(has_marker_segment("tests/unit/pay.py", &TEST_PATH_WORDS));
        assert!(has_marker_segment("pay_test.go", &TEST_PATH_WORDS));
        assert!(!has_marker_segment("src/latest/special.py", &TEST_PATH_WORDS));
    }

    #[test]
    fn judgment_table_respects_invariant() {
        use FileKind::*;
        for kind in [Code, Document, Config, Data, KeyMaterial] {
            let (j, _) = judge_context(kind, &[]);
            assert!(invariant_holds(kind, &[], j), "{kind}");
        }
        let ind = Indicator {
            kind: IndicatorKind::DocExample,
            snippet: "example".into(),
            offset: -3,
            source: IndicatorSource::Before,
        };
        assert_eq!(judge_context(KeyMaterial, &[ind]).0, ContextJudgment::Illustrative);
    }
}
