use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::context::has_marker_segment;
use super::graph::ReferenceGraph;
use crate::backend::{parse_reply, AnalysisBackend};
use crate::orchestrator::{agent_prompt, PromptTemplates};
use crate::types::CandidateSecret;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiteTag {
    TestOrDemo,
    Production,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Usage {
    Production,
    TestOrDemo,
    Unreferenced,
}

impl Usage {
    pub fn as_str(self) -> &'static str {
        match self {
            Usage::Production => "production",
            Usage::TestOrDemo => "test_or_demo",
            Usage::Unreferenced => "unreferenced",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceSite {
    pub file: String,
    pub line: usize,
    pub snippet: String,
    pub context: String,
    pub tag: SiteTag,
    /// The line reads the key file or binds it to a credential-looking name.
    pub loading_hint: bool,
}

impl ReferenceSite {
    pub fn describe(&self) -> String {
        format!("{}:{}: {}", self.file, self.line, self.snippet)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceAssessment {
    pub sites: Vec<ReferenceSite>,
    pub usage: Usage,
    /// Index into `sites`.
    pub decisive_site: Option<usize>,
    pub rationale: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn loading_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"(?i)\b(?:open|fopen|read\w*|load\w*|from_file|from_pem\w*|import_key)\b|\b\w*(?:key|secret|token|pem|cert)\w*\s*[:=]",
        )
        .expect("loading pattern compiles")
    })
}

pub fn loading_hint(snippet: &str) -> bool {
    loading_pattern().is_match(snippet)
}

pub fn tag_site(file: &str, snippet: &str, keywords: &[String]) -> SiteTag {
    if has_marker_segment(file, keywords) || has_marker_segment(snippet, keywords) {
        SiteTag::TestOrDemo
    } else {
        SiteTag::Production
    }
}

/// Reference sites for the candidate's file, in graph order.
pub fn collect_sites(c: &CandidateSecret, graph: &ReferenceGraph, keywords: &[String]) -> Vec<ReferenceSite> {
    graph
        .referencing(&c.location.file_path)
        .flat_map(|e| {
            e.sites.iter().map(move |s| ReferenceSite {
                file: e.from.clone(),
                line: s.line,
                snippet: s.snippet.clone(),
                context: s.context.clone(),
                tag: tag_site(&e.from, &s.snippet, keywords),
                loading_hint: loading_hint(&s.snippet),
            })
        })
        .collect()
}

/// Per-site majority; ties go to production, the conservative side.
pub fn majority_usage(sites: &[ReferenceSite]) -> (Usage, Option<usize>) {
    if sites.is_empty() {
        return (Usage::Unreferenced, None);
    }
    let prod = sites.iter().filter(|s| s.tag == SiteTag::Production).count();
    let (usage, tag) = if prod * 2 >= sites.len() {
        (Usage::Production, SiteTag::Production)
    } else {
        (Usage::TestOrDemo, SiteTag::TestOrDemo)
    };
    (usage, sites.iter().position(|s| s.tag == tag))
}

/// The reference usage rule: a production site that loads the key decides
/// on its own; otherwise the per-site majority.
pub fn judge_usage(sites: &[ReferenceSite]) -> (Usage, Option<usize>, String) {
    if let Some(i) = sites
        .iter()
        .position(|s| s.tag == SiteTag::Production && s.loading_hint)
    {
        return (
            Usage::Production,
            Some(i),
            format!("{} loads the key outside test code", sites[i].file),
        );
    }
    let (usage, idx) = majority_usage(sites);
    let prod = sites.iter().filter(|s| s.tag == SiteTag::Production).count();
    (
        usage,
        idx,
        format!("{prod} of {} reference sites are outside test or demo code", sites.len()),
    )
}

fn parse_usage_reply(text: &str, n_sites: usize) -> Result<(Usage, Option<usize>, String), String> {
    let map = parse_reply(text).ok_or("reply contains no JSON object")?;
    let usage = match map.get("usage").and_then(Value::as_str).map(str::to_ascii_lowercase).as_deref() {
        Some("production") => Usage::Production,
        Some("test_or_demo") => Usage::TestOrDemo,
        _ => return Err("reply has no valid `usage`".into()),
    };
    let decisive = map
        .get("decisive_site")
        .and_then(Value::as_u64)
        .map(|i| i as usize)
        .filter(|i| *i < n_sites);
    let rationale = map
        .get("rationale")
        .and_then(Value::as_str)
        .unwrap_or_default()
        .to_string();
    Ok((usage, decisive, rationale))
}

/// Level-3 analysis of how the rest of the project uses the candidate's
/// file. With no referencing sites the backend is not consulted.
pub fn analyze_references(
    c: &CandidateSecret,
    graph: &ReferenceGraph,
    keywords: &[String],
    templates: &PromptTemplates,
    backend: &dyn AnalysisBackend,
) -> ReferenceAssessment {
    let sites = collect_sites(c, graph, keywords);
    if sites.is_empty() {
        return ReferenceAssessment {
            sites,
            usage: Usage::Unreferenced,
            decisive_site: None,
            rationale: "no other file references this file".to_string(),
            error: None,
        };
    }
    let evidence = json!({
        "task": "reference_usage",
        "key_file": c.location.file_path,
        "sites": sites.iter().map(|s| json!({
            "file": s.file,
            "line": s.line,
            "snippet": s.snippet,
            "context": s.context,
            "tag": s.tag,
            "loading_hint": s.loading_hint,
        })).collect::<Vec<_>>(),
    });
    let reply = agent_prompt(templates, c, &evidence)
        .map_err(|e| e.to_string())
        .and_then(|p| backend.complete(&p).map_err(|e| e.to_string()))
        .and_then(|completion| parse_usage_reply(&completion.text, sites.len()));
    match reply {
        Ok((usage, decisive_site, rationale)) => ReferenceAssessment {
            sites,
            usage,
            decisive_site,
            rationale,
            error: None,
        },
        Err(err) => {
            let (usage, decisive_site) = majority_usage(&sites);
            ReferenceAssessment {
                sites,
                usage,
                decisive_site,
                rationale: "per-site majority fallback".to_string(),
                error: Some(err),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn site(file: &str, snippet: &str) -> ReferenceSite {
        let kw: Vec<String> = super::super::DEFAULT_SITE_KEYWORDS.iter().map(|s| s.to_string()).collect();
        ReferenceSite {
            file: file.into(),
            line: 1,
            snippet: snippet.into(),
            context: String::new(),
            tag: tag_site(file, snippet, &kw),
            loading_hint: loading_hint(snippet),
        }
    }

    #[test]
    fn loading_hints() {
        assert!(loading_hint("app_private_key_string = open('keys/app.pem').read()"));
        assert!(loading_hint("key = load_pem('k.pem')"));
        assert!(!loading_hint("# see k.pem for details"));
    }

    #[test]
    fn tagging() {
        assert_eq!(site("test/test_pay.py", "open('k.pem')").tag, SiteTag::TestOrDemo);
        assert_eq!(site("docs/examples/run.sh", "k.pem").tag, SiteTag::TestOrDemo);
        assert_eq!(site("pay.py", "open('k.pem')").tag, SiteTag::Production);
    }

    #[test]
    fn usage_rules() {
        assert_eq!(judge_usage(&[]).0, Usage::Unreferenced);
        let sites = vec![
            site("test/a.py", "open('k.pem')"),
            site("test/b.py", "open('k.pem')"),
            site("pay.py", "app_private_key_string = open('k.pem').read()"),
        ];
        let (usage, idx, _) = judge_usage(&sites);
        assert_eq!((usage, idx), (Usage::Production, Some(2)));
        assert_eq!(majority_usage(&sites), (Usage::TestOrDemo, Some(0)));
        let tie = vec![site("test/a.py", "k.pem"), site("docs.md", "k.pem")];
        assert_eq!(majority_usage(&tie), (Usage::Production, Some(1)));
    }
}
