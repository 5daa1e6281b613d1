//! Levels 2 and 3: what the key's surroundings say, and, when they say
//! nothing, how the rest of the project uses the key's file.

mod context;
mod graph;
mod references;

use serde::{Deserialize, Serialize};
use serde_json::json;

pub use context::{
    analyze_context, extract_indicators, has_marker_segment, judge_context, keyword_hits, segments,
    ContextAssessment, ContextJudgment, Indicator, IndicatorKind, IndicatorSource, DISCLAIMER_WORDS,
    EXAMPLE_WORDS, PRODUCTION_WORDS, TEST_PATH_WORDS,
};
pub use graph::{
    basename, build_reference_index, edge_lines, index_files, reference_tokens, token_boundary,
    EdgeSite, ReferenceEdge, ReferenceGraph, SITE_CONTEXT_LINES, SITE_SNIPPET_MAX,
};
pub use references::{
    analyze_references, collect_sites, judge_usage, loading_hint, majority_usage, tag_site,
    ReferenceAssessment, ReferenceSite, SiteTag, Usage,
};

use crate::backend::AnalysisBackend;
use crate::basic_check::Suspicion;
use crate::config::LevelSet;
use crate::orchestrator::{Agent, Conclusion, ConclusionBody, MemoryPool, PromptTemplates, Tool};
use crate::types::Level;

pub const DEFAULT_SITE_KEYWORDS: [&str; 7] = ["test", "spec", "fixture", "example", "demo", "mock", "sample"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisiveSite {
    pub file: String,
    pub line: usize,
    pub snippet: String,
}

/// Tier-3 conclusion of the advanced agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvancedReport {
    pub context_judgment: ContextJudgment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<Usage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decisive_site: Option<DecisiveSite>,
    pub recommendation: Suspicion,
    pub low_confidence: bool,
    pub notes: Vec<String>,
}

impl AdvancedReport {
    /// Evidence chain in reading order.
    pub fn reasons(&self) -> Vec<String> {
        let mut out = vec![format!("context judgment: {}", self.context_judgment.as_str())];
        out.extend(self.notes.iter().cloned());
        if let Some(u) = self.usage {
            out.push(format!("reference usage: {}", u.as_str()));
        }
        if let Some(s) = &self.decisive_site {
            out.push(format!("decisive reference site: {}:{}: {}", s.file, s.line, s.snippet));
        }
        out
    }
}

/// Combine the level-2 judgment and optional level-3 usage into a
/// recommendation and a low-confidence flag.
pub fn recommend(judgment: ContextJudgment, usage: Option<Usage>) -> (Suspicion, bool) {
    match (judgment, usage) {
        (ContextJudgment::Illustrative, _) => (Suspicion::FalsePositiveIndicated, false),
        (ContextJudgment::Operational, _) => (Suspicion::Genuine, false),
        (ContextJudgment::Insufficient, Some(Usage::Production)) => (Suspicion::Genuine, false),
        (ContextJudgment::Insufficient, Some(Usage::TestOrDemo)) => (Suspicion::FalsePositiveIndicated, false),
        // Unreferenced, or references not examined: flag, but for review.
        (ContextJudgment::Insufficient, _) => (Suspicion::Genuine, true),
    }
}

/// Run the advanced agent for the pool's candidate. The reference check runs
/// only when the context is insufficient and level 3 is enabled.
pub fn run_advanced_check(
    pool: &mut MemoryPool,
    graph: &ReferenceGraph,
    site_keywords: &[String],
    templates: &PromptTemplates,
    backend: &dyn AnalysisBackend,
    levels: LevelSet,
    iteration: usize,
) -> AdvancedReport {
    let c = pool.candidate().clone();
    let basic = pool.latest_basic().map(|b| json!(b));
    let mut notes = Vec::new();

    let ctx = analyze_context(&c, templates, backend, basic.as_ref());
    let input = format!("{}\0{}\0{}", c.raw_value, c.context.before, c.context.after);
    pool.record_transcript(Tool::ContextCheck, Agent::Advanced, iteration, &input, json!(ctx));
    if let Some(err) = &ctx.error {
        notes.push(format!("context check: {err}"));
    }
    let mut tools = vec![Tool::ContextCheck];

    let mut usage = None;
    let mut decisive_site = None;
    if ctx.judgment == ContextJudgment::Insufficient {
        if levels.allows(Level::Reference) {
            let refs = analyze_references(&c, graph, site_keywords, templates, backend);
            pool.record_transcript(
                Tool::ReferenceCheck,
                Agent::Advanced,
                iteration,
                &c.location.file_path,
                json!(refs),
            );
            tools.push(Tool::ReferenceCheck);
            if let Some(err) = &refs.error {
                notes.push(format!("reference check fell back to site majority: {err}"));
            }
            if refs.usage == Usage::Unreferenced {
                notes.push("no project file references the key's file".to_string());
            }
            usage = Some(refs.usage);
            decisive_site = refs.decisive_site.and_then(|i| refs.sites.get(i)).map(|s| DecisiveSite {
                file: s.file.clone(),
                line: s.line,
                snippet: s.snippet.clone(),
            });
        } else {
            notes.push("reference check disabled".to_string());
        }
    }

    let (recommendation, low_confidence) = recommend(ctx.judgment, usage);
    let report = AdvancedReport {
        context_judgment: ctx.judgment,
        usage,
        decisive_site,
        recommendation,
        low_confidence,
        notes,
    };
    pool.append_conclusion(Conclusion {
        agent: Agent::Advanced,
        iteration,
        tools,
        body: ConclusionBody::Advanced(report.clone()),
    })
    .expect("advanced transcripts were just recorded");
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recommendation_table() {
        use ContextJudgment::*;
        assert_eq!(recommend(Illustrative, None), (Suspicion::FalsePositiveIndicated, false));
        assert_eq!(recommend(Operational, None), (Suspicion::Genuine, false));
        assert_eq!(recommend(Insufficient, Some(Usage::Production)), (Suspicion::Genuine, false));
        assert_eq!(
            recommend(Insufficient, Some(Usage::TestOrDemo)),
            (Suspicion::FalsePositiveIndicated, false)
        );
        assert_eq!(recommend(Insufficient, Some(Usage::Unreferenced)), (Suspicion::Genuine, true));
        assert_eq!(recommend(Insufficient, None), (Suspicion::Genuine, true));
    }
}
