//! The commander loop: decide, dispatch a check agent, merge its results into
//! the session's memory pool, decide again, until a final decision or the
//! iteration bound.

mod commander;
mod pool;
mod prompt;

use serde_json::Value;

pub use commander::{
    commander_decide, commander_prompt, decide, decision_reply, parse_decision, select_path,
    CommanderState, Decision, Path, LOW_ENTROPY_BITS,
};
pub use pool::{
    digest_input, Agent, Conclusion, ConclusionBody, Facts, MemoryPool, RepoFacts, Tool, Transcript,
};
pub use prompt::{render, slot_names, PromptTemplates, AGENT_TEMPLATE, COMMANDER_TEMPLATE, SLOTS};

use crate::advanced_check::{run_advanced_check, ReferenceGraph, DEFAULT_SITE_KEYWORDS};
use crate::backend::{evidence_block, AnalysisBackend, Prompt};
use crate::basic_check::{run_basic_check, BasicTools};
use crate::config::LevelSet;
use crate::error::Result;
use crate::types::{CandidateSecret, Classification, Confidence, Level, Verdict};

/// Render the agent template for one tool call. The raw key is marked
/// sensitive so it never reaches a log line.
pub fn agent_prompt(templates: &PromptTemplates, c: &CandidateSecret, evidence: &Value) -> Result<Prompt> {
    let context = format!(
        "file: {}:{} ({})\n--- before ---\n{}\n--- after ---\n{}",
        c.location.file_path, c.location.line, c.context.file_kind, c.context.before, c.context.after
    );
    let text = render(
        &templates.p_agent,
        &[
            ("key", &c.raw_value),
            ("context", &context),
            ("tool_results", &evidence_block(evidence)),
        ],
    )?;
    Ok(Prompt::new(text).with_sensitive([c.raw_value.clone()]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    /// Agent dispatches allowed before the session is declared undetermined.
    pub max_iterations: usize,
    pub levels: LevelSet,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_iterations: 4,
            levels: LevelSet::All,
        }
    }
}

/// Everything a verification session needs, shared read-only across
/// concurrent sessions.
pub struct Verifier<'a> {
    pub backend: &'a dyn AnalysisBackend,
    pub graph: &'a ReferenceGraph,
    pub tools: &'a BasicTools,
    pub templates: &'a PromptTemplates,
    pub site_keywords: &'a [String],
    pub limits: Limits,
    pub repo: RepoFacts,
}

impl Verifier<'_> {
    pub fn verify(&self, c: &CandidateSecret) -> Verdict {
        self.verify_observed(c, &mut |_| {})
    }

    /// As [`verify`](Self::verify), calling `observe` with the pool after
    /// initialization and after every agent run.
    pub fn verify_observed(&self, c: &CandidateSecret, observe: &mut dyn FnMut(&MemoryPool)) -> Verdict {
        let mut pool = MemoryPool::new(Facts {
            candidate: c.clone(),
            repository: self.repo.clone(),
        });
        observe(&pool);
        let advanced_available = self.limits.levels.allows(Level::Context);
        let mut notes = Vec::new();
        let mut runs = 0;
        let (mut decision, note) = commander_decide(&pool, self.templates, self.backend, runs, advanced_available);
        notes.extend(note);

        loop {
            let path = select_path(&decision);
            if path == Path::End {
                break;
            }
            if runs == self.limits.max_iterations {
                decision = Decision::finish(
                    Classification::Undetermined,
                    Confidence::Low,
                    vec![format!(
                        "iteration bound of {} reached without a final decision",
                        self.limits.max_iterations
                    )],
                );
                break;
            }
            runs += 1;
            match path {
                Path::Basic => {
                    run_basic_check(&mut pool, self.tools, self.templates, self.backend, runs);
                }
                Path::Advanced => {
                    run_advanced_check(
                        &mut pool,
                        self.graph,
                        self.site_keywords,
                        self.templates,
                        self.backend,
                        self.limits.levels,
                        runs,
                    );
                }
                Path::End => unreachable!(),
            }
            observe(&pool);
            let (next, note) = commander_decide(&pool, self.templates, self.backend, runs, advanced_available);
            notes.extend(note);
            decision = next;
        }

        let Decision::Final {
            classification,
            confidence,
            mut reasons,
        } = decision
        else {
            unreachable!("loop exits only on a final decision")
        };
        for n in notes {
            if !reasons.contains(&n) {
                reasons.push(n);
            }
        }
        Verdict {
            candidate_id: c.id.clone(),
            classification,
            confidence,
            reasons,
            levels_used: pool.levels_used(),
            pool_snapshot: pool,
        }
    }
}

/// Verify one candidate with the shipped tools and templates.
pub fn verify_candidate(
    c: &CandidateSecret,
    graph: &ReferenceGraph,
    backend: &dyn AnalysisBackend,
    limits: Limits,
) -> Verdict {
    let tools = BasicTools::default();
    let templates = PromptTemplates::default();
    let keywords: Vec<String> = DEFAULT_SITE_KEYWORDS.iter().map(|s| s.to_string()).collect();
    Verifier {
        backend,
        graph,
        tools: &tools,
        templates: &templates,
        site_keywords: &keywords,
        limits,
        repo: RepoFacts {
            name: String::new(),
            files_indexed: graph.nodes.len(),
        },
    }
    .verify(c)
}
