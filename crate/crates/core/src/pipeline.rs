//! End-to-end runs: screen a tree (or take external findings), index project
//! references, and verify every candidate.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::advanced_check::{build_reference_index, ReferenceGraph};
use crate::backend::AnalysisBackend;
use crate::basic_check::BasicTools;
use crate::config::ScanConfig;
use crate::error::{Error, Result};
use crate::orchestrator::{Facts, Limits, MemoryPool, PromptTemplates, RepoFacts, Verifier};
use crate::screener::{IngestOutcome, Screener, UnlocatedFinding};
use crate::types::{
    classify_file_kind, ByteSpan, CandidateSecret, Classification, Confidence, ContextWindow, SourceLocation,
    Verdict,
};

/// A candidate with its verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub candidate: CandidateSecret,
    pub verdict: Verdict,
}

#[derive(Debug, Default)]
pub struct RunReport {
    pub findings: Vec<Finding>,
    pub warnings: Vec<String>,
    pub graph: ReferenceGraph,
    pub files_scanned: usize,
}

impl RunReport {
    pub fn has_true_leak(&self) -> bool {
        self.findings
            .iter()
            .any(|f| f.verdict.classification == Classification::TrueLeak)
    }
}

/// Worker pool honoring `config.jobs`; `None` means one worker per logical
/// CPU.
pub fn worker_pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

fn repo_name(root: &Path) -> String {
    root.canonicalize()
        .ok()
        .as_deref()
        .and_then(Path::file_name)
        .or_else(|| root.file_name())
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn verify_all(
    root: &Path,
    candidates: Vec<CandidateSecret>,
    graph: &ReferenceGraph,
    config: &ScanConfig,
    backend: &dyn AnalysisBackend,
) -> Result<Vec<Finding>> {
    let tools = BasicTools::from_config(config)?;
    let templates = PromptTemplates::default();
    let verifier = Verifier {
        backend,
        graph,
        tools: &tools,
        templates: &templates,
        site_keywords: &config.site_keywords,
        limits: Limits {
            max_iterations: config.max_iterations,
            levels: config.levels,
        },
        repo: RepoFacts {
            name: repo_name(root),
            files_indexed: graph.nodes.len(),
        },
    };
    Ok(candidates
        .into_par_iter()
        .map(|c| {
            let verdict = verifier.verify(&c);
            Finding { candidate: c, verdict }
        })
        .collect())
}

/// Screen `root`, build its reference index, and verify every candidate.
pub fn scan_and_verify(root: &Path, config: &ScanConfig, backend: &dyn AnalysisBackend) -> Result<RunReport> {
    config.validate()?;
    worker_pool(config.jobs)?.install(|| {
        let outcome = Screener::new(config).scan_repository(root)?;
        let graph = build_reference_index(root, config.max_file_bytes, config.min_stem_len)?;
        let mut warnings = outcome.warnings;
        warnings.extend(graph.warnings.iter().cloned());
        let findings = verify_all(root, outcome.candidates, &graph, config, backend)?;
        Ok(RunReport {
            findings,
            warnings,
            files_scanned: outcome.files_scanned,
            graph,
        })
    })
}

/// Placeholder candidate for a finding that could not be located; it keeps
/// the finding's identity so the verdict can be joined back.
fn unlocated_candidate(u: &UnlocatedFinding) -> CandidateSecret {
    CandidateSecret {
        id: u.id.clone(),
        secret_type: u.secret_type,
        raw_value: u.raw_value.clone(),
        location: SourceLocation {
            file_path: u.file_path.clone(),
            line: u.line,
            byte_span: ByteSpan::new(0, 0),
        },
        context: ContextWindow {
            before: String::new(),
            after: String::new(),
            file_kind: classify_file_kind(&u.file_path),
        },
        entropy_bits: crate::screener::shannon_entropy(&u.raw_value),
        detector_rule: String::from("external"),
    }
}

/// Verdict for a finding the pipeline could not examine at all.
pub fn unlocated_verdict(u: &UnlocatedFinding, repo: RepoFacts) -> Finding {
    let candidate = unlocated_candidate(u);
    Finding {
        verdict: Verdict {
            candidate_id: u.id.clone(),
            classification: Classification::Undetermined,
            confidence: Confidence::Low,
            reasons: vec![format!("finding could not be located: {}", u.reason)],
            levels_used: Default::default(),
            pool_snapshot: MemoryPool::new(Facts {
                candidate: candidate.clone(),
                repository: repo,
            }),
        },
        candidate,
    }
}

/// Verify externally supplied findings without screening.
pub fn verify_ingested(
    root: &Path,
    ingested: IngestOutcome,
    config: &ScanConfig,
    backend: &dyn AnalysisBackend,
) -> Result<RunReport> {
    config.validate()?;
    worker_pool(config.jobs)?.install(|| {
        let graph = build_reference_index(root, config.max_file_bytes, config.min_stem_len)?;
        let mut warnings = ingested.warnings;
        warnings.extend(graph.warnings.iter().cloned());
        let repo = RepoFacts {
            name: repo_name(root),
            files_indexed: graph.nodes.len(),
        };
        let mut findings = verify_all(root, ingested.candidates, &graph, config, backend)?;
        findings.extend(ingested.unlocated.iter().map(|u| unlocated_verdict(u, repo.clone())));
        findings.sort_by(|a, b| {
            (&a.candidate.location.file_path, a.candidate.location.line, &a.candidate.id).cmp(&(
                &b.candidate.location.file_path,
                b.candidate.location.line,
                &b.candidate.id,
            ))
        });
        Ok(RunReport {
            findings,
            warnings,
            files_scanned: 0,
            graph,
        })
    })
}
