//! Benchmark runs over a labeled manifest.

use std::path::{Path, PathBuf};
use std::time::Instant;

use keysift::backend::{estimate_cost, AnalysisBackend, MeterSnapshot, PriceTable, UnitPrices};
use keysift::bench::{
    match_and_score, BenchReport, BenchRow, CostSummary, LabeledManifest, ScoreOptions, ScoredFinding, SkipNotice,
    REPORT_SCHEMA_VERSION,
};
use keysift::config::LevelSet;
use keysift::pipeline::scan_and_verify;
use keysift::ScanConfig;

fn delta(after: MeterSnapshot, before: MeterSnapshot) -> MeterSnapshot {
    MeterSnapshot {
        requests: after.requests - before.requests,
        prompt_tokens: after.prompt_tokens - before.prompt_tokens,
        completion_tokens: after.completion_tokens - before.completion_tokens,
        wall_nanos: after.wall_nanos - before.wall_nanos,
    }
}

/// Prices for the backend's model; unknown models are costed at zero with a
/// warning rather than failing the run.
pub fn prices_for(table: &PriceTable, model: &str) -> UnitPrices {
    table.lookup(model).unwrap_or_else(|| {
        log::warn!("no price for model `{model}`; costs reported as zero");
        UnitPrices {
            input_per_1k: 0.0,
            output_per_1k: 0.0,
        }
    })
}

/// Repository directory for a manifest `repo_path`, relative to the
/// manifest's own directory.
fn repo_dir(manifest_path: &Path, repo: &str) -> PathBuf {
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    base.join(repo)
}

pub fn run_bench(
    manifest_path: &Path,
    manifest: &LabeledManifest,
    config: &ScanConfig,
    level_sets: &[LevelSet],
    opts: ScoreOptions,
    backend: &dyn AnalysisBackend,
    prices: UnitPrices,
) -> BenchReport {
    let repos = manifest.repos();
    let mut skipped: Vec<SkipNotice> = Vec::new();
    let mut rows = Vec::new();
    let mut extra = Vec::new();

    for &levels in level_sets {
        let config = ScanConfig {
            levels,
            ..config.clone()
        };
        let before = backend.meter().snapshot();
        let started = Instant::now();
        let mut findings = Vec::new();
        let mut scanned = 0;
        for repo in &repos {
            if skipped.iter().any(|s| s.repo == *repo) {
                continue;
            }
            match scan_and_verify(&repo_dir(manifest_path, repo), &config, backend) {
                Ok(report) => {
                    scanned += 1;
                    findings.extend(report.findings.into_iter().map(|f| ScoredFinding {
                        repo: repo.to_string(),
                        file: f.candidate.location.file_path,
                        secret_type: f.candidate.secret_type,
                        line: f.candidate.location.line,
                        classification: f.verdict.classification,
                    }));
                }
                Err(e) => skipped.push(SkipNotice {
                    repo: repo.to_string(),
                    error: e.to_string(),
                }),
            }
        }
        // Entries of skipped repositories are left out of the matrix.
        let kept = LabeledManifest {
            entries: manifest
                .entries
                .iter()
                .filter(|e| !skipped.iter().any(|s| s.repo == e.repo_path))
                .cloned()
                .collect(),
        };
        let scored = match_and_score(&findings, &kept, opts);
        let mut cost = estimate_cost(&delta(backend.meter().snapshot(), before), prices);
        // Report elapsed time for the whole row, not just backend calls.
        cost.wall_seconds = started.elapsed().as_secs_f64();
        rows.push(BenchRow {
            levels: levels.to_string(),
            metrics: scored.metrics,
            cost: CostSummary::new(&cost, scanned),
        });
        if extra.is_empty() {
            extra = scored.extra_findings;
        }
    }

    BenchReport {
        schema_version: REPORT_SCHEMA_VERSION,
        rows,
        skipped,
        extra_findings: extra,
    }
}
