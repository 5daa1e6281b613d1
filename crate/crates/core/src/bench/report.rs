use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::metrics::{EvalMetrics, GroupMetrics};
use super::ScoredFinding;
use crate::backend::CostReport;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Json,
    Text,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostSummary {
    pub repos: usize,
    pub requests: u64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub total_dollars: f64,
    pub avg_dollars: Option<f64>,
    pub total_seconds: f64,
    pub avg_seconds: Option<f64>,
}

impl CostSummary {
    pub fn new(cost: &CostReport, repos: usize) -> Self {
        let avg = |v: f64| (repos > 0).then(|| v / repos as f64);
        CostSummary {
            repos,
            requests: cost.total_requests,
            prompt_tokens: cost.prompt_tokens,
            completion_tokens: cost.completion_tokens,
            total_dollars: cost.estimated_dollars,
            avg_dollars: avg(cost.estimated_dollars),
            total_seconds: cost.wall_seconds,
            avg_seconds: avg(cost.wall_seconds),
        }
    }
}

/// Metrics and cost for one configuration of verification levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub levels: String,
    pub metrics: EvalMetrics,
    pub cost: CostSummary,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipNotice {
    pub repo: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema_version: u32,
    pub rows: Vec<BenchRow>,
    pub skipped: Vec<SkipNotice>,
    pub extra_findings: Vec<ScoredFinding>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"))
}

fn metrics_table(out: &mut String, title: &str, rows: &[(&str, &GroupMetrics)]) {
    let width = rows.iter().map(|(g, _)| g.len()).max().unwrap_or(0).max(title.len());
    let _ = writeln!(
        out,
        "{title:<width$}  {:>5} {:>5} {:>5} {:>5}  {:>9} {:>9} {:>9} {:>9}",
        "tp", "fp", "fn", "tn", "accuracy", "precision", "recall", "f1"
    );
    for (group, m) in rows {
        let c = m.counts;
        let _ = writeln!(
            out,
            "{group:<width$}  {:>5} {:>5} {:>5} {:>5}  {:>9} {:>9} {:>9} {:>9}",
            c.tp,
            c.fp,
            c.fn_,
            c.tn,
            fmt_opt(m.accuracy),
            fmt_opt(m.precision),
            fmt_opt(m.recall),
            fmt_opt(m.f1),
        );
    }
}

fn render_text(report: &BenchReport) -> String {
    let mut out = String::new();
    for (i, row) in report.rows.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "levels {}", row.levels);
        metrics_table(&mut out, "overall", &[("all", &row.metrics.overall)]);
        if row.metrics.excluded > 0 {
            let _ = writeln!(out, "excluded (undetermined): {}", row.metrics.excluded);
        }
        for (dim, groups) in &row.metrics.breakdowns {
            out.push('\n');
            let rows: Vec<(&str, &GroupMetrics)> = groups.iter().map(|(g, m)| (g.as_str(), m)).collect();
            metrics_table(&mut out, &format!("by {dim}"), &rows);
        }
        let c = &row.cost;
        let _ = writeln!(
            out,
            "\ncost: {} repos, {} requests, {} prompt + {} completion tokens",
            c.repos, c.requests, c.prompt_tokens, c.completion_tokens
        );
        let _ = writeln!(
            out,
            "total cost ${:.2}  avg cost ${}  total time {:.2} s  avg time {} s",
            c.total_dollars,
            c.avg_dollars.map_or("n/a".into(), |v| format!("{v:.4}")),
            c.total_seconds,
            c.avg_seconds.map_or("n/a".into(), |v| format!("{v:.2}")),
        );
    }
    for s in &report.skipped {
        let _ = writeln!(out, "skipped {}: {}", s.repo, s.error);
    }
    if !report.extra_findings.is_empty() {
        let _ = writeln!(out, "extra findings (not in manifest): {}", report.extra_findings.len());
        for f in &report.extra_findings {
            let _ = writeln!(
                out,
                "  {}/{}:{} {} {}",
                f.repo, f.file, f.line, f.secret_type, f.classification
            );
        }
    }
    out
}

/// Render a bench report. JSON output parses back to an equal report.
pub fn render_report(report: &BenchReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => serde_json::to_string_pretty(report).expect("report serializes") + "\n",
        ReportFormat::Text => render_text(report),
    }
}
