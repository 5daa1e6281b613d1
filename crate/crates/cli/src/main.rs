//! `keysift`: find secrets in a repository and sort real leaks from noise.
//!
//! Exit codes: 0 no true leak (or benchmark at or above `--min-f1`),
//! 1 a true leak was found (or the benchmark fell short), 2 an error.

mod bench_cmd;
mod output;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use keysift::backend::{self, AnalysisBackend, PriceTable};
use keysift::bench::{
    load_manifest, load_token_log, render_report, replay_token_log, BenchReport, ReportFormat, ScoreOptions,
    UndeterminedPolicy, REPORT_SCHEMA_VERSION,
};
use keysift::config::{BackendConfig, HttpConfig, LevelSet};
use keysift::pipeline::{scan_and_verify, verify_ingested, RunReport};
use keysift::screener::{ingest_external_findings, Screener};
use keysift::ScanConfig;

use output::Masker;

#[derive(Parser)]
#[command(name = "keysift", about = "Detect and verify secret leaks in source repositories", disable_version_flag = true)]
struct Cli {
    /// Print name, version and report schema version as JSON, then exit.
    #[arg(long, global = true)]
    version: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Screen a repository and verify every candidate.
    Scan {
        root: PathBuf,
        #[command(flatten)]
        run: RunFlags,
    },
    /// Verify findings from another scanner (one JSON record per line).
    Verify {
        findings: PathBuf,
        /// Repository the findings refer to.
        #[arg(long, default_value = ".")]
        root: PathBuf,
        #[command(flatten)]
        run: RunFlags,
    },
    /// Score the tool against a labeled manifest.
    Bench {
        manifest: PathBuf,
        #[command(flatten)]
        run: RunFlags,
        /// Exit 1 when the F1 score of the last row is below this value.
        #[arg(long)]
        min_f1: Option<f64>,
        /// Emit one row per level set (1, 12, 123).
        #[arg(long)]
        ablation: bool,
        /// How undetermined verdicts enter the confusion matrix.
        #[arg(long, value_enum, default_value_t = Policy::CountAgainst)]
        undetermined: Policy,
        /// Also match findings to manifest entries by line.
        #[arg(long)]
        span_level: bool,
    },
    /// Render a saved benchmark report, or replay a token log into costs.
    Report {
        /// Benchmark report written by `bench --format json`.
        report: Option<PathBuf>,
        /// Token log to replay instead (one JSON record per repository).
        #[arg(long, conflicts_with = "report")]
        token_log: Option<PathBuf>,
        /// Model whose prices apply to the token log.
        #[arg(long, default_value = "gpt-4o-2024-08-06")]
        model: String,
        /// Replacement price table (TOML).
        #[arg(long)]
        prices: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendKind {
    Deterministic,
    Http,
}

#[derive(Clone, Copy, ValueEnum)]
enum Policy {
    CountAgainst,
    Exclude,
}

#[derive(Args)]
struct RunFlags {
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Configuration file (TOML); flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    backend: Option<BackendKind>,
    /// Chat-completions endpoint for the http backend.
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    model: Option<String>,
    /// Bound on agent runs per candidate.
    #[arg(long)]
    max_iters: Option<usize>,
    /// Verification levels: 1, 12 or 123.
    #[arg(long)]
    levels: Option<LevelSet>,
    /// Same as `--levels 1`.
    #[arg(long, conflicts_with = "levels")]
    no_advanced: bool,
    /// Write the reference graph as JSON to this path.
    #[arg(long)]
    dump_graph: Option<PathBuf>,
    /// Replace secret values by digests in every output.
    #[arg(long)]
    redact: bool,
    /// Worker threads (default: one per logical CPU).
    #[arg(long)]
    jobs: Option<usize>,
}

impl RunFlags {
    fn config(&self) -> keysift::Result<ScanConfig> {
        let mut config = match &self.config {
            Some(p) => ScanConfig::load(p)?,
            None => ScanConfig::default(),
        };
        match self.backend {
            Some(BackendKind::Deterministic) => config.backend = BackendConfig::Deterministic,
            Some(BackendKind::Http) if !matches!(config.backend, BackendConfig::Http(_)) => {
                config.backend = BackendConfig::Http(HttpConfig::default());
            }
            _ => {}
        }
        if let BackendConfig::Http(http) = &mut config.backend {
            if let Some(e) = &self.endpoint {
                http.endpoint = e.clone();
            }
            if let Some(m) = &self.model {
                http.model = m.clone();
            }
        }
        if let Some(n) = self.max_iters {
            config.max_iterations = n;
        }
        if let Some(l) = self.levels {
            config.levels = l;
        }
        if self.no_advanced {
            config.levels = LevelSet::Intrinsic;
        }
        if self.redact {
            config.redact = true;
        }
        if self.jobs.is_some() {
            config.jobs = self.jobs;
        }
        config.validate()?;
        Ok(config)
    }
}

/// An error that ends the process with exit code 2.
struct Fatal(String);

impl<E: std::fmt::Display> From<E> for Fatal {
    fn from(e: E) -> Self {
        Fatal(e.to_string())
    }
}

fn build_backend(config: &ScanConfig) -> Result<Box<dyn AnalysisBackend>, Fatal> {
    Ok(backend::from_config(&config.backend)?)
}

fn price_table(path: Option<&Path>) -> Result<PriceTable, Fatal> {
    Ok(match path {
        Some(p) => PriceTable::load(p)?,
        None => PriceTable::default(),
    })
}

fn emit_run(mut report: RunReport, run: &RunFlags, config: &ScanConfig) -> Result<u8, Fatal> {
    for f in &mut report.findings {
        f.verdict.pool_snapshot.normalize_timestamps();
    }
    if let Some(path) = &run.dump_graph {
        std::fs::write(path, report.graph.to_json_pretty())
            .map_err(|e| Fatal(format!("cannot write {}: {e}", path.display())))?;
    }
    let masker = config.redact.then(|| Masker::new(&report.findings));
    let stderr = std::io::stderr();
    let mut err = stderr.lock();
    for w in &report.warnings {
        let w = masker.as_ref().map_or_else(|| w.clone(), |m| m.mask(w));
        let _ = writeln!(err, "warning: {w}");
    }
    let text = match run.format {
        Format::Json => output::render_json(&report, masker.as_ref()),
        Format::Text => output::render_text(&report, masker.as_ref()),
    };
    std::io::stdout().write_all(text.as_bytes())?;
    Ok(u8::from(report.has_true_leak()))
}

fn cmd_scan(root: &Path, run: &RunFlags) -> Result<u8, Fatal> {
    let config = run.config()?;
    let backend = build_backend(&config)?;
    let report = scan_and_verify(root, &config, backend.as_ref())?;
    emit_run(report, run, &config)
}

fn cmd_verify(findings: &Path, root: &Path, run: &RunFlags) -> Result<u8, Fatal> {
    let config = run.config()?;
    let backend = build_backend(&config)?;
    let window = Screener::new(&config).window();
    let ingested = ingest_external_findings(findings, root, &config.aliases, window)?;
    let report = verify_ingested(root, ingested, &config, backend.as_ref())?;
    emit_run(report, run, &config)
}

struct BenchArgs<'a> {
    manifest: &'a Path,
    run: &'a RunFlags,
    min_f1: Option<f64>,
    ablation: bool,
    policy: Policy,
    span_level: bool,
}

fn cmd_bench(args: BenchArgs) -> Result<u8, Fatal> {
    let config = args.run.config()?;
    let manifest = load_manifest(args.manifest)?;
    let backend = build_backend(&config)?;
    let prices = bench_cmd::prices_for(&price_table(config.price_table.as_deref())?, backend.model());
    let level_sets = if args.ablation {
        vec![LevelSet::Intrinsic, LevelSet::IntrinsicContext, LevelSet::All]
    } else {
        vec![config.levels]
    };
    let opts = ScoreOptions {
        policy: match args.policy {
            Policy::CountAgainst => UndeterminedPolicy::CountAgainst,
            Policy::Exclude => UndeterminedPolicy::Exclude,
        },
        span_level: args.span_level,
    };
    let report = bench_cmd::run_bench(
        args.manifest,
        &manifest,
        &config,
        &level_sets,
        opts,
        backend.as_ref(),
        prices,
    );
    for s in &report.skipped {
        eprintln!("skipped repository {}: {}", s.repo, s.error);
    }
    print_bench(&report, args.run.format)?;
    let f1 = report.rows.last().and_then(|r| r.metrics.overall.f1);
    Ok(match args.min_f1 {
        Some(min) if f1.is_none_or(|f| f < min) => 1,
        _ => 0,
    })
}

fn print_bench(report: &BenchReport, format: Format) -> Result<(), Fatal> {
    let format = match format {
        Format::Json => ReportFormat::Json,
        Format::Text => ReportFormat::Text,
    };
    std::io::stdout().write_all(render_report(report, format).as_bytes())?;
    Ok(())
}

fn cmd_report(
    report: Option<&Path>,
    token_log: Option<&Path>,
    model: &str,
    prices: Option<&Path>,
    format: Format,
) -> Result<u8, Fatal> {
    match (report, token_log) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path).map_err(|e| Fatal(format!("cannot read {}: {e}", path.display())))?;
            let report: BenchReport = serde_json::from_str(&text)
                .map_err(|e| Fatal(format!("{} is not a benchmark report: {e}", path.display())))?;
            if report.schema_version != REPORT_SCHEMA_VERSION {
                return Err(Fatal(format!(
                    "report schema version {} is not supported (expected {REPORT_SCHEMA_VERSION})",
                    report.schema_version
                )));
            }
            print_bench(&report, format)?;
        }
        (None, Some(path)) => {
            let log = load_token_log(path)?;
            let unit = price_table(prices)?
                .lookup(model)
                .ok_or_else(|| Fatal(format!("no price for model `{model}`")))?;
            let replay = replay_token_log(&log, unit);
            let out = match format {
                Format::Json => {
                    let mut value = serde_json::to_value(&replay)?;
                    value["schema_version"] = REPORT_SCHEMA_VERSION.into();
                    value["model"] = model.into();
                    serde_json::to_string_pretty(&value)? + "\n"
                }
                Format::Text => format!(
                    "model {model}: {} repositories, {} prompt + {} completion tokens\n\
                     total cost ${:.2}, average ${:.3} per repository\n\
                     total time {:.2} min, average {:.2} min per repository\n",
                    replay.repos,
                    replay.total.prompt_tokens,
                    replay.total.completion_tokens,
                    replay.total.estimated_dollars,
                    replay.avg_dollars.unwrap_or(0.0),
                    replay.total.wall_seconds / 60.0,
                    replay.avg_seconds.unwrap_or(0.0) / 60.0,
                ),
            };
            std::io::stdout().write_all(out.as_bytes())?;
        }
        _ => return Err(Fatal("give a benchmark report or --token-log".into())),
    }
    Ok(0)
}

fn run(cli: Cli) -> Result<u8, Fatal> {
    if cli.version {
        println!(
            "{}",
            serde_json::json!({
                "name": "keysift",
                "version": env!("CARGO_PKG_VERSION"),
                "schema_version": REPORT_SCHEMA_VERSION,
            })
        );
        return Ok(0);
    }
    let Some(command) = cli.command else {
        return Err(Fatal("no command given; see --help".into()));
    };
    match &command {
        Command::Scan { root, run } => cmd_scan(root, run),
        Command::Verify { findings, root, run } => cmd_verify(findings, root, run),
        Command::Bench {
            manifest,
            run,
            min_f1,
            ablation,
            undetermined,
            span_level,
        } => cmd_bench(BenchArgs {
            manifest,
            run,
            min_f1: *min_f1,
            ablation: *ablation,
            policy: *undetermined,
            span_level: *span_level,
        }),
        Command::Report {
            report,
            token_log,
            model,
            prices,
            format,
        } => cmd_report(report.as_deref(), token_log.as_deref(), model, prices.as_deref(), *format),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Fatal(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
