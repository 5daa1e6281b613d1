//! Level 1: checks on the key value itself. The tools produce evidence; the
//! backend turns that evidence into a suspicion, never a verdict.

mod format;
mod placeholder;
mod readability;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub use format::{check_key_format, FormatCheckResult, FormatChecker};
pub use placeholder::{
    credential_segments, detect_placeholders, parse_word_list, PlaceholderDetector,
    PlaceholderResult, DEFAULT_PLACEHOLDERS,
};
pub use readability::{
    alphabetic_runs, readability_score, Lexicon, ReadabilityHint, ReadabilityResult,
    DEFAULT_LEXICON, MIN_RUN_LEN, READABLE_THRESHOLD,
};

use crate::backend::{parse_reply, AnalysisBackend};
use crate::config::ScanConfig;
use crate::error::{Error, Result};
use crate::orchestrator::{agent_prompt, Agent, Conclusion, ConclusionBody, MemoryPool, PromptTemplates, Tool};
use crate::types::{CandidateSecret, SecretType};
use crate::uri::split_uri;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suspicion {
    Genuine,
    FalsePositiveIndicated,
    Unclear,
}

impl Suspicion {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "genuine" => Some(Suspicion::Genuine),
            "false_positive_indicated" => Some(Suspicion::FalsePositiveIndicated),
            "unclear" => Some(Suspicion::Unclear),
            _ => None,
        }
    }
}

/// Tier-3 conclusion of the basic agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasicReport {
    pub suspicion: Suspicion,
    pub cited_evidence: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Raw results of the three level-1 tools.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasicEvidence {
    pub format: FormatCheckResult,
    pub placeholder: PlaceholderResult,
    pub readability: ReadabilityResult,
}

#[derive(Debug, Clone)]
pub struct BasicTools {
    pub format: FormatChecker,
    pub placeholders: PlaceholderDetector,
    pub lexicon: Lexicon,
}

impl Default for BasicTools {
    fn default() -> Self {
        BasicTools {
            format: FormatChecker::default(),
            placeholders: PlaceholderDetector::default(),
            lexicon: Lexicon::shipped().clone(),
        }
    }
}

impl BasicTools {
    /// Shipped tools, with word lists replaced where the config names a file.
    pub fn from_config(config: &ScanConfig) -> Result<Self> {
        let mut tools = BasicTools::default();
        if let Some(path) = &config.lexicon {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            tools.lexicon = Lexicon::parse(&text);
            if tools.lexicon.is_empty() {
                return Err(Error::Config(format!("lexicon {} is empty", path.display())));
            }
        }
        if let Some(path) = &config.placeholder_lexicon {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            tools.placeholders = PlaceholderDetector::new(parse_word_list(&text));
        }
        Ok(tools)
    }

    /// Run all three tools. Pure: nothing outside the arguments is read.
    pub fn evaluate(&self, t: SecretType, raw: &str) -> BasicEvidence {
        BasicEvidence {
            format: self.format.check(t, raw),
            placeholder: self.placeholders.detect(raw),
            readability: readability_score(&secret_body(t, raw), &self.lexicon),
        }
    }
}

/// The part of a value that carries the secret: the token after its fixed
/// prefix, the password of a URI, or the body lines of a PEM block.
pub fn secret_body(t: SecretType, raw: &str) -> String {
    match t {
        SecretType::AWS => raw.get(4..).unwrap_or(raw).to_string(),
        SecretType::GitHub | SecretType::Huggingface => {
            raw.split_once('_').map_or(raw, |(_, b)| b).to_string()
        }
        SecretType::OpenAI => raw.strip_prefix("sk-").unwrap_or(raw).to_string(),
        SecretType::PrivateKey => raw
            .replace("\\r\\n", "\n")
            .replace("\\n", "\n")
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with("-----") && !l.contains(": "))
            .collect::<Vec<_>>()
            .join("\n"),
        _ => split_uri(raw)
            .and_then(|p| p.effective_password())
            .unwrap_or(raw)
            .to_string(),
    }
}

/// Level-1 synthesis over the evidence object the basic agent sends. This is
/// the deterministic backend's rule table.
pub fn synthesize(evidence: &BasicEvidence) -> BasicReport {
    let mut cited = Vec::new();
    if let Some(reason) = &evidence.format.failure_reason {
        cited.push(format!("key format: {reason}"));
    }
    if evidence.placeholder.found {
        cited.push(format!(
            "placeholder tokens: {}",
            evidence.placeholder.matched_tokens.join(", ")
        ));
    }
    if evidence.readability.verdict_hint == ReadabilityHint::Readable {
        cited.push(format!(
            "readable value: word fraction {:.2}",
            evidence.readability.word_fraction
        ));
    }
    if !cited.is_empty() {
        return BasicReport {
            suspicion: Suspicion::FalsePositiveIndicated,
            cited_evidence: cited,
            error: None,
        };
    }
    BasicReport {
        suspicion: Suspicion::Genuine,
        cited_evidence: vec![
            format!("format conforms to `{}`", evidence.format.strict_rule_name),
            "no placeholder tokens".to_string(),
            format!("opaque value: word fraction {:.2}", evidence.readability.word_fraction),
        ],
        error: None,
    }
}

fn parse_basic_reply(text: &str) -> std::result::Result<BasicReport, String> {
    let reply = parse_reply(text).ok_or("reply contains no JSON object")?;
    let suspicion = reply
        .get("suspicion")
        .and_then(Value::as_str)
        .and_then(Suspicion::parse)
        .ok_or("reply has no valid `suspicion`")?;
    let cited_evidence = reply
        .get("cited_evidence")
        .and_then(Value::as_array)
        .map(|a| a.iter().filter_map(Value::as_str).map(str::to_string).collect())
        .unwrap_or_default();
    Ok(BasicReport {
        suspicion,
        cited_evidence,
        error: None,
    })
}

/// Run the basic agent for the pool's candidate: three tool transcripts go to
/// tier 2, one synthesized conclusion to tier 3.
pub fn run_basic_check(
    pool: &mut MemoryPool,
    tools: &BasicTools,
    templates: &PromptTemplates,
    backend: &dyn AnalysisBackend,
    iteration: usize,
) -> BasicReport {
    let c: CandidateSecret = pool.candidate().clone();
    let ev = tools.evaluate(c.secret_type, &c.raw_value);
    let input = format!("{}\0{}", c.secret_type, c.raw_value);
    for (tool, output) in [
        (Tool::KeyFormat, json!(ev.format)),
        (Tool::Placeholder, json!(ev.placeholder)),
        (Tool::Readability, json!(ev.readability)),
    ] {
        pool.record_transcript(tool, Agent::Basic, iteration, &input, output);
    }

    let evidence = json!({
        "task": "basic_synthesis",
        "secret_type": c.secret_type,
        "file_kind": c.context.file_kind,
        "format": ev.format,
        "placeholder": ev.placeholder,
        "readability": ev.readability,
    });
    let report = agent_prompt(templates, &c, &evidence)
        .map_err(|e| e.to_string())
        .and_then(|prompt| backend.complete(&prompt).map_err(|e| e.to_string()))
        .and_then(|completion| parse_basic_reply(&completion.text))
        .unwrap_or_else(|err| BasicReport {
            suspicion: Suspicion::Unclear,
            cited_evidence: vec!["basic synthesis unavailable".to_string()],
            error: Some(err),
        });

    pool.append_conclusion(Conclusion {
        agent: Agent::Basic,
        iteration,
        tools: vec![Tool::KeyFormat, Tool::Placeholder, Tool::Readability],
        body: ConclusionBody::Basic(report.clone()),
    })
    .expect("basic transcripts were just recorded");
    report
}
