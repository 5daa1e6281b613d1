use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::pool::{Agent, MemoryPool};
use super::prompt::{render, PromptTemplates};
use crate::advanced_check::AdvancedReport;
use crate::backend::{evidence_block, parse_reply, AnalysisBackend, Prompt};
use crate::basic_check::{BasicReport, Suspicion};
use crate::types::{Classification, Confidence, FileKind, SecretType};

/// Entropy below which a genuine-looking key still gets a context check.
pub const LOW_ENTROPY_BITS: f64 = 3.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "decision", rename_all = "snake_case")]
pub enum Decision {
    Dispatch {
        agent: Agent,
    },
    Final {
        classification: Classification,
        confidence: Confidence,
        reasons: Vec<String>,
    },
}

impl Decision {
    pub fn dispatch(agent: Agent) -> Self {
        Decision::Dispatch { agent }
    }

    pub fn finish(classification: Classification, confidence: Confidence, reasons: Vec<String>) -> Self {
        debug_assert!(!reasons.is_empty());
        Decision::Final {
            classification,
            confidence,
            reasons,
        }
    }
}

/// Next step after a decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Path {
    Basic,
    Advanced,
    End,
}

pub fn select_path(d: &Decision) -> Path {
    match d {
        Decision::Dispatch { agent: Agent::Basic } => Path::Basic,
        Decision::Dispatch { agent: Agent::Advanced } => Path::Advanced,
        Decision::Final { .. } => Path::End,
    }
}

/// What the commander sees: tier-1 facts and the latest tier-3 conclusions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommanderState {
    pub iteration: usize,
    pub secret_type: SecretType,
    pub file_path: String,
    pub file_kind: FileKind,
    pub entropy_bits: f64,
    pub advanced_available: bool,
    pub basic: Option<BasicReport>,
    pub advanced: Option<AdvancedReport>,
}

impl CommanderState {
    pub fn from_pool(pool: &MemoryPool, iteration: usize, advanced_available: bool) -> Self {
        let c = pool.candidate();
        CommanderState {
            iteration,
            secret_type: c.secret_type,
            file_path: c.location.file_path.clone(),
            file_kind: c.context.file_kind,
            entropy_bits: c.entropy_bits,
            advanced_available,
            basic: pool.latest_basic().cloned(),
            advanced: pool.latest_advanced().cloned(),
        }
    }

    pub fn evidence(&self) -> Value {
        let mut v = json!(self);
        v.as_object_mut()
            .expect("state is an object")
            .insert("task".into(), json!("commander"));
        v
    }
}

/// The reference commander policy.
pub fn decide(state: &CommanderState) -> Decision {
    if let Some(adv) = &state.advanced {
        let confidence = if adv.low_confidence { Confidence::Low } else { Confidence::High };
        let mut reasons = adv.reasons();
        return match adv.recommendation {
            Suspicion::Genuine => Decision::finish(Classification::TrueLeak, confidence, reasons),
            Suspicion::FalsePositiveIndicated => {
                Decision::finish(Classification::FalsePositive, confidence, reasons)
            }
            Suspicion::Unclear => {
                reasons.push("evidence inconclusive; flagged for review".to_string());
                Decision::finish(Classification::TrueLeak, Confidence::Low, reasons)
            }
        };
    }
    let Some(basic) = &state.basic else {
        return Decision::dispatch(Agent::Basic);
    };
    let mut reasons = basic.cited_evidence.clone();
    if reasons.is_empty() {
        reasons.push("basic check cited no evidence".to_string());
    }
    match basic.suspicion {
        Suspicion::FalsePositiveIndicated => {
            Decision::finish(Classification::FalsePositive, Confidence::High, reasons)
        }
        Suspicion::Genuine => {
            let needs_context = matches!(
                state.file_kind,
                FileKind::Document | FileKind::KeyMaterial | FileKind::Config
            ) || state.entropy_bits < LOW_ENTROPY_BITS;
            if !needs_context {
                Decision::finish(Classification::TrueLeak, Confidence::High, reasons)
            } else if state.advanced_available {
                Decision::dispatch(Agent::Advanced)
            } else {
                reasons.push("context and reference checks disabled".to_string());
                Decision::finish(Classification::TrueLeak, Confidence::Low, reasons)
            }
        }
        Suspicion::Unclear => {
            if state.advanced_available {
                Decision::dispatch(Agent::Advanced)
            } else {
                reasons.push("level-1 evidence inconclusive; flagged for review".to_string());
                Decision::finish(Classification::TrueLeak, Confidence::Low, reasons)
            }
        }
    }
}

pub fn decision_reply(d: &Decision) -> Value {
    json!(d)
}

/// Parse and validate a structured commander reply.
pub fn parse_decision(reply: &Map<String, Value>) -> Result<Decision, String> {
    let decision: Decision =
        serde_json::from_value(Value::Object(reply.clone())).map_err(|e| format!("invalid decision: {e}"))?;
    if let Decision::Final {
        classification,
        reasons,
        ..
    } = &decision
    {
        if *classification == Classification::Undetermined {
            return Err("commander may not abstain".into());
        }
        if reasons.iter().all(|r| r.trim().is_empty()) {
            return Err("final decision without reasons".into());
        }
    }
    Ok(decision)
}

pub fn commander_prompt(templates: &PromptTemplates, pool: &MemoryPool, state: &CommanderState) -> crate::error::Result<Prompt> {
    let c = pool.candidate();
    let facts = format!(
        "type: {}\nfile: {}:{} ({})\nentropy: {:.3} bits/char\nadvanced agent available: {}\n--- before ---\n{}\n--- after ---\n{}",
        c.secret_type,
        c.location.file_path,
        c.location.line,
        c.context.file_kind,
        c.entropy_bits,
        state.advanced_available,
        c.context.before,
        c.context.after,
    );
    let text = render(
        &templates.p_gen,
        &[
            ("key", &c.raw_value),
            ("context", &facts),
            ("tool_results", &evidence_block(&state.evidence())),
        ],
    )?;
    Ok(Prompt::new(text).with_sensitive([c.raw_value.clone()]))
}

/// One commander step. Returns the decision and, when the reply could not
/// be used, a note explaining the fail-safe taken.
pub fn commander_decide(
    pool: &MemoryPool,
    templates: &PromptTemplates,
    backend: &dyn AnalysisBackend,
    iteration: usize,
    advanced_available: bool,
) -> (Decision, Option<String>) {
    let state = CommanderState::from_pool(pool, iteration, advanced_available);
    let parsed = commander_prompt(templates, pool, &state)
        .map_err(|e| e.to_string())
        .and_then(|p| backend.complete(&p).map_err(|e| e.to_string()))
        .and_then(|c| parse_reply(&c.text).ok_or_else(|| "reply contains no JSON object".to_string()))
        .and_then(|m| parse_decision(&m))
        .and_then(|d| match d {
            Decision::Dispatch { agent: Agent::Advanced } if !advanced_available => {
                Err("dispatched the advanced agent while it is disabled".into())
            }
            other => Ok(other),
        });
    match parsed {
        Ok(Decision::Final { .. }) if pool.tier3.is_empty() => (
            Decision::dispatch(Agent::Basic),
            Some(format!("iteration {iteration}: final decision before any check; basic check dispatched")),
        ),
        Ok(d) => (d, None),
        Err(err) if iteration == 0 => (
            Decision::dispatch(Agent::Basic),
            Some(format!("iteration 0: commander reply unusable ({err}); basic check dispatched")),
        ),
        Err(err) => {
            let note = format!("iteration {iteration}: commander reply unusable ({err})");
            (
                Decision::finish(Classification::Undetermined, Confidence::Low, vec![note.clone()]),
                Some(note),
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(file_kind: FileKind, entropy: f64, basic: Option<Suspicion>) -> CommanderState {
        CommanderState {
            iteration: 1,
            secret_type: SecretType::AWS,
            file_path: "x".into(),
            file_kind,
            entropy_bits: entropy,
            advanced_available: true,
            basic: basic.map(|s| BasicReport {
                suspicion: s,
                cited_evidence: vec!["e".into()],
                error: None,
            }),
            advanced: None,
        }
    }

    #[test]
    fn rule_table() {
        assert_eq!(decide(&state(FileKind::Code, 4.0, None)), Decision::dispatch(Agent::Basic));
        assert!(matches!(
            decide(&state(FileKind::Code, 4.0, Some(Suspicion::FalsePositiveIndicated))),
            Decision::Final { classification: Classification::FalsePositive, confidence: Confidence::High, .. }
        ));
        assert_eq!(
            decide(&state(FileKind::Document, 4.0, Some(Suspicion::Genuine))),
            Decision::dispatch(Agent::Advanced)
        );
        assert_eq!(
            decide(&state(FileKind::Code, 3.0, Some(Suspicion::Genuine))),
            Decision::dispatch(Agent::Advanced)
        );
        assert!(matches!(
            decide(&state(FileKind::Code, 4.0, Some(Suspicion::Genuine))),
            Decision::Final { classification: Classification::TrueLeak, confidence: Confidence::High, .. }
        ));
        let mut s = state(FileKind::KeyMaterial, 5.0, Some(Suspicion::Genuine));
        s.advanced_available = false;
        assert!(matches!(
            decide(&s),
            Decision::Final { classification: Classification::TrueLeak, confidence: Confidence::Low, .. }
        ));
    }

    #[test]
    fn select_path_is_total() {
        assert_eq!(select_path(&Decision::dispatch(Agent::Basic)), Path::Basic);
        assert_eq!(select_path(&Decision::dispatch(Agent::Advanced)), Path::Advanced);
        let f = Decision::finish(Classification::TrueLeak, Confidence::High, vec!["r".into()]);
        assert_eq!(select_path(&f), Path::End);
    }

    #[test]
    fn reply_round_trip_and_validation() {
        for d in [
            Decision::dispatch(Agent::Advanced),
            Decision::finish(Classification::FalsePositive, Confidence::Low, vec!["r".into()]),
        ] {
            let reply = decision_reply(&d);
            assert_eq!(parse_decision(reply.as_object().unwrap()).unwrap(), d);
        }
        let bad = json!({"decision": "final", "classification": "true_leak", "confidence": "high", "reasons": []});
        assert!(parse_decision(bad.as_object().unwrap()).is_err());
        let bad = json!({"decision": "dispatch", "agent": "oracle"});
        assert!(parse_decision(bad.as_object().unwrap()).is_err());
    }
}
