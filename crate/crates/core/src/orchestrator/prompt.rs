use crate::error::{Error, Result};

pub const COMMANDER_TEMPLATE: &str = include_str!("../../data/prompts/commander.txt");
pub const AGENT_TEMPLATE: &str = include_str!("../../data/prompts/agent.txt");

/// Slot names every template may use.
pub const SLOTS: [&str; 3] = ["key", "context", "tool_results"];

/// Decision and agent instruction templates with `{{slot}}` markers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplates {
    pub p_gen: String,
    pub p_agent: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        PromptTemplates::new(COMMANDER_TEMPLATE, AGENT_TEMPLATE).expect("shipped templates are valid")
    }
}

/// Drop the leading `# template:` version line, if any.
fn strip_header(text: &str) -> &str {
    match text.strip_prefix("# template:") {
        Some(rest) => rest.split_once('\n').map_or("", |(_, body)| body),
        None => text,
    }
}

/// Slot names referenced by `template`, in order of appearance.
pub fn slot_names(template: &str) -> Vec<&str> {
    let mut names = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find("{{") {
        let after = &rest[open + 2..];
        match after.find("}}") {
            Some(close) => {
                names.push(after[..close].trim());
                rest = &after[close + 2..];
            }
            None => break,
        }
    }
    names
}

impl PromptTemplates {
    /// Validate both templates: every slot must be one of [`SLOTS`].
    pub fn new(p_gen: &str, p_agent: &str) -> Result<Self> {
        for (which, t) in [("commander", p_gen), ("agent", p_agent)] {
            if let Some(bad) = slot_names(t).into_iter().find(|s| !SLOTS.contains(s)) {
                return Err(Error::Template(format!("{which} template uses unknown slot `{bad}`")));
            }
        }
        Ok(PromptTemplates {
            p_gen: strip_header(p_gen).to_string(),
            p_agent: strip_header(p_agent).to_string(),
        })
    }
}

/// Substitute `{{name}}` markers in a single left-to-right pass, so bound
/// values that themselves contain braces are never re-expanded.
pub fn render(template: &str, bindings: &[(&str, &str)]) -> Result<String> {
    let mut out = String::with_capacity(template.len() + 256);
    let mut rest = template;
    while let Some(open) = rest.find("{{") {
        out.push_str(&rest[..open]);
        let after = &rest[open + 2..];
        let Some(close) = after.find("}}") else {
            return Err(Error::Template("unterminated slot marker".into()));
        };
        let name = after[..close].trim();
        let value = bindings
            .iter()
            .find(|(k, _)| *k == name)
            .map(|(_, v)| *v)
            .ok_or_else(|| Error::Template(format!("slot `{name}` is unbound")))?;
        out.push_str(value);
        rest = &after[close + 2..];
    }
    out.push_str(rest);
    Ok(out)
}
