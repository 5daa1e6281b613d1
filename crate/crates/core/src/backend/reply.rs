use serde_json::{Map, Value};

const EVIDENCE_FENCE: &str = "```evidence";

/// Render a structured evidence block for embedding in a prompt.
pub fn evidence_block(evidence: &Value) -> String {
    format!(
        "{EVIDENCE_FENCE}\n{}\n```",
        serde_json::to_string_pretty(evidence).expect("evidence serializes")
    )
}

/// The evidence object embedded in a prompt, if present and well formed.
pub fn extract_evidence(prompt: &str) -> Option<Map<String, Value>> {
    let start = prompt.find(EVIDENCE_FENCE)? + EVIDENCE_FENCE.len();
    let rest = &prompt[start..];
    let end = rest.find("\n```")?;
    match serde_json::from_str(rest[..end].trim()) {
        Ok(Value::Object(map)) => Some(map),
        _ => None,
    }
}

/// Wrap a reply object in a fenced JSON block, the shape models are asked to
/// produce.
pub fn json_reply(value: &Value) -> String {
    format!(
        "```json\n{}\n```",
        serde_json::to_string(value).expect("reply serializes")
    )
}

/// Lenient reply parsing: the first complete JSON object anywhere in the
/// text wins.
pub fn parse_reply(text: &str) -> Option<Map<String, Value>> {
    for (idx, _) in text.match_indices('{') {
        let mut stream = serde_json::Deserializer::from_str(&text[idx..]).into_iter::<Value>();
        if let Some(Ok(Value::Object(map))) = stream.next() {
            return Some(map);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn evidence_round_trip() {
        let ev = json!({"task": "basic_synthesis", "n": [1, 2]});
        let prompt = format!("header\n{}\ntrailer", evidence_block(&ev));
        assert_eq!(Value::Object(extract_evidence(&prompt).unwrap()), ev);
        assert!(extract_evidence("no block here").is_none());
        assert!(extract_evidence("```evidence\nnot json\n```").is_none());
    }

    #[test]
    fn first_valid_object_wins() {
        let text = "Sure! {broken here} then ```json\n{\"a\": 1}\n``` and {\"b\": 2}";
        assert_eq!(parse_reply(text).unwrap()["a"], json!(1));
        assert!(parse_reply("no json at all").is_none());
        assert!(parse_reply("[1, 2]").is_none());
        let nested = r#"{"outer": {"inner": true}}"#;
        assert!(parse_reply(nested).unwrap().contains_key("outer"));
    }
}
