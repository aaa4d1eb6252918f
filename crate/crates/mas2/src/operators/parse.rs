use std::collections::BTreeMap;

/// Contents of the first fenced code block, or the trimmed text.
pub fn strip_code_fences(text: &str) -> String {
    if let Some(start) = text.find("```") {
        let after = &text[start + 3..];
        let body_start = after.find('\n').map(|i| i + 1).unwrap_or(after.len());
        let body = &after[body_start..];
        let end = body.find("```").unwrap_or(body.len());
        return body[..end].trim_matches('\n').trim_end().to_string();
    }
    text.trim().to_string()
}

const REVIEW_FIELDS: [&str; 2] = ["thought", "revised_solution"];

/// Accepts a JSON object or `<thought>`/`<revised_solution>` tags. Both
/// fields must be present and non-empty.
pub fn parse_review(reply: &str) -> Result<BTreeMap<String, String>, String> {
    let mut fields = BTreeMap::new();
    if let (Some(a), Some(b)) = (reply.find('{'), reply.rfind('}')) {
        if let Ok(serde_json::Value::Object(obj)) = serde_json::from_str::<serde_json::Value>(&reply[a..=b]) {
            for f in REVIEW_FIELDS {
                if let Some(v) = obj.get(f) {
                    let text = match v {
                        serde_json::Value::String(s) => s.clone(),
                        other => other.to_string(),
                    };
                    fields.insert(f.to_string(), text);
                }
            }
        }
    }
    if fields.is_empty() {
        for f in REVIEW_FIELDS {
            let (open, close) = (format!("<{f}>"), format!("</{f}>"));
            if let Some(a) = reply.find(&open) {
                let rest = &reply[a + open.len()..];
                if let Some(b) = rest.find(&close) {
                    fields.insert(f.to_string(), rest[..b].trim().to_string());
                }
            }
        }
    }
    let missing: Vec<&str> = REVIEW_FIELDS.iter().copied().filter(|f| fields.get(*f).is_none_or(|v| v.trim().is_empty())).collect();
    if missing.is_empty() {
        Ok(fields)
    } else {
        Err(format!("missing or empty fields: {}", missing.join(", ")))
    }
}

/// Index of the first standalone candidate letter within range.
pub fn parse_ensemble_choice(reply: &str, candidates: usize) -> Option<usize> {
    let chars: Vec<char> = reply.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        if !c.is_ascii_uppercase() {
            continue;
        }
        let before = i == 0 || !chars[i - 1].is_alphanumeric();
        let after = i + 1 == chars.len() || !chars[i + 1].is_alphanumeric();
        if before && after {
            let idx = (c as u8 - b'A') as usize;
            if idx < candidates {
                return Some(idx);
            }
        }
    }
    None
}
