use alloc::string::String;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("no <graph> block or workflow class found in completion")]
pub struct NoGraphBlock;

const OPEN: &str = "<graph>";
const CLOSE: &str = "</graph>";

/// Pull the dialect source out of a meta-agent completion.
///
/// Takes the text between the first `<graph>` and the next `</graph>`. A
/// completion that omits the opening tag (it is often pre-filled in the
/// prompt) is accepted when it starts with a class header; the closing tag,
/// if any, ends the block. Markdown code fences around the code are dropped.
pub fn extract_graph_block(text: &str) -> Result<String, NoGraphBlock> {
    let body = if let Some(start) = text.find(OPEN) {
        let rest = &text[start + OPEN.len()..];
        match rest.find(CLOSE) {
            Some(end) => &rest[..end],
            None => rest,
        }
    } else {
        let head = match text.find(CLOSE) {
            Some(end) => &text[..end],
            None => text,
        };
        if !starts_with_class(head) {
            return Err(NoGraphBlock);
        }
        head
    };
    let cleaned = strip_fences(body);
    if cleaned.is_empty() {
        return Err(NoGraphBlock);
    }
    Ok(cleaned)
}

fn starts_with_class(text: &str) -> bool {
    text.lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#') && !l.starts_with("```"))
        .is_some_and(|l| l.starts_with("class ") && l.ends_with(':'))
}

fn strip_fences(body: &str) -> String {
    let mut out = String::new();
    for line in body.trim().lines() {
        if line.trim_start().starts_with("```") {
            continue;
        }
        out.push_str(line);
        out.push('\n');
    }
    String::from(out.trim_matches('\n').trim_end())
}
