//! Canonical `.mas2t` form: pretty-printed JSON with a fixed field order,
//! sorted argument maps and a trailing newline. Two structurally equal
//! templates always serialize to the same bytes.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::validate::{validate_template, Finding};
use super::{ControlProgram, Field, RoleSpec, Statement, WorkflowTemplate};

pub const CANONICAL_FORMAT: &str = "mas2t";
pub const CANONICAL_VERSION: u32 = 1;

#[derive(Serialize)]
struct DocRef<'a> {
    format: &'a str,
    version: u32,
    class_name: &'a str,
    fields: &'a [Field],
    roles: &'a [RoleSpec],
    required_tools: &'a BTreeSet<String>,
    program: &'a [Statement],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Doc {
    format: String,
    version: u32,
    class_name: String,
    fields: Vec<Field>,
    roles: Vec<RoleSpec>,
    required_tools: BTreeSet<String>,
    program: Vec<Statement>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CanonicalError {
    #[error("malformed canonical template: {0}")]
    Malformed(String),
    #[error("not a canonical template (format `{0}`)")]
    Format(String),
    #[error("unsupported canonical version {0} (this build reads {CANONICAL_VERSION})")]
    Version(u32),
    #[error("canonical template violates an invariant: {0}")]
    Invalid(Finding),
}

pub fn serialize_template(t: &WorkflowTemplate) -> String {
    let doc = DocRef {
        format: CANONICAL_FORMAT,
        version: CANONICAL_VERSION,
        class_name: &t.class_name,
        fields: &t.fields,
        roles: &t.roles,
        required_tools: &t.required_tools,
        program: &t.program.statements,
    };
    let mut out = serde_json::to_string_pretty(&doc).expect("template serialization is infallible");
    out.push('\n');
    out
}

pub fn parse_canonical(text: &str) -> Result<WorkflowTemplate, CanonicalError> {
    let doc: Doc = serde_json::from_str(text).map_err(|e| CanonicalError::Malformed(e.to_string()))?;
    if doc.format != CANONICAL_FORMAT {
        return Err(CanonicalError::Format(doc.format));
    }
    if doc.version != CANONICAL_VERSION {
        return Err(CanonicalError::Version(doc.version));
    }
    let t = WorkflowTemplate {
        class_name: doc.class_name,
        fields: doc.fields,
        roles: doc.roles,
        program: ControlProgram { statements: doc.program },
        required_tools: doc.required_tools,
        source_text: None,
    };
    if let Some(f) = validate_template(&t).findings.into_iter().next() {
        return Err(CanonicalError::Invalid(f));
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::ir::{parse_template, Call, Expr};
    use alloc::collections::BTreeMap;

    #[test]
    fn corpus_round_trips() {
        for (name, src) in corpus::PARSEABLE {
            let t = parse_template(src).unwrap();
            let text = serialize_template(&t);
            let back = parse_canonical(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(back, t, "{name}");
            assert_eq!(serialize_template(&back), text, "{name}");
        }
    }

    #[test]
    fn argument_order_does_not_matter() {
        let mut a = BTreeMap::new();
        a.insert("query".to_string(), Expr::Query);
        a.insert("top_k".to_string(), Expr::Int(3));
        let mut b = BTreeMap::new();
        b.insert("top_k".to_string(), Expr::Int(3));
        b.insert("query".to_string(), Expr::Query);
        let ca = Call { output: "o".into(), role: "s".into(), args: a };
        let cb = Call { output: "o".into(), role: "s".into(), args: b };
        assert_eq!(serde_json::to_string(&ca).unwrap(), serde_json::to_string(&cb).unwrap());
    }

    #[test]
    fn rejects_other_versions() {
        let t = parse_template(corpus::NQ).unwrap();
        let text = serialize_template(&t).replace("\"version\": 1", "\"version\": 2");
        assert_eq!(parse_canonical(&text), Err(CanonicalError::Version(2)));
        assert!(matches!(parse_canonical("{"), Err(CanonicalError::Malformed(_))));
    }
}
