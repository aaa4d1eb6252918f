use serde::{Deserialize, Serialize};

/// Runtime value bound to a workflow variable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum Value {
    None,
    Text(String),
    Int(i64),
    List(Vec<Value>),
    Dict(Vec<(String, Value)>),
}

impl Value {
    /// Text handed to an operator prompt or reported as an answer.
    pub fn render(&self) -> String {
        match self {
            Value::None => String::new(),
            Value::Text(s) => s.clone(),
            Value::Int(i) => i.to_string(),
            Value::List(items) => items.iter().map(Value::render).collect::<Vec<_>>().join("\n\n"),
            Value::Dict(entries) => match entries.iter().find(|(k, _)| k == "solution" || k == "answer") {
                Some((_, v)) => v.render(),
                None => entries.iter().map(|(k, v)| format!("{k}: {}", v.render())).collect::<Vec<_>>().join("\n"),
            },
        }
    }

    pub fn is_blank(&self) -> bool {
        match self {
            Value::None => true,
            Value::Text(s) => s.trim().is_empty(),
            Value::List(items) => items.is_empty(),
            Value::Dict(entries) => entries.is_empty(),
            Value::Int(_) => false,
        }
    }

    pub fn as_list(&self) -> Option<&[Value]> {
        match self {
            Value::List(items) => Some(items),
            _ => None,
        }
    }
}
