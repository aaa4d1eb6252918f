//! The closed operator catalog and the parameter schema each kind accepts.

use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OperatorKind {
    Custom,
    AnswerGenerate,
    CustomCodeGenerate,
    Programmer,
    Review,
    ScEnsemble,
    Test,
    Search,
    Browser,
    Tool,
}

impl OperatorKind {
    pub const ALL: [OperatorKind; 10] = [
        OperatorKind::Custom,
        OperatorKind::AnswerGenerate,
        OperatorKind::CustomCodeGenerate,
        OperatorKind::Programmer,
        OperatorKind::Review,
        OperatorKind::ScEnsemble,
        OperatorKind::Test,
        OperatorKind::Search,
        OperatorKind::Browser,
        OperatorKind::Tool,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OperatorKind::Custom => "Custom",
            OperatorKind::AnswerGenerate => "AnswerGenerate",
            OperatorKind::CustomCodeGenerate => "CustomCodeGenerate",
            OperatorKind::Programmer => "Programmer",
            OperatorKind::Review => "Review",
            OperatorKind::ScEnsemble => "ScEnsemble",
            OperatorKind::Test => "Test",
            OperatorKind::Search => "Search",
            OperatorKind::Browser => "Browser",
            OperatorKind::Tool => "Tool",
        }
    }

    /// Whether the constructor's first argument is a backbone slot.
    /// `Tool` takes a tool name there instead.
    pub fn uses_backbone(self) -> bool {
        !matches!(self, OperatorKind::Tool)
    }

    pub fn description(self) -> &'static str {
        match self {
            OperatorKind::Custom => "General-purpose operator: takes an instruction and produces text.",
            OperatorKind::AnswerGenerate => "Produces a concise final answer from the problem and any evidence passed as context.",
            OperatorKind::CustomCodeGenerate => "Generates code for the problem following an instruction.",
            OperatorKind::Programmer => "Writes a program that solves the problem from a prior analysis.",
            OperatorKind::Review => "Critiques a solution and returns a revised solution.",
            OperatorKind::ScEnsemble => "Selects the most consistent solution from a list of candidates.",
            OperatorKind::Test => "Checks a code solution against the task's tests and repairs it on failure.",
            OperatorKind::Search => "Searches the local document store and returns the top-k document ids.",
            OperatorKind::Browser => "Returns the full text of a document by id.",
            OperatorKind::Tool => "Runs a sandboxed tool (`calculator` or `python`) on its input.",
        }
    }

    pub fn arity(self) -> &'static [Param] {
        operator_arity(self)
    }
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OperatorKind {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        // `Reviewer` is the generator-facing spelling of `Review`.
        if s == "Reviewer" {
            return Ok(OperatorKind::Review);
        }
        OperatorKind::ALL.into_iter().find(|k| k.name() == s).ok_or(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ParamType {
    Text,
    List,
    Int,
}

impl fmt::Display for ParamType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ParamType::Text => "str",
            ParamType::List => "List[str]",
            ParamType::Int => "int",
        })
    }
}

/// One named parameter of an operator call. Positional arguments bind to
/// parameters in table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Param {
    pub name: &'static str,
    pub ty: ParamType,
    pub required: bool,
}

const fn req(name: &'static str, ty: ParamType) -> Param {
    Param { name, ty, required: true }
}

const fn opt(name: &'static str, ty: ParamType) -> Param {
    Param { name, ty, required: false }
}

use ParamType::{Int, List, Text};

static CUSTOM: [Param; 2] = [req("instruction", Text), opt("input", Text)];
static ANSWER_GENERATE: [Param; 2] = [opt("context", Text), opt("input", Text)];
static CUSTOM_CODE_GENERATE: [Param; 1] = [req("instruction", Text)];
static PROGRAMMER: [Param; 2] = [req("analysis", Text), opt("instruction", Text)];
static REVIEW: [Param; 1] = [req("pre_solution", Text)];
static SC_ENSEMBLE: [Param; 1] = [req("solutions", List)];
static TEST: [Param; 1] = [req("solution", Text)];
static SEARCH: [Param; 2] = [req("query", Text), opt("top_k", Int)];
static BROWSER: [Param; 1] = [req("docid", Text)];
static TOOL: [Param; 1] = [req("input", Text)];

/// The named-parameter schema used to type-check call statements.
pub fn operator_arity(kind: OperatorKind) -> &'static [Param] {
    match kind {
        OperatorKind::Custom => &CUSTOM,
        OperatorKind::AnswerGenerate => &ANSWER_GENERATE,
        OperatorKind::CustomCodeGenerate => &CUSTOM_CODE_GENERATE,
        OperatorKind::Programmer => &PROGRAMMER,
        OperatorKind::Review => &REVIEW,
        OperatorKind::ScEnsemble => &SC_ENSEMBLE,
        OperatorKind::Test => &TEST,
        OperatorKind::Search => &SEARCH,
        OperatorKind::Browser => &BROWSER,
        OperatorKind::Tool => &TOOL,
    }
}

/// `name(p1: T1, p2: T2 = None) -> str`, the format shown to meta-agents.
pub fn call_signature(kind: OperatorKind, call_name: &str) -> alloc::string::String {
    use core::fmt::Write;
    let mut out = alloc::string::String::new();
    let _ = write!(out, "{call_name}(");
    for (i, p) in kind.arity().iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        let _ = write!(out, "{}: {}", p.name, p.ty);
        if !p.required {
            out.push_str(" = None");
        }
    }
    out.push_str(") -> str");
    out
}
