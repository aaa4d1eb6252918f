//! Workflow intermediate representation.
//!
//! A [`WorkflowTemplate`] is the uninstantiated plan: its roles, the
//! data-flow program wiring them together, and the tools it needs. The
//! communication structure between roles is implicit in the program: a role
//! talks to another exactly when one call's output variable feeds another
//! call's argument.

mod canonical;
mod emit;
mod extract;
mod lexer;
mod parser;
mod substitute;
mod validate;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

pub use crate::operator::OperatorKind;
pub use canonical::{parse_canonical, serialize_template, CanonicalError, CANONICAL_FORMAT, CANONICAL_VERSION};
pub use emit::emit_dialect;
pub use extract::{extract_graph_block, NoGraphBlock};
pub use parser::{parse_template, parse_template_with, ParseError, TemplateError};
pub use substitute::{substitute_backbones, BackbonePool, SubstitutionError};
pub use validate::{validate_template, validate_with, Finding, ValidationOptions, ValidationReport};

/// The literal backbone slot an uninstantiated template carries.
pub const PLACEHOLDER: &str = "llm_symbol";

/// Default ceiling for `for _ in range(n)` bounds.
pub const DEFAULT_MAX_LOOP: u32 = 16;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorkflowTemplate {
    pub class_name: String,
    /// Non-operator constructor attributes such as `self.gid = None`.
    pub fields: Vec<Field>,
    pub roles: Vec<RoleSpec>,
    pub program: ControlProgram,
    pub required_tools: BTreeSet<String>,
    /// The dialect text this template was parsed from, if any. Not part of
    /// structural equality or the canonical form.
    #[serde(skip)]
    pub source_text: Option<String>,
}

impl PartialEq for WorkflowTemplate {
    fn eq(&self, other: &Self) -> bool {
        self.class_name == other.class_name
            && self.fields == other.fields
            && self.roles == other.roles
            && self.program == other.program
            && self.required_tools == other.required_tools
    }
}

impl Eq for WorkflowTemplate {}

impl WorkflowTemplate {
    pub fn role(&self, id: &str) -> Option<&RoleSpec> {
        self.roles.iter().find(|r| r.id == id)
    }

    /// Roles whose constructor takes a backbone slot.
    pub fn llm_roles(&self) -> impl Iterator<Item = &RoleSpec> {
        self.roles.iter().filter(|r| r.kind.uses_backbone())
    }

    /// True when no backbone slot still holds the placeholder.
    pub fn is_concrete(&self) -> bool {
        self.llm_roles().all(|r| r.slot.as_deref().is_some_and(|s| s != PLACEHOLDER))
    }

    /// Copy with every backbone slot reset to the placeholder.
    pub fn abstracted(&self) -> WorkflowTemplate {
        let mut t = self.clone();
        for role in t.roles.iter_mut().filter(|r| r.kind.uses_backbone()) {
            role.slot = Some(PLACEHOLDER.into());
        }
        t
    }

    /// Number of call statements, counting loop and comprehension bodies once.
    pub fn call_count(&self) -> usize {
        fn count(stmts: &[Statement]) -> usize {
            stmts
                .iter()
                .map(|s| match s {
                    Statement::Call(_) | Statement::MapCall { .. } => 1,
                    Statement::Loop { body, .. } => count(body),
                    _ => 0,
                })
                .sum()
        }
        count(&self.program.statements)
    }

    /// Every call in program order, with its location.
    pub fn calls(&self) -> Vec<(Location, &Call)> {
        fn walk<'a>(stmts: &'a [Statement], prefix: &mut Vec<usize>, out: &mut Vec<(Location, &'a Call)>) {
            for (i, s) in stmts.iter().enumerate() {
                prefix.push(i);
                match s {
                    Statement::Call(c) => out.push((Location(prefix.clone()), c)),
                    Statement::MapCall { call, .. } => out.push((Location(prefix.clone()), call)),
                    Statement::Loop { body, .. } => walk(body, prefix, out),
                    _ => {}
                }
                prefix.pop();
            }
        }
        let mut out = Vec::new();
        walk(&self.program.statements, &mut Vec::new(), &mut out);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Field {
    pub name: String,
    pub value: Expr,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleSpec {
    pub id: String,
    pub kind: OperatorKind,
    /// Backbone slot: the placeholder or a concrete backbone id. `None` only
    /// for `Tool` roles.
    pub slot: Option<String>,
    /// Tool name for `Tool` roles.
    pub tool: Option<String>,
    /// The `instruction=` constructor keyword, if present.
    pub instruction: Option<String>,
    /// Remaining constructor arguments in source order.
    pub args: Vec<CtorArg>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CtorArg {
    pub name: Option<String>,
    pub value: Expr,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ControlProgram {
    pub statements: Vec<Statement>,
}

/// `output = await self.role(param=value, ...)`. Arguments are keyed by the
/// operator's parameter names; positional arguments are bound at parse time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Call {
    pub output: String,
    pub role: String,
    pub args: BTreeMap<String, Expr>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Statement {
    Call(Call),
    /// `var = []` or `var = [e1, e2, ...]`.
    ListInit { var: String, items: Vec<Expr> },
    /// `list.append(value)`.
    Append { list: String, value: Expr },
    /// `for var in range(count): body`.
    Loop { var: String, count: u32, body: Vec<Statement> },
    /// `output = [await self.role(...) for item in source]`; the call's
    /// output names the resulting list.
    MapCall { item: String, source: Expr, call: Call },
    /// `if not var or not var.strip(): var = replacement`.
    Fallback { var: String, replacement: Expr },
    Return { value: Expr },
}

impl Statement {
    /// Variable this statement (re)binds at top level, if any.
    pub fn written_var(&self) -> Option<&str> {
        match self {
            Statement::Call(c) => Some(&c.output),
            Statement::ListInit { var, .. } => Some(var),
            Statement::Append { list, .. } => Some(list),
            Statement::MapCall { call, .. } => Some(&call.output),
            Statement::Fallback { var, .. } => Some(var),
            Statement::Loop { .. } | Statement::Return { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expr {
    Str(String),
    Int(i64),
    None,
    /// `self.problem`: the task query.
    Query,
    /// `self.<name>` for a constructor field.
    Attr(String),
    Var(String),
    /// `var[index]`.
    Index { var: String, index: usize },
    List(Vec<Expr>),
    Dict(Vec<(String, Expr)>),
    /// `name if 'name' in locals() else otherwise`.
    DefinedOr { name: String, otherwise: alloc::boxed::Box<Expr> },
}

impl Expr {
    /// Variables this expression reads unconditionally.
    pub fn reads(&self, out: &mut Vec<String>) {
        match self {
            Expr::Var(v) => out.push(v.clone()),
            Expr::Index { var, .. } => out.push(var.clone()),
            Expr::List(items) => items.iter().for_each(|e| e.reads(out)),
            Expr::Dict(entries) => entries.iter().for_each(|(_, e)| e.reads(out)),
            Expr::DefinedOr { otherwise, .. } => otherwise.reads(out),
            Expr::Str(_) | Expr::Int(_) | Expr::None | Expr::Query | Expr::Attr(_) => {}
        }
    }
}

/// Path of statement indices from the top of the program into nested bodies.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Location(pub Vec<usize>);

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("statement ")?;
        for (i, idx) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(".")?;
            }
            write!(f, "{}", idx + 1)?;
        }
        Ok(())
    }
}

/// φ: role id → backbone id.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BackboneAssignment {
    pub mapping: BTreeMap<String, String>,
}

impl BackboneAssignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn assign(mut self, role: impl Into<String>, backbone: impl Into<String>) -> Self {
        self.mapping.insert(role.into(), backbone.into());
        self
    }

    pub fn get(&self, role: &str) -> Option<&str> {
        self.mapping.get(role).map(String::as_str)
    }
}

impl<R: Into<String>, B: Into<String>> FromIterator<(R, B)> for BackboneAssignment {
    fn from_iter<I: IntoIterator<Item = (R, B)>>(iter: I) -> Self {
        BackboneAssignment { mapping: iter.into_iter().map(|(r, b)| (r.into(), b.into())).collect() }
    }
}

/// A template whose backbone slots are filled from `assignment`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstantiatedWorkflow {
    /// The template with concrete slots.
    pub template: WorkflowTemplate,
    pub assignment: BackboneAssignment,
}

impl InstantiatedWorkflow {
    /// Read the assignment back out of a template whose slots are all concrete.
    pub fn from_concrete(template: WorkflowTemplate) -> Option<InstantiatedWorkflow> {
        if !template.is_concrete() {
            return None;
        }
        let assignment = template
            .llm_roles()
            .map(|r| (r.id.clone(), r.slot.clone().unwrap_or_default()))
            .collect();
        Some(InstantiatedWorkflow { template, assignment })
    }

    pub fn canonical(&self) -> String {
        serialize_template(&self.template)
    }
}
