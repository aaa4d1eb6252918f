//! Template invariant checks. Findings are data: a report with zero
//! findings means every invariant holds.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use super::{Call, Expr, Location, Statement, WorkflowTemplate, DEFAULT_MAX_LOOP};
use crate::operator::ParamType;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValidationOptions {
    pub max_loop: u32,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        ValidationOptions { max_loop: DEFAULT_MAX_LOOP }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "invariant", rename_all = "snake_case")]
pub enum Finding {
    DuplicateRole { role: String },
    /// Backbone-using role without a slot, or a tool role without a tool.
    MissingSlot { role: String },
    DanglingRole { role: String, at: Location },
    UnboundVariable { name: String, at: Location },
    UnboundedLoop { count: u32, max: u32, at: Location },
    MissingReturn,
    ReturnNotLast { at: Location },
    NoFinalOutput { at: Location },
    ArgumentMismatch { role: String, at: Location, detail: String },
    TypeMismatch { at: Location, detail: String },
    UnknownField { name: String, at: Location },
}

impl Finding {
    pub fn location(&self) -> Option<&Location> {
        match self {
            Finding::DanglingRole { at, .. }
            | Finding::UnboundVariable { at, .. }
            | Finding::UnboundedLoop { at, .. }
            | Finding::ReturnNotLast { at }
            | Finding::NoFinalOutput { at }
            | Finding::ArgumentMismatch { at, .. }
            | Finding::TypeMismatch { at, .. }
            | Finding::UnknownField { at, .. } => Some(at),
            Finding::DuplicateRole { .. } | Finding::MissingSlot { .. } | Finding::MissingReturn => None,
        }
    }
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Finding::DuplicateRole { role } => write!(f, "role `{role}` declared more than once"),
            Finding::MissingSlot { role } => write!(f, "role `{role}` has no backbone slot / tool name"),
            Finding::DanglingRole { role, at } => write!(f, "{at} calls undeclared role `{role}`"),
            Finding::UnboundVariable { name, at } => write!(f, "{at} reads `{name}` before it is written"),
            Finding::UnboundedLoop { count, max, at } => write!(f, "{at}: loop bound {count} outside 1..={max}"),
            Finding::MissingReturn => write!(f, "program has no return statement"),
            Finding::ReturnNotLast { at } => write!(f, "{at}: return must be the single last top-level statement"),
            Finding::NoFinalOutput { at } => write!(f, "{at}: return value is not produced by any statement"),
            Finding::ArgumentMismatch { role, at, detail } => write!(f, "{at}: call to `{role}`: {detail}"),
            Finding::TypeMismatch { at, detail } => write!(f, "{at}: {detail}"),
            Finding::UnknownField { name, at } => write!(f, "{at}: `self.{name}` is not a constructor field"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.findings.is_empty()
    }
}

pub fn validate_template(t: &WorkflowTemplate) -> ValidationReport {
    validate_with(t, &ValidationOptions::default())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ty {
    Text,
    List,
    Int,
}

impl From<ParamType> for Ty {
    fn from(p: ParamType) -> Ty {
        match p {
            ParamType::Text => Ty::Text,
            ParamType::List => Ty::List,
            ParamType::Int => Ty::Int,
        }
    }
}

struct Checker<'a> {
    t: &'a WorkflowTemplate,
    opts: &'a ValidationOptions,
    findings: Vec<Finding>,
    /// Variables produced by calls, list builders or fallbacks (not loop counters).
    produced: Vec<String>,
}

pub fn validate_with(t: &WorkflowTemplate, opts: &ValidationOptions) -> ValidationReport {
    let mut c = Checker { t, opts, findings: Vec::new(), produced: Vec::new() };
    let mut seen = Vec::new();
    for role in &t.roles {
        if seen.contains(&role.id.as_str()) {
            c.findings.push(Finding::DuplicateRole { role: role.id.clone() });
        }
        seen.push(&role.id);
        let ok = if role.kind.uses_backbone() { role.slot.is_some() } else { role.tool.is_some() };
        if !ok {
            c.findings.push(Finding::MissingSlot { role: role.id.clone() });
        }
    }

    let stmts = &t.program.statements;
    let mut env = BTreeMap::new();
    c.block(stmts, &mut Vec::new(), &mut env, true);

    let last = stmts.len().saturating_sub(1);
    let mut has_return = false;
    for (i, s) in stmts.iter().enumerate() {
        if let Statement::Return { value } = s {
            has_return = true;
            if i != last {
                c.findings.push(Finding::ReturnNotLast { at: Location(alloc::vec![i]) });
                continue;
            }
            let mut reads = Vec::new();
            value.reads(&mut reads);
            if let Expr::DefinedOr { name, .. } = value {
                reads.push(name.clone());
            }
            if !reads.iter().any(|r| c.produced.contains(r)) {
                c.findings.push(Finding::NoFinalOutput { at: Location(alloc::vec![i]) });
            }
        }
    }
    if !has_return && !c.findings.iter().any(|f| matches!(f, Finding::ReturnNotLast { .. })) {
        c.findings.push(Finding::MissingReturn);
    }
    ValidationReport { findings: c.findings }
}

impl Checker<'_> {
    fn block(&mut self, stmts: &[Statement], path: &mut Vec<usize>, env: &mut BTreeMap<String, Ty>, top: bool) {
        for (i, s) in stmts.iter().enumerate() {
            path.push(i);
            let at = Location(path.clone());
            match s {
                Statement::Call(call) => {
                    self.call(call, &at, env, None);
                    env.insert(call.output.clone(), Ty::Text);
                    self.produced.push(call.output.clone());
                }
                Statement::ListInit { var, items } => {
                    for item in items {
                        self.expect(item, Ty::Text, &at, env);
                    }
                    env.insert(var.clone(), Ty::List);
                    self.produced.push(var.clone());
                }
                Statement::Append { list, value } => {
                    match env.get(list) {
                        None => self.findings.push(Finding::UnboundVariable { name: list.clone(), at: at.clone() }),
                        Some(Ty::List) => {}
                        Some(_) => self.findings.push(Finding::TypeMismatch {
                            at: at.clone(),
                            detail: format!("`{list}` is not a list"),
                        }),
                    }
                    self.expect(value, Ty::Text, &at, env);
                }
                Statement::Loop { var, count, body } => {
                    if *count == 0 || *count > self.opts.max_loop {
                        self.findings.push(Finding::UnboundedLoop { count: *count, max: self.opts.max_loop, at: at.clone() });
                    }
                    env.insert(var.clone(), Ty::Int);
                    self.block(body, path, env, false);
                }
                Statement::MapCall { item, source, call } => {
                    self.expect(source, Ty::List, &at, env);
                    self.call(call, &at, env, Some(item));
                    env.insert(call.output.clone(), Ty::List);
                    self.produced.push(call.output.clone());
                }
                Statement::Fallback { var, replacement } => {
                    let ty = match env.get(var) {
                        Some(ty) => *ty,
                        None => {
                            self.findings.push(Finding::UnboundVariable { name: var.clone(), at: at.clone() });
                            Ty::Text
                        }
                    };
                    self.expect(replacement, ty, &at, env);
                }
                Statement::Return { value } => {
                    if !top {
                        self.findings.push(Finding::ReturnNotLast { at: at.clone() });
                    }
                    self.infer(value, &at, env);
                }
            }
            path.pop();
        }
    }

    fn call(&mut self, call: &Call, at: &Location, env: &BTreeMap<String, Ty>, item: Option<&String>) {
        let scoped;
        let env = match item {
            Some(item) => {
                let mut e = env.clone();
                e.insert(item.clone(), Ty::Text);
                scoped = e;
                &scoped
            }
            None => env,
        };
        let Some(role) = self.t.role(&call.role) else {
            self.findings.push(Finding::DanglingRole { role: call.role.clone(), at: at.clone() });
            for value in call.args.values() {
                self.infer(value, at, env);
            }
            return;
        };
        let params = role.kind.arity();
        for (name, value) in &call.args {
            match params.iter().find(|p| p.name == name) {
                Some(p) => self.expect(value, p.ty.into(), at, env),
                None => {
                    self.findings.push(Finding::ArgumentMismatch {
                        role: call.role.clone(),
                        at: at.clone(),
                        detail: format!("unknown parameter `{name}` for {}", role.kind),
                    });
                    self.infer(value, at, env);
                }
            }
        }
        for p in params.iter().filter(|p| p.required) {
            if !call.args.contains_key(p.name) {
                self.findings.push(Finding::ArgumentMismatch {
                    role: call.role.clone(),
                    at: at.clone(),
                    detail: format!("missing required parameter `{}`", p.name),
                });
            }
        }
    }

    fn expect(&mut self, e: &Expr, want: Ty, at: &Location, env: &BTreeMap<String, Ty>) {
        if let Some(got) = self.infer(e, at, env) {
            // ints render as text where text is wanted
            let ok = got == want || (want == Ty::Text && got == Ty::Int);
            if !ok {
                self.findings.push(Finding::TypeMismatch {
                    at: at.clone(),
                    detail: format!("expected {want:?}, found {got:?} expression"),
                });
            }
        }
    }

    /// Type of `e`, recording unbound reads. `None` when unknown.
    fn infer(&mut self, e: &Expr, at: &Location, env: &BTreeMap<String, Ty>) -> Option<Ty> {
        match e {
            Expr::Str(_) | Expr::None | Expr::Query => Some(Ty::Text),
            Expr::Int(_) => Some(Ty::Int),
            Expr::Attr(name) => {
                if !self.t.fields.iter().any(|f| &f.name == name) {
                    self.findings.push(Finding::UnknownField { name: name.clone(), at: at.clone() });
                }
                Some(Ty::Text)
            }
            Expr::Var(v) => match env.get(v) {
                Some(ty) => Some(*ty),
                None => {
                    self.findings.push(Finding::UnboundVariable { name: v.clone(), at: at.clone() });
                    None
                }
            },
            Expr::Index { var, .. } => {
                match env.get(var) {
                    Some(Ty::List) => {}
                    Some(_) => self.findings.push(Finding::TypeMismatch { at: at.clone(), detail: format!("`{var}` is not a list") }),
                    None => self.findings.push(Finding::UnboundVariable { name: var.clone(), at: at.clone() }),
                }
                Some(Ty::Text)
            }
            Expr::List(items) => {
                for item in items {
                    self.expect(item, Ty::Text, at, env);
                }
                Some(Ty::List)
            }
            Expr::Dict(entries) => {
                for (_, v) in entries {
                    self.infer(v, at, env);
                }
                Some(Ty::Text)
            }
            Expr::DefinedOr { name, otherwise } => {
                let ty = self.infer(otherwise, at, env);
                if let (Some(bound), Some(ty)) = (env.get(name), ty) {
                    if *bound != ty {
                        self.findings.push(Finding::TypeMismatch {
                            at: at.clone(),
                            detail: format!("`{name}` and its alternative have different types"),
                        });
                    }
                }
                ty
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::ir::parse_template;

    #[test]
    fn math_listing_is_clean() {
        let t = parse_template(corpus::MATH).unwrap();
        assert_eq!(validate_template(&t).findings, []);
    }

    #[test]
    fn dangling_role() {
        let mut t = parse_template(corpus::MATH).unwrap();
        let Statement::Call(c) = &mut t.program.statements[0] else { panic!() };
        c.role = "x".into();
        let findings = validate_template(&t).findings;
        assert_eq!(findings, [Finding::DanglingRole { role: "x".into(), at: Location(alloc::vec![0]) }]);
    }

    #[test]
    fn zero_loop_bound() {
        let mut t = parse_template(corpus::HUMANEVAL).unwrap();
        let Statement::Loop { count, .. } = &mut t.program.statements[1] else { panic!() };
        *count = 0;
        let findings = validate_template(&t).findings;
        assert_eq!(findings.len(), 1);
        assert!(matches!(findings[0], Finding::UnboundedLoop { count: 0, .. }));
    }

    #[test]
    fn return_rules() {
        let mut t = parse_template(corpus::NQ).unwrap();
        let ret = t.program.statements.pop().unwrap();
        assert_eq!(validate_template(&t).findings, [Finding::MissingReturn]);
        t.program.statements.insert(0, ret.clone());
        t.program.statements.push(ret);
        let findings = validate_template(&t).findings;
        assert!(findings.iter().any(|f| matches!(f, Finding::ReturnNotLast { .. })));
    }

    #[test]
    fn literal_return_has_no_final_output() {
        let mut t = parse_template(corpus::NQ).unwrap();
        *t.program.statements.last_mut().unwrap() = Statement::Return { value: Expr::Str("x".into()) };
        assert!(matches!(validate_template(&t).findings[..], [Finding::NoFinalOutput { .. }]));
    }

    #[test]
    fn list_type_mismatch() {
        let mut t = parse_template(corpus::MATH).unwrap();
        let Statement::Call(c) = &mut t.program.statements[4] else { panic!() };
        c.args.insert("solutions".into(), Expr::Var("analysis1".into()));
        assert!(matches!(validate_template(&t).findings[..], [Finding::TypeMismatch { .. }]));
    }
}
