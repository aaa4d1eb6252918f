//! Recursive-descent parser for the workflow dialect.
//!
//! The dialect is the code shape meta-agents emit: a `Workflow` class whose
//! constructor declares operator roles and whose `run_workflow` method wires
//! them with awaited calls, list building, count-bounded loops, one kind of
//! is-empty fallback and a single return. See `docs/dialect.ebnf`.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::lexer::{tokenize, Tok, Token};
use super::validate::{validate_with, Finding, ValidationOptions};
use super::{Call, ControlProgram, CtorArg, Expr, Field, Location, RoleSpec, Statement, WorkflowTemplate};
use crate::operator::OperatorKind;

/// Syntax error or out-of-dialect construct, with a 1-based position.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}, column {col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
    /// Set when the input is well-formed code but outside the dialect.
    pub construct: Option<String>,
}

impl ParseError {
    pub(crate) fn syntax(line: usize, col: usize, message: impl Into<String>) -> Self {
        ParseError { line, col, message: message.into(), construct: None }
    }

    pub(crate) fn unsupported(line: usize, col: usize, construct: impl Into<String>) -> Self {
        let construct = construct.into();
        ParseError { line, col, message: format!("unsupported construct: {construct}"), construct: Some(construct) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TemplateError {
    #[error("parse error at {0}")]
    Parse(#[from] ParseError),
    #[error("line {line}, column {col}: unknown operator kind `{kind}`")]
    UnknownOperatorKind { line: usize, col: usize, kind: String },
    #[error("unbound variable `{name}` at {at}{}", line_suffix(*.line))]
    UnboundVariable { name: String, at: Location, line: Option<usize> },
    #[error("loop at {at}{} has bound {count}; bounds must be in 1..={max}", line_suffix(*.line))]
    UnboundedLoop { count: u32, max: u32, at: Location, line: Option<usize> },
    #[error("invalid template: {finding}{}", line_suffix(*.line))]
    Invalid { finding: Finding, line: Option<usize> },
}

fn line_suffix(line: Option<usize>) -> String {
    line.map(|l| format!(" (line {l})")).unwrap_or_default()
}

/// Parse dialect source with the default validation options.
pub fn parse_template(source: &str) -> Result<WorkflowTemplate, TemplateError> {
    parse_template_with(source, &ValidationOptions::default())
}

/// Parse dialect source and check every template invariant.
pub fn parse_template_with(source: &str, opts: &ValidationOptions) -> Result<WorkflowTemplate, TemplateError> {
    let tokens = tokenize(source)?;
    let mut parser = Parser { tokens, pos: 0, lines: BTreeMap::new(), roles: Vec::new(), path: Vec::new() };
    let mut template = parser.file()?;
    template.source_text = Some(source.into());
    let report = validate_with(&template, opts);
    if let Some(finding) = report.findings.into_iter().next() {
        let line = finding.location().and_then(|l| parser.lines.get(l).copied());
        return Err(match finding {
            Finding::UnboundVariable { name, at } => TemplateError::UnboundVariable { name, at, line },
            Finding::UnboundedLoop { count, max, at } => TemplateError::UnboundedLoop { count, max, at, line },
            finding => TemplateError::Invalid { finding, line },
        });
    }
    Ok(template)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    /// Source line of each statement, for diagnostics.
    lines: BTreeMap<Location, usize>,
    roles: Vec<RoleSpec>,
    path: Vec<usize>,
}

type PResult<T> = Result<T, TemplateError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_n(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn here(&self) -> (usize, usize) {
        let t = &self.tokens[self.pos];
        (t.line, t.col)
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn expected(&self, what: &str) -> TemplateError {
        let (line, col) = self.here();
        if let Tok::Unsupported(construct) = self.peek() {
            return ParseError::unsupported(line, col, construct.clone()).into();
        }
        ParseError::syntax(line, col, format!("expected {what}, found {}", self.peek().describe())).into()
    }

    fn unsupported(&self, construct: impl Into<String>) -> TemplateError {
        let (line, col) = self.here();
        ParseError::unsupported(line, col, construct).into()
    }

    fn is_name(&self, name: &str) -> bool {
        matches!(self.peek(), Tok::Name(n) if n == name)
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.next();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> PResult<()> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(self.expected(&format!("`{p}`")))
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> PResult<()> {
        if self.is_name(kw) {
            self.next();
            Ok(())
        } else {
            Err(self.expected(&format!("`{kw}`")))
        }
    }

    fn expect_name(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Name(n) if !is_keyword(&n) => {
                self.next();
                Ok(n)
            }
            _ => Err(self.expected("identifier")),
        }
    }

    fn expect_newline(&mut self) -> PResult<()> {
        match self.peek() {
            Tok::Newline => {
                self.next();
                Ok(())
            }
            _ => Err(self.expected("end of line")),
        }
    }

    fn skip_newlines(&mut self) {
        while matches!(self.peek(), Tok::Newline) {
            self.next();
        }
    }

    fn expect_indent(&mut self) -> PResult<()> {
        if matches!(self.peek(), Tok::Indent) {
            self.next();
            Ok(())
        } else {
            Err(self.expected("indented block"))
        }
    }

    /// Skip a bare string expression statement (docstring).
    fn skip_docstring(&mut self) -> PResult<bool> {
        if matches!(self.peek(), Tok::Str(_)) && matches!(self.peek_n(1), Tok::Newline) {
            self.next();
            self.next();
            return Ok(true);
        }
        Ok(false)
    }

    fn file(&mut self) -> PResult<WorkflowTemplate> {
        self.skip_newlines();
        while self.is_name("import") || self.is_name("from") {
            while !matches!(self.peek(), Tok::Newline | Tok::Eof) {
                self.next();
            }
            self.skip_newlines();
        }
        self.expect_keyword("class")?;
        let class_name = self.expect_name()?;
        if self.eat_punct("(") {
            while !self.is_punct(")") {
                if matches!(self.peek(), Tok::Eof) {
                    return Err(self.expected("`)`"));
                }
                self.next();
            }
            self.next();
        }
        self.expect_punct(":")?;
        self.expect_newline()?;
        self.expect_indent()?;
        self.skip_docstring()?;

        if !(self.is_name("def") && matches!(self.peek_n(1), Tok::Name(n) if n == "__init__")) {
            return Err(self.expected("`def __init__`"));
        }
        let fields = self.init()?;

        if !(self.is_name("async") && matches!(self.peek_n(2), Tok::Name(n) if n == "run_workflow")) {
            if self.is_name("def") || self.is_name("async") {
                let name = match self.peek_n(if self.is_name("async") { 2 } else { 1 }) {
                    Tok::Name(n) => n.clone(),
                    _ => String::new(),
                };
                return Err(self.unsupported(format!("method `{name}` (only `__init__` and `run_workflow`)")));
            }
            return Err(self.expected("`async def run_workflow`"));
        }
        let statements = self.run_method()?;

        match self.peek() {
            Tok::Dedent => {
                self.next();
            }
            Tok::Eof => {}
            Tok::Name(n) if n == "def" || n == "async" => {
                return Err(self.unsupported("additional method after `run_workflow`"));
            }
            _ => return Err(self.expected("end of class body")),
        }
        self.skip_newlines();
        if !matches!(self.peek(), Tok::Eof) {
            return Err(self.unsupported("code after the workflow class"));
        }

        let roles = core::mem::take(&mut self.roles);
        let required_tools: BTreeSet<String> = roles.iter().filter_map(|r| r.tool.clone()).collect();
        Ok(WorkflowTemplate {
            class_name,
            fields,
            roles,
            program: ControlProgram { statements },
            required_tools,
            source_text: None,
        })
    }

    fn skip_param_list(&mut self) -> PResult<()> {
        self.expect_punct("(")?;
        let mut depth = 1;
        while depth > 0 {
            match self.next().tok {
                Tok::Punct("(") => depth += 1,
                Tok::Punct(")") => depth -= 1,
                Tok::Eof => return Err(self.expected("`)`")),
                _ => {}
            }
        }
        Ok(())
    }

    fn method_header(&mut self) -> PResult<()> {
        self.skip_param_list()?;
        if self.eat_punct("->") {
            while !self.is_punct(":") {
                if matches!(self.peek(), Tok::Newline | Tok::Eof) {
                    return Err(self.expected("`:`"));
                }
                self.next();
            }
        }
        self.expect_punct(":")?;
        self.expect_newline()?;
        self.expect_indent()
    }

    fn init(&mut self) -> PResult<Vec<Field>> {
        self.next(); // def
        self.next(); // __init__
        self.method_header()?;
        let mut fields = Vec::new();
        loop {
            match self.peek().clone() {
                Tok::Dedent => {
                    self.next();
                    break;
                }
                Tok::Eof => break,
                Tok::Str(_) => {
                    if !self.skip_docstring()? {
                        return Err(self.unsupported("expression statement in constructor"));
                    }
                }
                Tok::Name(n) if n == "pass" => {
                    self.next();
                    self.expect_newline()?;
                }
                Tok::Name(n) if n == "self" => {
                    self.next();
                    self.expect_punct(".")?;
                    let (line, col) = self.here();
                    let attr = self.expect_name()?;
                    self.expect_punct("=")?;
                    if self.is_name("operator") {
                        let role = self.role(attr, line, col)?;
                        if self.roles.iter().any(|r| r.id == role.id) {
                            // duplicates are reported by validation
                        }
                        self.roles.push(role);
                    } else if attr == "problem" && self.is_name("problem") {
                        self.next();
                    } else {
                        let value = self.literal_expr()?;
                        fields.push(Field { name: attr, value });
                    }
                    self.expect_newline()?;
                }
                _ => return Err(self.unsupported(format!("constructor statement starting with {}", self.peek().describe()))),
            }
        }
        Ok(fields)
    }

    fn literal_expr(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::Str(s) => {
                self.next();
                Ok(Expr::Str(s))
            }
            Tok::Int(i) => {
                self.next();
                Ok(Expr::Int(i))
            }
            Tok::Name(n) if n == "None" => {
                self.next();
                Ok(Expr::None)
            }
            _ => Err(self.expected("literal value")),
        }
    }

    fn role(&mut self, id: String, line: usize, col: usize) -> PResult<RoleSpec> {
        self.next(); // operator
        self.expect_punct(".")?;
        let (kline, kcol) = self.here();
        let kind_name = self.expect_name()?;
        let kind: OperatorKind = kind_name
            .parse()
            .map_err(|_| TemplateError::UnknownOperatorKind { line: kline, col: kcol, kind: kind_name.clone() })?;
        self.expect_punct("(")?;
        let mut slot = None;
        let mut tool = None;
        let mut instruction = None;
        let mut args = Vec::new();
        let mut first = true;
        while !self.is_punct(")") {
            let named = match (self.peek(), self.peek_n(1)) {
                (Tok::Name(n), Tok::Punct("=")) => Some(n.clone()),
                _ => None,
            };
            if let Some(name) = &named {
                self.next();
                self.next();
                if name == "instruction" {
                    match self.peek().clone() {
                        Tok::Str(s) => {
                            self.next();
                            instruction = Some(s);
                        }
                        _ => return Err(self.expected("instruction string")),
                    }
                } else if name == "tool_name" && kind == OperatorKind::Tool && first {
                    match self.peek().clone() {
                        Tok::Str(s) => {
                            self.next();
                            tool = Some(s);
                        }
                        _ => return Err(self.expected("tool name string")),
                    }
                } else {
                    let value = self.expr()?;
                    args.push(CtorArg { name: named.clone(), value });
                }
            } else if first {
                match self.peek().clone() {
                    Tok::Str(s) => {
                        self.next();
                        if kind.uses_backbone() {
                            slot = Some(s);
                        } else {
                            tool = Some(s);
                        }
                    }
                    _ => return Err(self.expected("backbone string literal as first constructor argument")),
                }
            } else {
                let value = self.expr()?;
                args.push(CtorArg { name: None, value });
            }
            first = false;
            if !self.eat_punct(",") {
                break;
            }
        }
        self.expect_punct(")")?;
        if kind.uses_backbone() && slot.is_none() {
            return Err(ParseError::syntax(line, col, format!("operator `{kind}` for `{id}` needs a backbone string as its first argument")).into());
        }
        if !kind.uses_backbone() && tool.is_none() {
            return Err(ParseError::syntax(line, col, format!("tool role `{id}` needs a tool name")).into());
        }
        Ok(RoleSpec { id, kind, slot, tool, instruction, args })
    }

    fn run_method(&mut self) -> PResult<Vec<Statement>> {
        self.next(); // async
        self.next(); // def
        self.next(); // run_workflow
        self.method_header()?;
        self.skip_docstring()?;
        self.block()
    }

    /// Statements up to and including the closing dedent.
    fn block(&mut self) -> PResult<Vec<Statement>> {
        let mut out = Vec::new();
        loop {
            match self.peek() {
                Tok::Dedent => {
                    self.next();
                    return Ok(out);
                }
                Tok::Eof => return Ok(out),
                _ => {}
            }
            self.path.push(out.len());
            let line = self.here().0;
            let stmt = self.statement()?;
            if let Some(stmt) = stmt {
                self.lines.insert(Location(self.path.clone()), line);
                out.push(stmt);
            }
            self.path.pop();
        }
    }

    fn statement(&mut self) -> PResult<Option<Statement>> {
        let tok = self.peek().clone();
        match tok {
            Tok::Str(_) => {
                if self.skip_docstring()? {
                    return Ok(None);
                }
                Err(self.unsupported("expression statement"))
            }
            Tok::Unsupported(c) => Err(self.unsupported(c)),
            Tok::Name(n) => match n.as_str() {
                "pass" => {
                    self.next();
                    self.expect_newline()?;
                    Ok(None)
                }
                "return" => {
                    self.next();
                    let value = self.expr()?;
                    self.expect_newline()?;
                    Ok(Some(Statement::Return { value }))
                }
                "for" => self.for_loop().map(Some),
                "if" => self.fallback().map(Some),
                "while" => Err(self.unsupported("while loop")),
                "break" | "continue" => Err(self.unsupported(format!("`{n}` statement"))),
                "try" | "with" | "raise" | "assert" | "del" | "global" | "nonlocal" | "def" | "class" | "lambda" | "yield" => {
                    Err(self.unsupported(format!("`{n}` statement")))
                }
                "await" => Err(self.unsupported("call whose result is not assigned")),
                "self" => Err(self.unsupported("assignment to an attribute inside `run_workflow`")),
                _ => self.name_statement(n).map(Some),
            },
            _ => Err(self.expected("statement")),
        }
    }

    fn name_statement(&mut self, name: String) -> PResult<Statement> {
        if is_keyword(&name) {
            return Err(self.unsupported(format!("`{name}` statement")));
        }
        match self.peek_n(1).clone() {
            Tok::Punct(".") => {
                let method = match self.peek_n(2) {
                    Tok::Name(m) => m.clone(),
                    _ => String::new(),
                };
                if method != "append" {
                    self.next();
                    self.next();
                    return Err(self.unsupported(format!("method call `{name}.{method}()`")));
                }
                self.next();
                self.next();
                self.next();
                self.expect_punct("(")?;
                let value = self.expr()?;
                self.expect_punct(")")?;
                self.expect_newline()?;
                Ok(Statement::Append { list: name, value })
            }
            Tok::Punct("=") => {
                self.next();
                self.next();
                self.assignment(name)
            }
            Tok::Punct(op @ ("+=" | "-=" | "*=" | "/=")) => {
                self.next();
                Err(self.unsupported(format!("augmented assignment `{op}`")))
            }
            Tok::Punct(",") => {
                self.next();
                Err(self.unsupported("tuple assignment"))
            }
            Tok::Punct("(") => Err(self.unsupported(format!("call to `{name}()`"))),
            _ => {
                self.next();
                Err(self.expected("`=`"))
            }
        }
    }

    fn assignment(&mut self, target: String) -> PResult<Statement> {
        if self.is_name("await") {
            self.next();
            let (role, args) = self.role_call()?;
            self.expect_newline()?;
            return Ok(Statement::Call(self.bind_call(target, role, args)?));
        }
        if self.is_punct("[") {
            if matches!(self.peek_n(1), Tok::Name(n) if n == "await") {
                self.next();
                self.next();
                let (role, args) = self.role_call()?;
                self.expect_keyword("for")?;
                let item = self.expect_name()?;
                self.expect_keyword("in")?;
                let source = self.expr()?;
                if self.is_name("if") {
                    return Err(self.unsupported("filtered comprehension"));
                }
                self.expect_punct("]")?;
                self.expect_newline()?;
                let call = self.bind_call(target, role, args)?;
                return Ok(Statement::MapCall { item, source, call });
            }
            let items = match self.expr()? {
                Expr::List(items) => items,
                _ => unreachable!("`[` always parses to a list"),
            };
            self.expect_newline()?;
            return Ok(Statement::ListInit { var: target, items });
        }
        match self.peek().clone() {
            Tok::Name(n) if self.peek_n(1) == &Tok::Punct("(") => Err(self.unsupported(format!("call to `{n}()`"))),
            Tok::Unsupported(c) => Err(self.unsupported(c)),
            _ => Err(self.unsupported(format!("plain assignment to `{target}` (only awaited calls and lists)"))),
        }
    }

    fn role_call(&mut self) -> PResult<(String, Vec<(Option<String>, Expr)>)> {
        if !self.is_name("self") {
            return Err(self.expected("`self.<role>(...)`"));
        }
        self.next();
        self.expect_punct(".")?;
        let role = self.expect_name()?;
        self.expect_punct("(")?;
        let mut args = Vec::new();
        while !self.is_punct(")") {
            let named = match (self.peek(), self.peek_n(1)) {
                (Tok::Name(n), Tok::Punct("=")) => Some(n.clone()),
                _ => None,
            };
            if named.is_some() {
                self.next();
                self.next();
            } else if args.iter().any(|(n, _): &(Option<String>, Expr)| n.is_some()) {
                return Err(self.expected("keyword argument after keyword arguments"));
            }
            let value = self.expr()?;
            args.push((named, value));
            if !self.eat_punct(",") {
                break;
            }
        }
        self.expect_punct(")")?;
        Ok((role, args))
    }

    /// Bind positional arguments to parameter names via the role's arity.
    fn bind_call(&self, output: String, role: String, raw: Vec<(Option<String>, Expr)>) -> PResult<Call> {
        let params = self.roles.iter().find(|r| r.id == role).map(|r| r.kind.arity());
        let mut args = BTreeMap::new();
        for (i, (name, value)) in raw.into_iter().enumerate() {
            let key = match name {
                Some(n) => n,
                None => match params {
                    Some(params) => match params.get(i) {
                        Some(p) => p.name.to_string(),
                        None => {
                            let (line, col) = self.here();
                            return Err(ParseError::syntax(
                                line,
                                col,
                                format!("too many positional arguments in call to `{role}` (takes {})", params.len()),
                            )
                            .into());
                        }
                    },
                    None => format!("_{i}"),
                },
            };
            if args.insert(key.clone(), value).is_some() {
                let (line, col) = self.here();
                return Err(ParseError::syntax(line, col, format!("argument `{key}` given twice in call to `{role}`")).into());
            }
        }
        Ok(Call { output, role, args })
    }

    fn for_loop(&mut self) -> PResult<Statement> {
        self.next(); // for
        let var = self.expect_name()?;
        self.expect_keyword("in")?;
        if !self.is_name("range") {
            return Err(self.unsupported("iteration over anything but `range(<int>)`"));
        }
        self.next();
        self.expect_punct("(")?;
        let count = match self.peek().clone() {
            Tok::Int(n) => {
                self.next();
                n
            }
            _ => return Err(self.unsupported("loop bound that is not an integer literal")),
        };
        if !self.is_punct(")") {
            return Err(self.unsupported("`range` with more than one argument"));
        }
        self.next();
        self.expect_punct(":")?;
        self.expect_newline()?;
        self.expect_indent()?;
        let body = self.block()?;
        let count = u32::try_from(count).unwrap_or(0);
        Ok(Statement::Loop { var, count, body })
    }

    /// `if not v or not v.strip():`, `if not v:` or `if not v.strip():`
    /// followed by a single `v = <expr>`.
    fn fallback(&mut self) -> PResult<Statement> {
        self.next(); // if
        let general = |p: &Self| p.unsupported("general conditional (only the is-empty fallback `if not x or not x.strip(): x = ...`)");
        if !self.is_name("not") {
            return Err(general(self));
        }
        self.next();
        let var = match self.peek().clone() {
            Tok::Name(n) if !is_keyword(&n) => {
                self.next();
                n
            }
            _ => return Err(general(self)),
        };
        let mut strip_seen = self.strip_suffix()?;
        if self.is_name("or") {
            self.next();
            if !self.is_name("not") {
                return Err(general(self));
            }
            self.next();
            match self.peek().clone() {
                Tok::Name(n) if n == var => {
                    self.next();
                }
                _ => return Err(general(self)),
            }
            if !self.strip_suffix()? || strip_seen {
                return Err(general(self));
            }
            strip_seen = true;
        }
        let _ = strip_seen;
        if !self.is_punct(":") {
            return Err(general(self));
        }
        self.next();
        self.expect_newline()?;
        self.expect_indent()?;
        match self.peek().clone() {
            Tok::Name(n) if n == var && self.peek_n(1) == &Tok::Punct("=") => {
                self.next();
                self.next();
            }
            _ => return Err(self.unsupported("fallback body other than a single reassignment of the guarded variable")),
        }
        let replacement = self.expr()?;
        self.expect_newline()?;
        if !matches!(self.peek(), Tok::Dedent) {
            return Err(self.unsupported("fallback body with more than one statement"));
        }
        self.next();
        if self.is_name("else") || self.is_name("elif") {
            return Err(self.unsupported("`else` branch"));
        }
        Ok(Statement::Fallback { var, replacement })
    }

    fn strip_suffix(&mut self) -> PResult<bool> {
        if !self.is_punct(".") {
            return Ok(false);
        }
        self.next();
        if !self.is_name("strip") {
            return Err(self.unsupported("method call in condition"));
        }
        self.next();
        self.expect_punct("(")?;
        self.expect_punct(")")?;
        Ok(true)
    }

    fn expr(&mut self) -> PResult<Expr> {
        let base = self.primary()?;
        if self.is_name("if") {
            let Expr::Var(name) = &base else {
                return Err(self.unsupported("conditional expression"));
            };
            let name = name.clone();
            self.next();
            match self.peek().clone() {
                Tok::Str(s) if s == name => {
                    self.next();
                }
                _ => return Err(self.unsupported("conditional expression")),
            }
            self.expect_keyword("in")?;
            self.expect_keyword("locals")?;
            self.expect_punct("(")?;
            self.expect_punct(")")?;
            self.expect_keyword("else")?;
            let otherwise = self.expr()?;
            return Ok(Expr::DefinedOr { name, otherwise: Box::new(otherwise) });
        }
        if let Tok::Punct(op @ ("+" | "-" | "*" | "/" | "%" | "==" | "!=" | "<" | ">" | "<=" | ">=")) = self.peek().clone() {
            return Err(self.unsupported(format!("binary operator `{op}`")));
        }
        if self.is_name("and") || self.is_name("or") || self.is_name("in") || self.is_name("not") {
            return Err(self.unsupported("boolean expression"));
        }
        Ok(base)
    }

    fn primary(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::Str(s) => {
                self.next();
                Ok(Expr::Str(s))
            }
            Tok::Int(i) => {
                self.next();
                Ok(Expr::Int(i))
            }
            Tok::Punct("-") if matches!(self.peek_n(1), Tok::Int(_)) => {
                self.next();
                let Tok::Int(i) = self.next().tok else { unreachable!() };
                Ok(Expr::Int(-i))
            }
            Tok::Unsupported(c) => Err(self.unsupported(c)),
            Tok::Punct("[") => {
                self.next();
                let mut items = Vec::new();
                while !self.is_punct("]") {
                    if self.is_name("await") {
                        return Err(self.unsupported("comprehension outside a direct assignment"));
                    }
                    items.push(self.expr()?);
                    if self.is_name("for") {
                        return Err(self.unsupported("comprehension without an awaited role call"));
                    }
                    if !self.eat_punct(",") {
                        break;
                    }
                }
                self.expect_punct("]")?;
                Ok(Expr::List(items))
            }
            Tok::Punct("{") => {
                self.next();
                let mut entries = Vec::new();
                while !self.is_punct("}") {
                    let key = match self.peek().clone() {
                        Tok::Str(s) => {
                            self.next();
                            s
                        }
                        _ => return Err(self.unsupported("dict key that is not a string literal")),
                    };
                    self.expect_punct(":")?;
                    let value = self.expr()?;
                    entries.push((key, value));
                    if !self.eat_punct(",") {
                        break;
                    }
                }
                self.expect_punct("}")?;
                Ok(Expr::Dict(entries))
            }
            Tok::Punct("(") => Err(self.unsupported("parenthesised expression or tuple")),
            Tok::Name(n) => match n.as_str() {
                "None" => {
                    self.next();
                    Ok(Expr::None)
                }
                "True" | "False" => Err(self.unsupported("boolean literal")),
                "await" => Err(self.unsupported("await inside an expression")),
                "lambda" => Err(self.unsupported("lambda")),
                "not" => Err(self.unsupported("boolean expression")),
                "self" => {
                    self.next();
                    self.expect_punct(".")?;
                    let attr = self.expect_name()?;
                    if self.is_punct("(") {
                        return Err(self.unsupported(format!("call to `self.{attr}()` outside an await")));
                    }
                    Ok(if attr == "problem" { Expr::Query } else { Expr::Attr(attr) })
                }
                _ if is_keyword(&n) => Err(self.expected("expression")),
                _ => {
                    self.next();
                    if self.is_punct("(") {
                        return Err(self.unsupported(format!("call to `{n}()`")));
                    }
                    if self.is_punct(".") {
                        let method = match self.peek_n(1) {
                            Tok::Name(m) => m.clone(),
                            _ => String::new(),
                        };
                        return Err(self.unsupported(format!("attribute access `{n}.{method}`")));
                    }
                    if self.eat_punct("[") {
                        let index = match self.peek().clone() {
                            Tok::Int(i) if i >= 0 => {
                                self.next();
                                i as usize
                            }
                            _ => return Err(self.unsupported("index that is not a non-negative integer literal")),
                        };
                        self.expect_punct("]")?;
                        return Ok(Expr::Index { var: n, index });
                    }
                    Ok(Expr::Var(n))
                }
            },
            _ => Err(self.expected("expression")),
        }
    }
}

fn is_keyword(name: &str) -> bool {
    matches!(
        name,
        "False" | "None" | "True" | "and" | "as" | "assert" | "async" | "await" | "break" | "class" | "continue" | "def" | "del"
            | "elif" | "else" | "except" | "finally" | "for" | "from" | "global" | "if" | "import" | "in" | "is" | "lambda"
            | "nonlocal" | "not" | "or" | "pass" | "raise" | "return" | "try" | "while" | "with" | "yield"
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::ir::PLACEHOLDER;

    const MINIMAL: &str = "class Workflow:\n    def __init__(self, problem):\n        self.problem = problem\n        self.solver = operator.Custom(\"llm_symbol\")\n\n    async def run_workflow(self):\n        answer = await self.solver(instruction=\"Solve it.\")\n        return answer\n";

    #[test]
    fn minimal_program() {
        let t = parse_template(MINIMAL).unwrap();
        assert_eq!(t.roles.len(), 1);
        assert_eq!(t.roles[0].slot.as_deref(), Some(PLACEHOLDER));
        assert_eq!(t.program.statements.len(), 2);
        assert!(matches!(t.program.statements[1], Statement::Return { .. }));
    }

    #[test]
    fn nq_listing() {
        let t = parse_template(corpus::NQ).unwrap();
        let kinds: Vec<_> = t.roles.iter().map(|r| r.kind).collect();
        assert_eq!(
            kinds,
            [
                OperatorKind::Custom,
                OperatorKind::Custom,
                OperatorKind::ScEnsemble,
                OperatorKind::Review,
                OperatorKind::AnswerGenerate
            ]
        );
        // five awaited calls in the listing: two candidates, ensemble, review, answer
        assert_eq!(t.call_count(), 5);
        let Statement::Call(c) = &t.program.statements[0] else { panic!() };
        assert_eq!(c.args.get("instruction"), Some(&Expr::Str("Generate a detailed answer with reasoning.".into())));
    }

    #[test]
    fn humaneval_listing() {
        let t = parse_template(corpus::HUMANEVAL).unwrap();
        let s = &t.program.statements;
        assert!(matches!(&s[0], Statement::ListInit { var, items } if var == "solution_list" && items.is_empty()));
        let Statement::Loop { count, body, .. } = &s[1] else { panic!("expected loop") };
        assert_eq!(*count, 3);
        assert!(matches!(&body[1], Statement::Append { list, .. } if list == "solution_list"));
        let Statement::Call(ens) = &s[2] else { panic!() };
        assert_eq!(t.role(&ens.role).unwrap().kind, OperatorKind::ScEnsemble);
        let Statement::Call(test) = &s[3] else { panic!() };
        assert_eq!(t.role(&test.role).unwrap().kind, OperatorKind::Test);
        assert!(matches!(test.args.get("solution"), Some(Expr::DefinedOr { name, .. }) if name == "tested_solution"));
    }

    #[test]
    fn hotpotqa_listing() {
        let t = parse_template(corpus::HOTPOTQA).unwrap();
        assert!(matches!(&t.program.statements[0], Statement::ListInit { items, .. } if items.len() == 3));
        assert!(matches!(&t.program.statements[1], Statement::MapCall { item, .. } if item == "instruction"));
    }

    #[test]
    fn case_listings_parse() {
        for src in [corpus::CASE1_BROKEN, corpus::CASE1_FIXED, corpus::CASE2_BROKEN, corpus::CASE2_FIXED, corpus::MATH] {
            parse_template(src).unwrap();
        }
        let fixed = parse_template(corpus::CASE1_FIXED).unwrap();
        assert!(fixed
            .program
            .statements
            .iter()
            .any(|s| matches!(s, Statement::Fallback { var, replacement: Expr::Index { var: l, index: 0 } } if var == "ensembled_solution" && l == "solution_list")));
    }

    #[test]
    fn browsecomp_rejected_at_first_unsupported_construct() {
        let err = parse_template(corpus::BROWSECOMP).unwrap_err();
        let TemplateError::Parse(p) = err else { panic!("{err:?}") };
        assert_eq!(p.construct.as_deref(), Some("call to `set()`"));
        assert_eq!(p.line, 13);
    }

    #[test]
    fn unknown_operator() {
        let src = MINIMAL.replace("operator.Custom", "operator.Summarize");
        assert!(matches!(parse_template(&src), Err(TemplateError::UnknownOperatorKind { kind, line: 4, .. }) if kind == "Summarize"));
    }

    #[test]
    fn unbound_variable() {
        let src = MINIMAL.replace("return answer", "return nothing");
        assert!(matches!(parse_template(&src), Err(TemplateError::UnboundVariable { name, .. }) if name == "nothing"));
    }

    #[test]
    fn unbounded_loop() {
        let src = "class Workflow:\n    def __init__(self, problem):\n        self.a = operator.Custom(\"llm_symbol\")\n    async def run_workflow(self):\n        xs = []\n        for _ in range(0):\n            x = await self.a(\"go\")\n            xs.append(x)\n        y = await self.a(\"go\")\n        return y\n";
        assert!(matches!(parse_template(src), Err(TemplateError::UnboundedLoop { count: 0, line: Some(6), .. })));
        let big = src.replace("range(0)", "range(17)");
        assert!(matches!(parse_template(&big), Err(TemplateError::UnboundedLoop { count: 17, .. })));
        let ok = src.replace("range(0)", "range(16)");
        parse_template(&ok).unwrap();
        let opts = ValidationOptions { max_loop: 20 };
        parse_template_with(&big, &opts).unwrap();
    }

    #[test]
    fn syntax_error_has_position() {
        let src = MINIMAL.replace("async def run_workflow(self):", "async def run_workflow(self)");
        let TemplateError::Parse(p) = parse_template(&src).unwrap_err() else { panic!() };
        assert_eq!(p.line, 6);
        assert!(p.message.contains("expected `:`"), "{}", p.message);
    }

    #[test]
    fn too_many_positional_arguments() {
        let src = MINIMAL.replace("instruction=\"Solve it.\"", "\"a\", \"b\", \"c\"");
        assert!(parse_template(&src).is_err());
    }

    #[test]
    fn reviewer_alias_and_tool_role() {
        let src = "class Workflow:\n    def __init__(self, problem: str, **kwargs):\n        self.problem = problem\n        self.r = operator.Reviewer(\"llm_symbol\", instruction=\"Check.\")\n        self.calc = operator.Tool(\"calculator\")\n    async def run_workflow(self):\n        v = await self.calc(self.problem)\n        w = await self.r(v)\n        return {\"solution\": w}\n";
        let t = parse_template(src).unwrap();
        assert_eq!(t.roles[0].kind, OperatorKind::Review);
        assert_eq!(t.roles[0].instruction.as_deref(), Some("Check."));
        assert_eq!(t.roles[1].slot, None);
        assert!(t.required_tools.contains("calculator"));
    }
}
