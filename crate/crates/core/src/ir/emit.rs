//! Re-emit a template as dialect source, for rectifier prompts.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use super::lexer::quote;
use super::{Call, Expr, Statement, WorkflowTemplate};

const INDENT: &str = "    ";

/// Dialect source that parses back to a template equal to `t`.
pub fn emit_dialect(t: &WorkflowTemplate) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "class {}:", t.class_name);
    let _ = writeln!(out, "{INDENT}def __init__(self, problem) -> None:");
    let _ = writeln!(out, "{INDENT}{INDENT}self.problem = problem");
    for f in &t.fields {
        let _ = writeln!(out, "{INDENT}{INDENT}self.{} = {}", f.name, expr(&f.value));
    }
    for r in &t.roles {
        let mut args: Vec<String> = Vec::new();
        let first = if r.kind.uses_backbone() { r.slot.as_deref() } else { r.tool.as_deref() };
        args.push(quote(first.unwrap_or_default()));
        args.extend(r.args.iter().filter(|a| a.name.is_none()).map(|a| expr(&a.value)));
        args.extend(r.args.iter().filter_map(|a| a.name.as_ref().map(|n| format!("{n}={}", expr(&a.value)))));
        if let Some(i) = &r.instruction {
            args.push(format!("instruction={}", quote(i)));
        }
        let _ = writeln!(out, "{INDENT}{INDENT}self.{} = operator.{}({})", r.id, r.kind, args.join(", "));
    }
    out.push('\n');
    let _ = writeln!(out, "{INDENT}async def run_workflow(self):");
    block(&mut out, t, &t.program.statements, 2);
    out
}

fn block(out: &mut String, t: &WorkflowTemplate, stmts: &[Statement], depth: usize) {
    let pad = INDENT.repeat(depth);
    for s in stmts {
        match s {
            Statement::Call(c) => {
                let _ = writeln!(out, "{pad}{} = await {}", c.output, call(t, c));
            }
            Statement::ListInit { var, items } => {
                let _ = writeln!(out, "{pad}{var} = {}", expr(&Expr::List(items.clone())));
            }
            Statement::Append { list, value } => {
                let _ = writeln!(out, "{pad}{list}.append({})", expr(value));
            }
            Statement::Loop { var, count, body } => {
                let _ = writeln!(out, "{pad}for {var} in range({count}):");
                block(out, t, body, depth + 1);
            }
            Statement::MapCall { item, source, call: c } => {
                let _ = writeln!(out, "{pad}{} = [await {} for {item} in {}]", c.output, call(t, c), expr(source));
            }
            Statement::Fallback { var, replacement } => {
                let _ = writeln!(out, "{pad}if not {var} or not {var}.strip():");
                let _ = writeln!(out, "{pad}{INDENT}{var} = {}", expr(replacement));
            }
            Statement::Return { value } => {
                let _ = writeln!(out, "{pad}return {}", expr(value));
            }
        }
    }
}

fn call(t: &WorkflowTemplate, c: &Call) -> String {
    // Arity order for known roles keeps the output close to what authors write.
    let mut keys: Vec<&String> = c.args.keys().collect();
    if let Some(role) = t.role(&c.role) {
        let arity = role.kind.arity();
        keys.sort_by_key(|k| arity.iter().position(|p| p.name == k.as_str()).unwrap_or(usize::MAX));
    }
    let args: Vec<String> = keys.iter().map(|k| format!("{k}={}", expr(&c.args[*k]))).collect();
    format!("self.{}({})", c.role, args.join(", "))
}

fn expr(e: &Expr) -> String {
    match e {
        Expr::Str(s) => quote(s),
        Expr::Int(i) => format!("{i}"),
        Expr::None => "None".into(),
        Expr::Query => "self.problem".into(),
        Expr::Attr(a) => format!("self.{a}"),
        Expr::Var(v) => v.clone(),
        Expr::Index { var, index } => format!("{var}[{index}]"),
        Expr::List(items) => format!("[{}]", items.iter().map(expr).collect::<Vec<_>>().join(", ")),
        Expr::Dict(entries) => format!(
            "{{{}}}",
            entries.iter().map(|(k, v)| format!("{}: {}", quote(k), expr(v))).collect::<Vec<_>>().join(", ")
        ),
        Expr::DefinedOr { name, otherwise } => format!("{name} if '{name}' in locals() else {}", expr(otherwise)),
    }
}
