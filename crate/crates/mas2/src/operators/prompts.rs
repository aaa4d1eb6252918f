//! Operator prompt templates. Each begins with a fixed heading so that
//! scripted mocks and log readers can tell the operators apart.

use std::fmt::Write as _;

use mas2_core::ir::RoleSpec;

pub const CUSTOM: &str = "## Instruction";
pub const ANSWER: &str = "## Answer from the evidence";
pub const CODE: &str = "## Write a complete Python solution";
pub const PROGRAMMER: &str = "## Turn the analysis into a Python program";
pub const REVIEW: &str = "## Review the proposed solution";
pub const ENSEMBLE: &str = "## Pick the most consistent candidate";
pub const REPAIR: &str = "## The solution failed its checks";

pub fn system(role: &RoleSpec) -> String {
    format!("You are `{}`, a {} agent inside a larger workflow. Follow the output format exactly.", role.id, role.kind.name())
}

fn task(out: &mut String, query: &str) {
    let _ = writeln!(out, "## Task\n{}\n", query.trim());
}

fn extra(out: &mut String, role_instruction: Option<&str>) {
    if let Some(r) = role_instruction.filter(|r| !r.trim().is_empty()) {
        let _ = writeln!(out, "## Role guidance\n{}\n", r.trim());
    }
}

pub fn custom(query: &str, input: Option<&str>, role_instruction: Option<&str>, instruction: &str) -> String {
    let mut s = String::new();
    task(&mut s, query);
    if let Some(i) = input.filter(|i| !i.trim().is_empty() && i.trim() != query.trim()) {
        let _ = writeln!(s, "## Input\n{}\n", i.trim());
    }
    extra(&mut s, role_instruction);
    let _ = write!(s, "{CUSTOM}\n{}", instruction.trim());
    s
}

pub fn answer_generate(query: &str, context: Option<&str>, input: Option<&str>, role_instruction: Option<&str>) -> String {
    let mut s = String::new();
    task(&mut s, query);
    for (title, v) in [("Context", context), ("Input", input)] {
        if let Some(v) = v.filter(|v| !v.trim().is_empty()) {
            let _ = writeln!(s, "## {title}\n{}\n", v.trim());
        }
    }
    extra(&mut s, role_instruction);
    let _ = write!(s, "{ANSWER}\nThink briefly, then give only the final answer on the last line.");
    s
}

pub fn code_generate(query: &str, role_instruction: Option<&str>, instruction: &str) -> String {
    let mut s = String::new();
    task(&mut s, query);
    extra(&mut s, role_instruction);
    let _ = write!(s, "{CODE}\n{}\nReturn the code in one ```python block.", instruction.trim());
    s
}

pub fn programmer(query: &str, analysis: &str, instruction: Option<&str>, role_instruction: Option<&str>) -> String {
    let mut s = String::new();
    task(&mut s, query);
    let _ = writeln!(s, "## Analysis\n{}\n", analysis.trim());
    extra(&mut s, role_instruction);
    let _ = writeln!(s, "{PROGRAMMER}");
    if let Some(i) = instruction.filter(|i| !i.trim().is_empty()) {
        let _ = writeln!(s, "{}", i.trim());
    }
    s.push_str("Return the code in one ```python block.");
    s
}

pub fn review(query: &str, pre_solution: &str, role_instruction: Option<&str>) -> String {
    let mut s = String::new();
    task(&mut s, query);
    let _ = writeln!(s, "## Proposed solution\n{}\n", pre_solution.trim());
    extra(&mut s, role_instruction);
    let _ = write!(
        s,
        "{REVIEW}\nCheck it for errors and fix what is wrong. Reply with a JSON object with exactly two non-empty string fields: \"thought\" (your critique) and \"revised_solution\" (the corrected solution)."
    );
    s
}

pub fn ensemble(query: &str, candidates: &[String], role_instruction: Option<&str>) -> String {
    let mut s = String::new();
    task(&mut s, query);
    for (i, c) in candidates.iter().enumerate() {
        let _ = writeln!(s, "## Candidate {}\n{}\n", label(i), c.trim());
    }
    extra(&mut s, role_instruction);
    let last = label(candidates.len().saturating_sub(1));
    let _ = write!(s, "{ENSEMBLE}\nChoose the candidate that agrees most with the others. Reply with its letter only (A to {last}).");
    s
}

pub fn repair(query: &str, candidate: &str, failure: &str) -> String {
    let mut s = String::new();
    task(&mut s, query);
    let _ = writeln!(s, "## Candidate\n```python\n{}\n```\n", candidate.trim());
    let _ = write!(s, "{REPAIR}\n{}\nFix the code. Return the full corrected code in one ```python block.", failure.trim());
    s
}

pub fn label(i: usize) -> char {
    (b'A' + (i as u8).min(25)) as char
}
