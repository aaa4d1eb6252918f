use std::collections::{BTreeMap, BTreeSet};

#[path = "support/oracles.rs"]
mod oracles;

use mas2_core::corpus;
use mas2_core::ir::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

const POOL: [&str; 5] = ["gpt-4o", "gpt-4o-mini", "qwen/qwen-2.5-72b-instruct", "qwen/qwen3-14b", "qwen/qwq-32b"];

fn role(id: &str, kind: OperatorKind) -> RoleSpec {
    RoleSpec { id: id.into(), kind, slot: Some(PLACEHOLDER.into()), tool: None, instruction: None, args: vec![] }
}

fn call(output: &str, role: &str, args: &[(&str, Expr)]) -> Statement {
    Statement::Call(Call {
        output: output.into(),
        role: role.into(),
        args: args.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
    })
}

/// Random well-formed template: a chain of text calls, optionally a sampling
/// loop feeding an ensemble, optionally a fallback, then a return.
fn random_template(seed: u64) -> WorkflowTemplate {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut roles = Vec::new();
    let mut stmts = Vec::new();
    let mut text_vars: Vec<String> = Vec::new();
    let pick_text = |rng: &mut ChaCha8Rng, vars: &[String]| -> Expr {
        match rng.random_range(0..3) {
            0 if !vars.is_empty() => Expr::Var(vars[rng.random_range(0..vars.len())].clone()),
            1 => Expr::Str(format!("step note {}", rng.random_range(0..100))),
            _ => Expr::Query,
        }
    };
    let n = rng.random_range(1..5);
    for i in 0..n {
        let id = format!("r{i}");
        let out = format!("v{i}");
        match rng.random_range(0..4) {
            0 => {
                roles.push(role(&id, OperatorKind::Custom));
                let input = pick_text(&mut rng, &text_vars);
                stmts.push(call(&out, &id, &[("input", input), ("instruction", Expr::Str("answer briefly".into()))]));
            }
            1 => {
                roles.push(role(&id, OperatorKind::AnswerGenerate));
                let input = pick_text(&mut rng, &text_vars);
                stmts.push(call(&out, &id, &[("input", input)]));
            }
            2 if !text_vars.is_empty() => {
                roles.push(role(&id, OperatorKind::Review));
                let pre = Expr::Var(text_vars[rng.random_range(0..text_vars.len())].clone());
                stmts.push(call(&out, &id, &[("pre_solution", pre)]));
            }
            _ => {
                roles.push(role(&id, OperatorKind::Programmer));
                let a = pick_text(&mut rng, &text_vars);
                stmts.push(call(&out, &id, &[("analysis", a)]));
            }
        }
        text_vars.push(out);
    }
    if rng.random_bool(0.5) {
        let list = "samples".to_string();
        stmts.push(Statement::ListInit { var: list.clone(), items: vec![] });
        roles.push(role("sampler", OperatorKind::Custom));
        roles.push(role("ensemble", OperatorKind::ScEnsemble));
        let count = rng.random_range(1..=DEFAULT_MAX_LOOP);
        stmts.push(Statement::Loop {
            var: "i".into(),
            count,
            body: vec![
                call("s", "sampler", &[("input", Expr::Query), ("instruction", Expr::Str("try".into()))]),
                Statement::Append { list: list.clone(), value: Expr::Var("s".into()) },
            ],
        });
        stmts.push(call("best", "ensemble", &[("solutions", Expr::Var(list))]));
        text_vars.push("best".into());
    }
    let last = text_vars.last().unwrap().clone();
    if rng.random_bool(0.5) && text_vars.len() > 1 {
        stmts.push(Statement::Fallback { var: last.clone(), replacement: Expr::Var(text_vars[0].clone()) });
    }
    stmts.push(Statement::Return { value: Expr::Var(last) });
    WorkflowTemplate {
        class_name: "Workflow".into(),
        fields: vec![],
        roles,
        program: ControlProgram { statements: stmts },
        required_tools: BTreeSet::new(),
        source_text: None,
    }
}

fn corpus_templates() -> Vec<(&'static str, WorkflowTemplate)> {
    corpus::PARSEABLE.iter().map(|(name, src)| (*name, parse_template(src).unwrap())).collect()
}

fn assert_slot_only_diff(t: &WorkflowTemplate, assignment: &BackboneAssignment) {
    let abs = t.abstracted();
    let inst = substitute_backbones(&abs, assignment, &POOL).unwrap();
    let a = oracles::json_tokens(&serialize_template(&abs));
    let b = oracles::json_tokens(&inst.canonical());
    assert_eq!(a.len(), b.len(), "token counts differ");
    let placeholder = format!("\"{PLACEHOLDER}\"");
    let diffs: Vec<(&String, &String)> = a.iter().zip(&b).filter(|(x, y)| x != y).collect();
    for (x, y) in &diffs {
        assert_eq!(**x, placeholder);
        let backbone = y.trim_matches('"');
        assert!(POOL.contains(&backbone), "{y}");
    }
    let changed = abs.llm_roles().filter(|r| assignment.get(&r.id) != Some(PLACEHOLDER)).count();
    assert_eq!(diffs.len(), changed);
}

fn assignment_for(t: &WorkflowTemplate, seed: u64) -> BackboneAssignment {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    t.llm_roles().map(|r| (r.id.clone(), POOL[rng.random_range(0..POOL.len())].to_string())).collect()
}

#[test]
fn corpus_round_trips_through_canonical_and_dialect() {
    for (name, t) in corpus_templates() {
        let canon = serialize_template(&t);
        assert_eq!(parse_canonical(&canon).unwrap(), t, "{name}");
        let again = parse_template(&emit_dialect(&t)).unwrap();
        assert_eq!(again, t, "{name}");
        assert_eq!(serialize_template(&again), canon, "{name}");
    }
}

#[test]
fn corpus_substitution_is_slot_only() {
    for (i, (_, t)) in corpus_templates().into_iter().enumerate() {
        assert_slot_only_diff(&t, &assignment_for(&t, i as u64));
    }
}

#[test]
fn nq_digest_is_pinned() {
    let t = parse_template(corpus::NQ).unwrap();
    let digest = hex::encode(Sha256::digest(serialize_template(&t).as_bytes()));
    assert_eq!(digest, NQ_DIGEST);
    // Parsing again and serialising again gives the same bytes.
    let t2 = parse_template(corpus::NQ).unwrap();
    assert_eq!(serialize_template(&t2), serialize_template(&t));
}

const NQ_DIGEST: &str = "6468837c09cd4165a3825738584a1401a59cdfc3e006d6b9403ff67e0df5458d";

#[test]
fn browsecomp_is_rejected_at_first_unsupported_construct() {
    match parse_template(corpus::BROWSECOMP) {
        Err(TemplateError::Parse(e)) => {
            assert_eq!(e.construct.as_deref(), Some("call to `set()`"));
            assert_eq!(e.line, 13);
        }
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn graph_block_extraction_of_wrapped_listing() {
    let wrapped = format!("Here is the plan.\n<graph>\n{}\n</graph>\nThat is all.", corpus::HUMANEVAL);
    assert_eq!(extract_graph_block(&wrapped).unwrap(), corpus::HUMANEVAL.trim());
}

/// Mutations that each break exactly one template invariant, paired with
/// the finding kind expected for it.
fn mutate(t: &WorkflowTemplate, which: usize, rng: &mut ChaCha8Rng) -> Option<(WorkflowTemplate, &'static str)> {
    let mut m = t.clone();
    let stmts = &mut m.program.statements;
    let top_calls: Vec<usize> = stmts.iter().enumerate().filter(|(_, s)| matches!(s, Statement::Call(_))).map(|(i, _)| i).collect();
    match which {
        0 => {
            let r = m.roles[rng.random_range(0..m.roles.len())].clone();
            m.roles.push(r);
            Some((m, "duplicate_role"))
        }
        1 => {
            let &i = top_calls.get(rng.random_range(0..top_calls.len().max(1)))?;
            if let Statement::Call(c) = &mut stmts[i] {
                c.role = "ghost_role".into();
            }
            Some((m, "dangling_role"))
        }
        2 => {
            let &i = top_calls.get(rng.random_range(0..top_calls.len().max(1)))?;
            if let Statement::Call(c) = &mut stmts[i] {
                let key = c.args.keys().next()?.clone();
                c.args.insert(key, Expr::Var("never_written".into()));
            }
            Some((m, "unbound_variable"))
        }
        3 => {
            let l = stmts.iter_mut().find_map(|s| match s {
                Statement::Loop { count, .. } => Some(count),
                _ => None,
            })?;
            *l = if rng.random_bool(0.5) { 0 } else { DEFAULT_MAX_LOOP + 1 + rng.random_range(0..10) };
            Some((m, "unbounded_loop"))
        }
        4 => {
            stmts.pop();
            Some((m, "missing_return"))
        }
        5 => {
            let ret = stmts.last().cloned()?;
            let at = rng.random_range(0..stmts.len() - 1);
            stmts.insert(at, ret);
            Some((m, "return_not_last"))
        }
        6 => {
            let r = m.roles.iter_mut().find(|r| r.kind.uses_backbone())?;
            r.slot = None;
            Some((m, "missing_slot"))
        }
        7 => {
            let replacement = stmts.iter_mut().find_map(|s| match s {
                Statement::Fallback { replacement, .. } => Some(replacement),
                _ => None,
            })?;
            *replacement = Expr::Var("undefined_fallback".into());
            Some((m, "unbound_variable"))
        }
        _ => {
            // Read a variable one statement before it is written.
            let (i, c) = stmts.iter().enumerate().skip(1).find_map(|(i, s)| match s {
                Statement::Call(c) => Some((i, c.output.clone())),
                _ => None,
            })?;
            let earlier = top_calls.iter().copied().rev().find(|&j| j < i)?;
            if let Statement::Call(e) = &mut stmts[earlier] {
                let key = e.args.keys().next()?.clone();
                e.args.insert(key, Expr::Var(c));
            }
            Some((m, "unbound_variable"))
        }
    }
}

fn finding_tags(report: &ValidationReport) -> BTreeSet<String> {
    report
        .findings
        .iter()
        .map(|f| serde_json::to_value(f).unwrap()["invariant"].as_str().unwrap().to_string())
        .collect()
}

fn check_mutations(t: &WorkflowTemplate, seed: u64) {
    assert!(validate_template(t).is_valid(), "{:?}", validate_template(t).findings);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for which in 0..9 {
        if let Some((m, expected)) = mutate(t, which, &mut rng) {
            let report = validate_template(&m);
            let tags = finding_tags(&report);
            assert!(tags.contains(expected), "mutation {which}: expected {expected}, got {tags:?}");
        }
    }
}

#[test]
fn corpus_mutations_are_detected() {
    for (i, (_, t)) in corpus_templates().into_iter().enumerate() {
        check_mutations(&t, i as u64);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn random_templates_round_trip(seed in any::<u64>()) {
        let t = random_template(seed);
        prop_assert!(validate_template(&t).is_valid(), "{:?}", validate_template(&t).findings);
        let canon = serialize_template(&t);
        prop_assert_eq!(parse_canonical(&canon).unwrap(), t.clone());
        let reparsed = parse_template(&emit_dialect(&t)).unwrap();
        prop_assert_eq!(serialize_template(&reparsed), canon);
    }

    #[test]
    fn random_substitution_is_slot_only(seed in any::<u64>()) {
        let t = random_template(seed);
        assert_slot_only_diff(&t, &assignment_for(&t, seed ^ 0x5eed));
    }

    #[test]
    fn random_single_mutations_are_detected(seed in any::<u64>()) {
        check_mutations(&random_template(seed), seed);
    }

    #[test]
    fn argument_insertion_order_does_not_change_bytes(seed in any::<u64>()) {
        let t = random_template(seed);
        let mut rebuilt = t.clone();
        for s in rebuilt.program.statements.iter_mut() {
            if let Statement::Call(c) = s {
                let args: Vec<_> = c.args.clone().into_iter().rev().collect();
                c.args = args.into_iter().collect::<BTreeMap<_, _>>();
            }
        }
        prop_assert_eq!(serialize_template(&rebuilt), serialize_template(&t));
    }
}
