use std::sync::Arc;

use mas2::executor::{execute, EventKind, ExecEnv, ExecutorConfig, Judge, Spender, TerminalReason, TrajectoryOutcome};
use mas2::gateway::{Catalog, Gateway, MockBackend, MockReply, MockRule, MockScript};
use mas2::meta::{prompt_marker, MetaAgent, MetaAgentConfig, TriggerCause};
use mas2::operators::{prompts, Sandbox};
use mas2_core::corpus;
use mas2_core::ir::{parse_template, substitute_backbones, BackboneAssignment, InstantiatedWorkflow, Statement};
use mas2_core::trigger::{should_rectify, OutcomeFlag};
use mas2_core::Money;
use proptest::prelude::*;

fn concrete(src: &str, backbone: &str) -> InstantiatedWorkflow {
    let t = parse_template(src).unwrap();
    let a: BackboneAssignment = t.llm_roles().map(|r| (r.id.clone(), backbone.to_string())).collect();
    substitute_backbones(&t, &a, &Catalog::seed()).unwrap()
}

fn gateway(script: MockScript) -> Gateway {
    Gateway::new(Catalog::seed(), Arc::new(MockBackend::new(script)))
}

fn wrap(src: &str) -> String {
    format!("<graph>\n{src}\n</graph>")
}

fn run(wf: InstantiatedWorkflow, script: MockScript, judge: Judge, meta: &MetaAgentConfig) -> TrajectoryOutcome {
    let gw = gateway(script);
    let sandbox = Sandbox::default();
    let env = ExecEnv { gateway: &gw, docstore: None, sandbox: &sandbox, checks: None };
    execute(wf, "Write solve() returning 1.", &judge, meta, &ExecutorConfig::default(), &env, "t0", 7)
}

const ONE_CALL: &str = r#"class Workflow:
    def __init__(self, problem) -> None:
        self.problem = problem
        self.answer = operator.AnswerGenerate("llm_symbol", self.problem)

    async def run_workflow(self):
        answer = await self.answer(input=self.problem)
        return answer
"#;

fn roomy() -> MetaAgentConfig {
    MetaAgentConfig { theta_c: Money::from_picos(u64::MAX / 2), ..Default::default() }
}

/// Replays the log: every trigger follows a checkpoint where the predicate
/// held, and every such checkpoint is followed by a trigger.
fn check_trigger_faithfulness(out: &TrajectoryOutcome, theta: Money) {
    let mut cost = Money::ZERO;
    let mut flag = OutcomeFlag::Nominal;
    let mut armed = None;
    let mut paused = false;
    for e in &out.event_log {
        match &e.kind {
            EventKind::CostDelta { cost: c, .. } => cost += *c,
            EventKind::OperatorError { handled: false, .. } | EventKind::RuntimeError { .. } => flag = OutcomeFlag::Failure,
            EventKind::RectificationAccepted { .. } => {
                flag = OutcomeFlag::Nominal;
                paused = false;
            }
            _ => {}
        }
        match &e.kind {
            EventKind::OperatorFinish { .. } | EventKind::OperatorError { .. } | EventKind::RuntimeError { .. } if !paused => {
                armed = Some(should_rectify(cost, flag, theta));
            }
            EventKind::Trigger { cause, .. } => {
                assert_eq!(armed.take(), Some(true), "trigger without a firing checkpoint");
                assert_eq!(*cause == TriggerCause::Failure, flag == OutcomeFlag::Failure);
                paused = true;
            }
            EventKind::OperatorStart { .. } | EventKind::Answer { .. } | EventKind::FallbackApplied { .. } => {
                assert_ne!(armed.take(), Some(true), "checkpoint fired but no trigger followed");
            }
            _ => {}
        }
    }
}

fn check_invariants(out: &TrajectoryOutcome, wf0: &InstantiatedWorkflow, meta: &MetaAgentConfig) {
    assert_eq!(out.total_cost, out.logged_cost());
    assert_eq!(&out.workflow_versions[0], wf0);
    assert!(out.rectification_attempts <= meta.max_rectifications);
    assert_eq!(out.rectification_count as usize + 1, out.workflow_versions.len());
    for r in &out.rectifications {
        if let Some(v) = r.produced_version {
            assert!(v >= 1 && v < out.workflow_versions.len());
        }
    }
    let produced: Vec<_> = out.rectifications.iter().filter_map(|r| r.produced_version).collect();
    assert_eq!(produced, (1..out.workflow_versions.len()).collect::<Vec<_>>());
    if out.final_answer.is_none() {
        assert!(!out.success);
    }
    assert!(matches!(out.event_log.last().unwrap().kind, EventKind::Terminal { .. }));
    let seqs: Vec<u64> = out.event_log.iter().map(|e| e.seq).collect();
    assert_eq!(seqs, (0..seqs.len() as u64).collect::<Vec<_>>());
    check_trigger_faithfulness(out, meta.theta_c);
}

#[test]
fn happy_path() {
    let wf = concrete(ONE_CALL, "gpt-4o-mini");
    let script = MockScript::default().rule(MockRule::text(prompts::ANSWER, &["Paris "]));
    let out = run(wf.clone(), script, Judge::ExactMatch { reference: "paris".into() }, &roomy());
    assert!(out.success);
    assert_eq!(out.rectification_count, 0);
    assert_eq!(out.terminal, TerminalReason::Returned);
    assert_eq!(out.final_answer.as_deref(), Some("Paris"));
    assert!(out.total_cost > Money::ZERO);
    check_invariants(&out, &wf, &roomy());
}

fn case1_script() -> MockScript {
    MockScript::default()
        .rule(MockRule::text(prompt_marker(MetaAgent::Rectifier), &[&wrap(corpus::CASE1_FIXED)]))
        .rule(MockRule::text(prompts::ENSEMBLE, &["None of them look right.", "Candidate A is the most consistent."]))
        .rule(MockRule::text(prompts::CODE, &["```python\ndef solve():\n    return 1\n```"]))
}

#[test]
fn case1_fallback_replay() {
    let wf = concrete(corpus::CASE1_BROKEN, "gpt-4o-mini");
    let meta = roomy();
    let out = run(wf.clone(), case1_script(), Judge::Containment { reference: "return 1".into() }, &meta);
    assert!(out.success, "{:#?}", out.event_log);
    assert_eq!(out.rectification_count, 1);
    assert_eq!(out.workflow_versions.len(), 2);
    let fixed = &out.workflow_versions[1].template.program.statements;
    assert!(fixed.iter().any(|s| matches!(s, Statement::Fallback { .. })));
    assert_eq!(out.workflow_versions[1].assignment, wf.assignment);
    // The three drafts are kept; only the ensemble reruns.
    let drafts = out.event_log.iter().filter(|e| matches!(&e.kind, EventKind::OperatorStart { role, .. } if role == "code_generate_1")).count();
    assert_eq!(drafts, 3);
    assert!(out.event_log.iter().any(|e| matches!(e.kind, EventKind::RectificationAccepted { resume_at: 2, .. })));
    let rect_cost = out.event_log.iter().filter(|e| matches!(e.kind, EventKind::CostDelta { spender: Spender::Rectifier, .. })).count();
    assert_eq!(rect_cost, 1);
    check_invariants(&out, &wf, &meta);
}

#[test]
fn case1_fixed_guard_absorbs_ensemble_failure() {
    let wf = concrete(corpus::CASE1_FIXED, "gpt-4o-mini");
    let script = MockScript::default()
        .rule(MockRule::text(prompts::ENSEMBLE, &["no pick"]))
        .rule(MockRule::text(prompts::CODE, &["def solve():\n    return 1"]));
    let out = run(wf.clone(), script, Judge::Containment { reference: "return 1".into() }, &roomy());
    assert!(out.success);
    assert_eq!(out.rectification_attempts, 0);
    assert!(out.event_log.iter().any(|e| matches!(e.kind, EventKind::OperatorError { handled: true, .. })));
    assert!(out.event_log.iter().any(|e| matches!(e.kind, EventKind::FallbackApplied { .. })));
    check_invariants(&out, &wf, &roomy());
}

#[test]
fn case2_bypass_replay() {
    let wf = concrete(corpus::CASE2_BROKEN, "gpt-4o-mini");
    let script = MockScript::default()
        .rule(MockRule::text(prompt_marker(MetaAgent::Rectifier), &[&wrap(corpus::CASE2_FIXED)]))
        .rule(MockRule::text(prompts::PROGRAMMER, &["print(42)"]))
        .rule(MockRule::text(prompts::REVIEW, &["Looks fine to me."]))
        .rule(MockRule::text(prompts::ENSEMBLE, &["B"]))
        .rule(MockRule::text(prompts::CUSTOM, &["The answer is 42."]));
    let meta = roomy();
    let out = run(wf.clone(), script, Judge::Containment { reference: "42".into() }, &meta);
    assert!(out.success, "{:#?}", out.event_log);
    assert_eq!(out.rectification_count, 1);
    let last = &out.workflow_versions[1].template;
    assert!(last.calls().iter().all(|(_, c)| !c.role.starts_with("review")));
    assert!(out.rectifications[0].request.error_log.contains("review1"));
    check_invariants(&out, &wf, &meta);
}

#[test]
fn forced_budget_breach() {
    let wf = concrete(ONE_CALL, "gpt-4o");
    let long = "x".repeat(4000);
    let script = MockScript::default().rule(MockRule::text(prompts::ANSWER, &[&long]));
    let meta = MetaAgentConfig { theta_c: "0.001".parse().unwrap(), max_rectifications: 0, ..Default::default() };
    let out = run(wf.clone(), script, Judge::Containment { reference: "x".into() }, &meta);
    assert!(!out.success);
    assert_eq!(out.terminal, TerminalReason::BudgetBreach);
    assert!(out.total_cost > meta.theta_c);
    check_invariants(&out, &wf, &meta);
}

#[test]
fn budget_notice_reaches_rectifier() {
    let wf = concrete(ONE_CALL, "gpt-4o");
    let long = "x".repeat(4000);
    let script = MockScript::default()
        .rule(MockRule::text(prompt_marker(MetaAgent::Rectifier), &[&wrap(ONE_CALL)]))
        .rule(MockRule::text(prompts::ANSWER, &[&long]));
    let meta = MetaAgentConfig { theta_c: "0.001".parse().unwrap(), max_rectifications: 2, ..Default::default() };
    let out = run(wf.clone(), script, Judge::Containment { reference: "x".into() }, &meta);
    // The answer call completed before the trigger, so the return executes.
    assert!(out.success);
    assert_eq!(out.rectification_count, 1);
    let req = &out.rectifications[0].request;
    assert_eq!(req.cause, TriggerCause::Budget);
    assert!(req.error_log.starts_with("Budget exceeded"));
    assert!(req.error_log.contains(&meta.theta_c.to_string()));

    let forbid = MetaAgentConfig { rectify_over_budget: false, ..meta.clone() };
    let script = MockScript::default().rule(MockRule::text(prompts::ANSWER, &[&long]));
    let out = run(wf.clone(), script, Judge::Containment { reference: "x".into() }, &forbid);
    assert_eq!(out.terminal, TerminalReason::BudgetForbidden);
    assert!(!out.success);
}

#[test]
fn exhausted_rectifications_fail() {
    let wf = concrete(corpus::CASE1_BROKEN, "gpt-4o-mini");
    let script = MockScript::default()
        .rule(MockRule::text(prompt_marker(MetaAgent::Rectifier), &["I would rather not."]))
        .rule(MockRule::text(prompts::ENSEMBLE, &["none"]))
        .rule(MockRule::text(prompts::CODE, &["def solve(): return 1"]));
    let meta = roomy();
    let out = run(wf.clone(), script, Judge::Containment { reference: "return 1".into() }, &meta);
    assert!(!out.success);
    assert_eq!(out.terminal, TerminalReason::RectificationsExhausted);
    assert_eq!(out.rectification_attempts, 2);
    assert_eq!(out.rectification_count, 0);
    check_invariants(&out, &wf, &meta);
}

#[test]
fn step_ceiling_halts() {
    let wf = concrete(corpus::CASE1_BROKEN, "gpt-4o-mini");
    let gw = gateway(case1_script());
    let sandbox = Sandbox::default();
    let env = ExecEnv { gateway: &gw, docstore: None, sandbox: &sandbox, checks: None };
    let exec = ExecutorConfig { step_ceiling: 4, ..Default::default() };
    let out = execute(wf, "q", &Judge::Containment { reference: "1".into() }, &roomy(), &exec, &env, "t", 1);
    assert_eq!(out.terminal, TerminalReason::StepCeiling);
    assert_eq!(out.steps_completed, 4);
}

#[test]
fn judge_infrastructure_failure_is_distinct() {
    let wf = concrete(ONE_CALL, "gpt-4o-mini");
    let script = MockScript::default().rule(MockRule::text(prompts::ANSWER, &["42"]));
    let judge = Judge::Command { argv: vec!["/definitely/not/here".into()], cwd: None };
    let out = run(wf, script, judge, &roomy());
    assert!(out.infrastructure_failure);
    assert!(!out.success);
    assert_eq!(out.terminal, TerminalReason::JudgeCommandFailure);
}

#[test]
fn command_judge_runs_unit_tests() {
    let wf = concrete(ONE_CALL, "gpt-4o-mini");
    let script = MockScript::default().rule(MockRule::text(prompts::ANSWER, &["def add(a, b):\n    return a + b"]));
    let check = "import sys\nsrc = open(sys.argv[1]).read()\nns = {}\nexec(src, ns)\nassert ns['add'](2, 3) == 5\n";
    let judge = Judge::Command { argv: vec!["python3".into(), "-c".into(), check.into(), "{answer_file}".into()], cwd: None };
    let out = run(wf, script, judge, &roomy());
    assert!(out.success, "{:#?}", out.event_log);
}

const LOOPED: &str = r#"class Workflow:
    def __init__(self, problem) -> None:
        self.problem = problem
        self.draft = operator.Custom("llm_symbol", self.problem)
        self.pick = operator.ScEnsemble("llm_symbol", self.problem)

    async def run_workflow(self):
        drafts = []
        for _ in range(3):
            d = await self.draft(input=self.problem, instruction="Draft an answer.")
            drafts.append(d)
        best = await self.pick(solutions=drafts)
        if not best or not best.strip():
            best = drafts[0]
        return best
"#;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn invariants_hold_under_random_scripts(
        theta_picos in 1u64..4_000_000,
        picks in proptest::collection::vec(prop_oneof![Just("A"), Just("none"), Just("C")], 1..4),
        rect in proptest::collection::vec(prop_oneof![Just(true), Just(false)], 1..4),
        max_rect in 0u32..4,
        pricey in any::<bool>(),
    ) {
        let wf = concrete(CASE1_OR_LOOPED[pricey as usize], if pricey { "gpt-4o" } else { "gpt-4o-mini" });
        let fixes: Vec<MockReply> = rect.iter().map(|ok| MockReply::Text(if *ok { wrap(corpus::CASE1_FIXED) } else { "nothing".into() })).collect();
        let script = MockScript::default()
            .rule(MockRule::when(prompt_marker(MetaAgent::Rectifier), fixes))
            .rule(MockRule::text(prompts::ENSEMBLE, &picks))
            .rule(MockRule::text(prompts::CODE, &["def solve(): return 1"]))
            .rule(MockRule::text(prompts::CUSTOM, &["draft answer 1"]));
        let meta = MetaAgentConfig { theta_c: Money::from_picos(theta_picos * 1000), max_rectifications: max_rect, ..Default::default() };
        let out = run(wf.clone(), script, Judge::Containment { reference: "1".into() }, &meta);
        check_invariants(&out, &wf, &meta);
    }
}

const CASE1_OR_LOOPED: [&str; 2] = [corpus::CASE1_BROKEN, LOOPED];
