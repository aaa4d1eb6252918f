//! Scripted workflows and mock scripts shared by the integration suites.
#![allow(dead_code)]

use std::sync::Arc;

use mas2::gateway::{Catalog, Gateway, MockBackend, MockReply, MockRule, MockScript};
use mas2::meta::{prompt_marker, MetaAgent};
use mas2::operators::prompts;
use mas2_core::ir::{parse_template, substitute_backbones, BackboneAssignment, InstantiatedWorkflow};

pub fn wrap(src: &str) -> String {
    format!("<graph>\n{src}\n</graph>")
}

pub fn concrete(src: &str, backbone: &str) -> InstantiatedWorkflow {
    let t = parse_template(src).unwrap();
    let a: BackboneAssignment = t.llm_roles().map(|r| (r.id.clone(), backbone.to_string())).collect();
    substitute_backbones(&t, &a, &Catalog::seed()).unwrap()
}

pub fn mock_gateway(script: MockScript) -> Gateway {
    Gateway::new(Catalog::seed(), Arc::new(MockBackend::new(script)))
}

pub const ANSWER_ONLY: &str = r#"class Workflow:
    def __init__(self, problem) -> None:
        self.problem = problem
        self.answer = operator.AnswerGenerate("llm_symbol", self.problem)

    async def run_workflow(self):
        answer = await self.answer(input=self.problem)
        return answer
"#;

/// A single Custom call with the given instruction.
pub fn custom_only(instruction: &str) -> String {
    format!(
        r#"class Workflow:
    def __init__(self, problem) -> None:
        self.problem = problem
        self.solver = operator.Custom("llm_symbol", self.problem)

    async def run_workflow(self):
        out = await self.solver(input=self.problem, instruction="{instruction}")
        return out
"#
    )
}

pub const LOOPED: &str = r#"class Workflow:
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

/// Four distinct templates; only the first reaches the AnswerGenerate
/// operator, which answers "Paris". The others answer "London".
pub fn single_success_script(implementer_slots: &[&str]) -> MockScript {
    let templates = [
        wrap(ANSWER_ONLY),
        wrap(&custom_only("Answer in one word.")),
        wrap(&custom_only("Think, then answer briefly.")),
        wrap(&custom_only("Give the city name only.")),
    ];
    let mut gen = MockRule::when(prompt_marker(MetaAgent::Generator), templates.into_iter().map(MockReply::Text).collect());
    gen.cycle = true;
    let mut imp = MockRule::when(
        prompt_marker(MetaAgent::Implementer),
        implementer_slots.iter().map(|b| MockReply::FillSlots { fill_slots: vec![b.to_string()] }).collect(),
    );
    imp.cycle = true;
    MockScript::default()
        .rule(gen)
        .rule(imp)
        .rule(MockRule::text(prompts::ANSWER, &["Paris"]))
        .rule(MockRule::text(prompts::CUSTOM, &["London"]))
}
