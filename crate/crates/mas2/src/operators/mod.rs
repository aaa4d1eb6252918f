//! The closed operator catalog: prompt assembly, one completion (or a local
//! action), and output parsing per kind.

mod calculator;
mod docstore;
mod parse;
pub mod prompts;
mod sandbox;

use std::collections::BTreeMap;

use mas2_core::ir::RoleSpec;
use mas2_core::operator::OperatorKind;
use mas2_core::Money;
use serde::{Deserialize, Serialize};

use crate::gateway::{ChatExchange, ChatRequest, Gateway, GatewayError, SamplingParams};
use crate::value::Value;

pub use calculator::{evaluate_expression, CalcError};
pub use docstore::{DocStore, SearchHit};
pub use parse::{parse_ensemble_choice, parse_review, strip_code_fences};
pub use sandbox::{Sandbox, SandboxRun};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OperatorError {
    #[error("operator output malformed: {detail}")]
    OperatorOutputMalformed { detail: String },
    #[error("ensemble selection failed: reply {reply:?} names no candidate")]
    EnsembleSelectionFailed { reply: String },
    #[error("tool failure: {detail}")]
    ToolFailure { detail: String },
    #[error("sandbox timed out after {seconds} s")]
    SandboxTimeout { seconds: u64 },
    #[error("missing input `{param}`")]
    MissingInput { param: String },
    #[error("role `{role}` has no backbone")]
    NoBackbone { role: String },
    #[error(transparent)]
    Gateway(GatewayError),
}

/// An operator error together with whatever it already spent.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorFailure {
    pub error: OperatorError,
    pub exchanges: Vec<ChatExchange>,
    pub log: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorOutput {
    pub text: String,
    /// Named fields for kinds with structured replies (Review).
    pub structured: Option<BTreeMap<String, String>>,
    pub exchanges: Vec<ChatExchange>,
    /// Local activity worth logging: sandbox output, retrieval hits.
    pub log: Vec<String>,
}

impl OperatorOutput {
    pub fn cost(&self) -> Money {
        self.exchanges.iter().map(|e| e.cost).sum()
    }
}

/// Everything an operator may touch besides its inputs.
pub struct OperatorContext<'a> {
    pub gateway: &'a Gateway,
    pub query: &'a str,
    /// Request stream for the gateway; one per trajectory.
    pub stream: &'a str,
    pub params: SamplingParams,
    pub docstore: Option<&'a DocStore>,
    pub sandbox: &'a Sandbox,
    /// Python checks appended to candidates by the Test operator.
    pub checks: Option<&'a str>,
    pub repair_rounds: u32,
}

/// Inputs are keyed by the kind's parameter names.
pub fn run_operator(
    role: &RoleSpec,
    backbone: Option<&str>,
    inputs: &BTreeMap<String, Value>,
    ctx: &OperatorContext<'_>,
) -> Result<OperatorOutput, OperatorFailure> {
    let mut run = Run { role, backbone, ctx, exchanges: Vec::new(), log: Vec::new() };
    match run.dispatch(inputs) {
        Ok((text, structured)) => Ok(OperatorOutput { text, structured, exchanges: run.exchanges, log: run.log }),
        Err(error) => Err(OperatorFailure { error, exchanges: run.exchanges, log: run.log }),
    }
}

struct Run<'r, 'a> {
    role: &'r RoleSpec,
    backbone: Option<&'r str>,
    ctx: &'r OperatorContext<'a>,
    exchanges: Vec<ChatExchange>,
    log: Vec<String>,
}

type Produced = (String, Option<BTreeMap<String, String>>);

impl Run<'_, '_> {
    fn text(inputs: &BTreeMap<String, Value>, name: &str) -> Option<String> {
        inputs.get(name).map(Value::render)
    }

    fn required(inputs: &BTreeMap<String, Value>, name: &str) -> Result<String, OperatorError> {
        Self::text(inputs, name).ok_or_else(|| OperatorError::MissingInput { param: name.into() })
    }

    fn complete(&mut self, system: String, user: String) -> Result<String, OperatorError> {
        let backbone = self.backbone.ok_or_else(|| OperatorError::NoBackbone { role: self.role.id.clone() })?;
        let request = ChatRequest::new(
            vec![crate::gateway::ChatMessage::system(system), crate::gateway::ChatMessage::user(user)],
            self.ctx.params.clone(),
            self.ctx.stream,
        );
        let ex = self.ctx.gateway.complete(backbone, &request).map_err(OperatorError::Gateway)?;
        let text = ex.response.clone();
        self.exchanges.push(ex);
        Ok(text)
    }

    fn dispatch(&mut self, inputs: &BTreeMap<String, Value>) -> Result<Produced, OperatorError> {
        let kind = self.role.kind;
        let sys = prompts::system(self.role);
        let q = self.ctx.query;
        let role_instruction = self.role.instruction.as_deref();
        match kind {
            OperatorKind::Custom => {
                let instruction = Self::required(inputs, "instruction")?;
                let user = prompts::custom(q, Self::text(inputs, "input").as_deref(), role_instruction, &instruction);
                Ok((self.complete(sys, user)?.trim().to_string(), None))
            }
            OperatorKind::AnswerGenerate => {
                let user = prompts::answer_generate(q, Self::text(inputs, "context").as_deref(), Self::text(inputs, "input").as_deref(), role_instruction);
                Ok((self.complete(sys, user)?.trim().to_string(), None))
            }
            OperatorKind::CustomCodeGenerate => {
                let instruction = Self::required(inputs, "instruction")?;
                let user = prompts::code_generate(q, role_instruction, &instruction);
                Ok((strip_code_fences(&self.complete(sys, user)?), None))
            }
            OperatorKind::Programmer => {
                let analysis = Self::required(inputs, "analysis")?;
                let user = prompts::programmer(q, &analysis, Self::text(inputs, "instruction").as_deref(), role_instruction);
                Ok((strip_code_fences(&self.complete(sys, user)?), None))
            }
            OperatorKind::Review => {
                let pre = Self::required(inputs, "pre_solution")?;
                let reply = self.complete(sys, prompts::review(q, &pre, role_instruction))?;
                let fields = parse_review(&reply).map_err(|detail| OperatorError::OperatorOutputMalformed { detail })?;
                Ok((fields["revised_solution"].clone(), Some(fields)))
            }
            OperatorKind::ScEnsemble => {
                let list = inputs.get("solutions").ok_or_else(|| OperatorError::MissingInput { param: "solutions".into() })?;
                let candidates: Vec<String> = match list {
                    Value::List(items) => items.iter().map(Value::render).collect(),
                    other => vec![other.render()],
                };
                let shown = &candidates[..candidates.len().min(26)];
                if shown.is_empty() {
                    return Err(OperatorError::EnsembleSelectionFailed { reply: String::new() });
                }
                let reply = self.complete(sys, prompts::ensemble(q, shown, role_instruction))?;
                match parse_ensemble_choice(&reply, shown.len()) {
                    Some(i) => Ok((shown[i].clone(), None)),
                    None => Err(OperatorError::EnsembleSelectionFailed { reply }),
                }
            }
            OperatorKind::Test => {
                let solution = Self::required(inputs, "solution")?;
                self.test(&solution).map(|t| (t, None))
            }
            OperatorKind::Search => {
                let query = Self::required(inputs, "query")?;
                let k = match inputs.get("top_k") {
                    Some(Value::Int(k)) if *k > 0 => *k as usize,
                    _ => 3,
                };
                let store = self.docstore()?;
                let hits = store.search(&query, k);
                self.log.push(format!("search {:?}: {} hits", query, hits.len()));
                let text = hits.iter().map(|h| format!("[{}] (score {:.3}) {}", h.docid, h.score, h.title)).collect::<Vec<_>>().join("\n");
                Ok((text, None))
            }
            OperatorKind::Browser => {
                let docid = Self::required(inputs, "docid")?;
                let docid = docid.trim().trim_matches(|c| c == '[' || c == ']');
                let body = self.docstore()?.get(docid).ok_or_else(|| OperatorError::ToolFailure { detail: format!("no document `{docid}`") })?;
                Ok((body.to_string(), None))
            }
            OperatorKind::Tool => {
                let input = Self::required(inputs, "input")?;
                self.tool(&input).map(|t| (t, None))
            }
        }
    }

    fn docstore(&self) -> Result<&DocStore, OperatorError> {
        self.ctx.docstore.ok_or_else(|| OperatorError::ToolFailure { detail: "no document store configured".into() })
    }

    fn tool(&mut self, input: &str) -> Result<String, OperatorError> {
        match self.role.tool.as_deref().unwrap_or("calculator") {
            "calculator" => evaluate_expression(input.trim()).map_err(|e| OperatorError::ToolFailure { detail: e.to_string() }),
            "python" => {
                let run = self.sandboxed(&strip_code_fences(input))?;
                if run.passed() {
                    Ok(run.stdout.trim_end().to_string())
                } else {
                    Err(OperatorError::ToolFailure { detail: run.summary() })
                }
            }
            other => Err(OperatorError::ToolFailure { detail: format!("unknown tool `{other}`") }),
        }
    }

    fn sandboxed(&mut self, code: &str) -> Result<SandboxRun, OperatorError> {
        let run = self.ctx.sandbox.run_python(code).map_err(|e| OperatorError::ToolFailure { detail: format!("sandbox could not start: {e}") })?;
        self.log.push(run.summary());
        if run.timed_out {
            return Err(OperatorError::SandboxTimeout { seconds: self.ctx.sandbox.timeout.as_secs() });
        }
        Ok(run)
    }

    /// Check the candidate, repair on failure, re-check. Returns the last
    /// candidate even if it still fails; the judge decides correctness.
    fn test(&mut self, solution: &str) -> Result<String, OperatorError> {
        let Some(checks) = self.ctx.checks else {
            self.log.push("no checks provided; solution passed through".into());
            return Ok(solution.to_string());
        };
        let mut candidate = strip_code_fences(solution);
        let mut rounds = 0;
        loop {
            let run = self.sandboxed(&format!("{candidate}\n\n{checks}\n"))?;
            if run.passed() {
                return Ok(candidate);
            }
            if rounds >= self.ctx.repair_rounds {
                self.log.push("checks still failing after repair budget".into());
                return Ok(candidate);
            }
            rounds += 1;
            let sys = prompts::system(self.role);
            let reply = self.complete(sys, prompts::repair(self.ctx.query, &candidate, &run.summary()))?;
            candidate = strip_code_fences(&reply);
        }
    }
}
