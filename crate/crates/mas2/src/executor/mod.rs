//! Runs one instantiated workflow under the rectification monitor.
//!
//! [`Run`] is a resumable state machine: [`Run::advance`] interprets the
//! program until it finishes or the trigger fires, and the caller answers a
//! trigger with [`Run::apply_rectification`]. [`execute`] drives both halves
//! with the rectifier in the loop.

mod judge;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use mas2_core::ir::{emit_dialect, Call, Expr, InstantiatedWorkflow, Statement, WorkflowTemplate};
use mas2_core::trigger::{should_rectify, OutcomeFlag};
use mas2_core::Money;
use serde::{Deserialize, Serialize};

use crate::gateway::{ChatExchange, Gateway, SamplingParams};
use crate::meta::{rectify, template_guide, MetaAgentConfig, RectificationRequest, RectifyAttempt, RectifyError, StateSummary, TriggerCause};
use crate::operators::{run_operator, DocStore, OperatorContext, OperatorError, Sandbox};
use crate::seeds::derive_seed;
use crate::value::Value;

pub use judge::{evaluate_judge, extract_number, normalize, Judge, JudgeCommandFailure, ANSWER_FILE_ARG};

pub const DEFAULT_STEP_CEILING: u64 = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExecutorConfig {
    /// Statements executed per trajectory, nested ones included.
    pub step_ceiling: u64,
    pub operator_temperature: f64,
    pub operator_max_tokens: u32,
    /// Repair rounds for the Test operator.
    pub repair_rounds: u32,
}

impl Default for ExecutorConfig {
    fn default() -> Self {
        ExecutorConfig { step_ceiling: DEFAULT_STEP_CEILING, operator_temperature: 0.0, operator_max_tokens: 2048, repair_rounds: 1 }
    }
}

/// Who paid for an exchange.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spender {
    Operator,
    Rectifier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalReason {
    Returned,
    /// The program ran off its end without a return.
    NoReturn,
    /// A failure trigger with no rectification attempts left.
    RectificationsExhausted,
    /// A budget trigger with no rectification attempts left.
    BudgetBreach,
    BudgetForbidden,
    StepCeiling,
    JudgeCommandFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum EventKind {
    OperatorStart { role: String, operator: String, backbone: Option<String> },
    OperatorFinish { role: String, output_chars: usize },
    OperatorError { role: String, error: OperatorError, handled: bool },
    CostDelta { spender: Spender, backbone: String, prompt_tokens: u64, completion_tokens: u64, cost: Money, cumulative: Money },
    Note { text: String },
    FallbackApplied { var: String },
    RuntimeError { detail: String },
    Trigger { cause: TriggerCause, cost: Money, theta_c: Money },
    RectificationAccepted { attempt: u32, resume_at: usize },
    RectificationRejected { attempt: u32, error: RectifyError },
    Answer { text: String },
    Judged { success: bool },
    JudgeFailed { detail: String },
    Terminal { reason: TerminalReason },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    /// Index into the workflow versions of the version running at the time.
    pub version: usize,
    #[serde(flatten)]
    pub kind: EventKind,
}

fn clip(s: &str, n: usize) -> String {
    match s.char_indices().nth(n) {
        Some((i, _)) => format!("{}...", &s[..i]),
        None => s.to_string(),
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{} v{}] ", self.seq, self.version)?;
        match &self.kind {
            EventKind::OperatorStart { role, operator, backbone } => {
                write!(f, "start {role} ({operator}")?;
                match backbone {
                    Some(b) => write!(f, " on {b})"),
                    None => f.write_str(")"),
                }
            }
            EventKind::OperatorFinish { role, output_chars } => write!(f, "finish {role}: {output_chars} chars"),
            EventKind::OperatorError { role, error, handled } => {
                write!(f, "error in {role}: {error}{}", if *handled { " (handled by the next guard)" } else { "" })
            }
            EventKind::CostDelta { spender, backbone, cost, cumulative, .. } => {
                write!(f, "cost {cost} on {backbone} ({}), total {cumulative}", if *spender == Spender::Operator { "operator" } else { "rectifier" })
            }
            EventKind::Note { text } => write!(f, "{}", clip(text, 400)),
            EventKind::FallbackApplied { var } => write!(f, "`{var}` was empty; guard replaced it"),
            EventKind::RuntimeError { detail } => write!(f, "runtime error: {detail}"),
            EventKind::Trigger { cause, cost, theta_c } => write!(f, "rectification triggered ({cause:?}) at cost {cost}, budget {theta_c}"),
            EventKind::RectificationAccepted { attempt, resume_at } => write!(f, "rectification {attempt} accepted; resuming at statement {}", resume_at + 1),
            EventKind::RectificationRejected { attempt, error } => write!(f, "rectification {attempt} rejected: {error}"),
            EventKind::Answer { text } => write!(f, "answer: {}", clip(text, 200)),
            EventKind::Judged { success } => write!(f, "judged {}", if *success { "correct" } else { "incorrect" }),
            EventKind::JudgeFailed { detail } => write!(f, "judge failed: {detail}"),
            EventKind::Terminal { reason } => write!(f, "terminal: {reason:?}"),
        }
    }
}

/// s_t.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExecutionState {
    pub cumulative_cost: Money,
    pub steps_completed: u64,
    pub outcome_flag: OutcomeFlag,
    pub variable_bindings: BTreeMap<String, Value>,
    pub event_log: Vec<Event>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RectificationRecord {
    pub cause: TriggerCause,
    pub request: RectificationRequest,
    /// Version index produced by this attempt, if it was accepted.
    pub produced_version: Option<usize>,
    pub cost: Money,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryOutcome {
    pub final_answer: Option<String>,
    pub success: bool,
    pub total_cost: Money,
    /// Accepted rectifications.
    pub rectification_count: u32,
    pub rectification_attempts: u32,
    pub terminal: TerminalReason,
    /// Set when the judge itself could not run.
    pub infrastructure_failure: bool,
    pub steps_completed: u64,
    pub event_log: Vec<Event>,
    /// M_0 … M_T.
    pub workflow_versions: Vec<InstantiatedWorkflow>,
    pub rectifications: Vec<RectificationRecord>,
}

impl TrajectoryOutcome {
    /// Sum of every exchange cost recorded in the event log.
    pub fn logged_cost(&self) -> Money {
        self.event_log
            .iter()
            .map(|e| match e.kind {
                EventKind::CostDelta { cost, .. } => cost,
                _ => Money::ZERO,
            })
            .sum()
    }
}

/// What operators and the judge may touch.
#[derive(Clone, Copy)]
pub struct ExecEnv<'a> {
    pub gateway: &'a Gateway,
    pub docstore: Option<&'a DocStore>,
    pub sandbox: &'a Sandbox,
    /// Python checks for Test operators.
    pub checks: Option<&'a str>,
}

pub enum Advance {
    Finished(Box<TrajectoryOutcome>),
    Triggered(Box<RectificationRequest>),
}

#[derive(Debug, Clone)]
struct Pending {
    cause: TriggerCause,
    /// Top-level statement to resume from if the workflow is unchanged.
    checkpoint: usize,
    request: RectificationRequest,
}

enum Stop {
    Trigger { cause: TriggerCause, completed: bool },
    Halt(TerminalReason),
}

enum Flow {
    Continue,
    Return(Value),
}

/// One trajectory in progress.
#[derive(Debug, Clone)]
pub struct Run {
    query: String,
    judge: Judge,
    meta: MetaAgentConfig,
    exec: ExecutorConfig,
    stream: String,
    seed: u64,
    state: ExecutionState,
    versions: Vec<InstantiatedWorkflow>,
    /// Bindings before each top-level statement reached so far.
    snapshots: Vec<BTreeMap<String, Value>>,
    pc: usize,
    seq: u64,
    calls: u64,
    attempts: u32,
    accepted: u32,
    pending: Option<Pending>,
    rectifications: Vec<RectificationRecord>,
    finished: Option<TrajectoryOutcome>,
}

impl Run {
    pub fn new(workflow: InstantiatedWorkflow, query: &str, judge: Judge, meta: &MetaAgentConfig, exec: &ExecutorConfig, stream: &str, seed: u64) -> Run {
        Run {
            query: query.to_string(),
            judge,
            meta: meta.clone(),
            exec: exec.clone(),
            stream: stream.to_string(),
            seed,
            state: ExecutionState::default(),
            versions: vec![workflow],
            snapshots: Vec::new(),
            pc: 0,
            seq: 0,
            calls: 0,
            attempts: 0,
            accepted: 0,
            pending: None,
            rectifications: Vec::new(),
            finished: None,
        }
    }

    pub fn state(&self) -> &ExecutionState {
        &self.state
    }

    pub fn versions(&self) -> &[InstantiatedWorkflow] {
        &self.versions
    }

    pub fn attempts(&self) -> u32 {
        self.attempts
    }

    /// Re-point the gateway stream, e.g. after cloning a paused run.
    pub fn set_stream(&mut self, stream: &str, seed: u64) {
        self.stream = stream.to_string();
        self.seed = seed;
    }

    fn log(&mut self, kind: EventKind) {
        let version = self.versions.len() - 1;
        self.state.event_log.push(Event { seq: self.seq, version, kind });
        self.seq += 1;
    }

    fn charge(&mut self, spender: Spender, exchanges: &[ChatExchange]) -> Money {
        let mut total = Money::ZERO;
        for ex in exchanges {
            self.state.cumulative_cost += ex.cost;
            total += ex.cost;
            let cumulative = self.state.cumulative_cost;
            self.log(EventKind::CostDelta {
                spender,
                backbone: ex.backbone_id.clone(),
                prompt_tokens: ex.prompt_tokens,
                completion_tokens: ex.completion_tokens,
                cost: ex.cost,
                cumulative,
            });
        }
        total
    }

    /// Run until the trajectory ends or the trigger fires.
    pub fn advance(&mut self, env: &ExecEnv<'_>) -> Advance {
        loop {
            if let Some(done) = &self.finished {
                return Advance::Finished(Box::new(done.clone()));
            }
            if let Some(p) = &self.pending {
                if self.attempts >= self.meta.max_rectifications {
                    let reason = match p.cause {
                        TriggerCause::Budget => TerminalReason::BudgetBreach,
                        TriggerCause::Failure => TerminalReason::RectificationsExhausted,
                    };
                    self.finish(None, reason, env);
                    continue;
                }
                return Advance::Triggered(Box::new(p.request.clone()));
            }
            let program = self.versions.last().expect("at least one version").template.program.statements.clone();
            let i = self.pc;
            if i >= program.len() {
                self.finish(None, TerminalReason::NoReturn, env);
                continue;
            }
            if self.snapshots.len() == i {
                self.snapshots.push(self.state.variable_bindings.clone());
            }
            match self.exec_stmt(&program, i, true, env) {
                Ok(Flow::Continue) => self.pc += 1,
                Ok(Flow::Return(v)) => {
                    let answer = v.render();
                    self.log(EventKind::Answer { text: answer.clone() });
                    self.finish(Some(answer), TerminalReason::Returned, env);
                }
                Err(Stop::Halt(reason)) => self.finish(None, reason, env),
                Err(Stop::Trigger { cause, completed }) => {
                    let checkpoint = if completed {
                        self.snapshots.truncate(i + 1);
                        self.snapshots.push(self.state.variable_bindings.clone());
                        i + 1
                    } else {
                        self.state.variable_bindings = self.snapshots[i].clone();
                        i
                    };
                    self.pc = checkpoint;
                    let (cost, theta_c) = (self.state.cumulative_cost, self.meta.theta_c);
                    self.log(EventKind::Trigger { cause, cost, theta_c });
                    let request = self.build_request(cause);
                    self.pending = Some(Pending { cause, checkpoint, request });
                }
            }
        }
    }

    fn build_request(&self, cause: TriggerCause) -> RectificationRequest {
        let current = self.versions.last().expect("version");
        let mut log = String::new();
        for e in &self.state.event_log {
            log.push_str(&e.to_string());
            log.push('\n');
        }
        let total = log.chars().count();
        let tail: String = log.chars().skip(total.saturating_sub(self.meta.error_log_chars)).collect();
        let error_log = match cause {
            TriggerCause::Budget => format!(
                "Budget exceeded: the run has spent {} against a budget of {}. Make the workflow cheaper: fewer calls or cheaper backbones.\n{tail}",
                self.state.cumulative_cost, self.meta.theta_c
            ),
            TriggerCause::Failure => tail,
        };
        RectificationRequest {
            broken_workflow: emit_dialect(&current.template.abstracted()),
            error_log,
            template_guide: template_guide(),
            state: StateSummary {
                cumulative_cost: self.state.cumulative_cost,
                steps_completed: self.state.steps_completed,
                outcome_flag: self.state.outcome_flag,
            },
            cause,
            theta_c: self.meta.theta_c,
        }
    }

    /// Seed for the next rectifier completion.
    pub fn rectifier_seed(&self) -> u64 {
        derive_seed(self.seed, "rectifier", self.attempts as u64)
    }

    /// Fold a rectifier attempt into the run. Has no effect unless the run
    /// is waiting on a trigger.
    pub fn apply_rectification(&mut self, attempt: RectifyAttempt) {
        let Some(pending) = self.pending.clone() else { return };
        let cost = self.charge(Spender::Rectifier, &attempt.exchanges);
        self.attempts += 1;
        let n = self.attempts;
        match attempt.result {
            Ok(next) => {
                let resume = resume_point(&self.versions.last().expect("version").template, &next.template, pending.checkpoint);
                self.state.variable_bindings = self.snapshots[resume].clone();
                self.snapshots.truncate(resume + 1);
                self.pc = resume;
                self.versions.push(next);
                self.accepted += 1;
                self.state.outcome_flag = OutcomeFlag::Nominal;
                self.pending = None;
                self.rectifications.push(RectificationRecord {
                    cause: pending.cause,
                    request: pending.request,
                    produced_version: Some(self.versions.len() - 1),
                    cost,
                });
                self.log(EventKind::RectificationAccepted { attempt: n, resume_at: resume });
            }
            Err(error) => {
                let forbidden = matches!(error, RectifyError::BudgetForbidden { .. });
                self.rectifications.push(RectificationRecord { cause: pending.cause, request: pending.request, produced_version: None, cost });
                self.log(EventKind::RectificationRejected { attempt: n, error });
                if forbidden {
                    self.pending = None;
                    self.finished = Some(self.outcome(None, TerminalReason::BudgetForbidden, false, false));
                }
            }
        }
    }

    fn finish(&mut self, answer: Option<String>, reason: TerminalReason, env: &ExecEnv<'_>) {
        self.pending = None;
        let mut reason = reason;
        let mut success = false;
        let mut infra = false;
        if let Some(a) = &answer {
            match evaluate_judge(&self.judge, a, env.sandbox) {
                Ok(ok) => {
                    success = ok;
                    self.log(EventKind::Judged { success });
                }
                Err(e) => {
                    infra = true;
                    reason = TerminalReason::JudgeCommandFailure;
                    self.log(EventKind::JudgeFailed { detail: e.detail });
                }
            }
        }
        self.finished = Some(self.outcome(answer, reason, success, infra));
    }

    fn outcome(&mut self, answer: Option<String>, reason: TerminalReason, success: bool, infra: bool) -> TrajectoryOutcome {
        self.log(EventKind::Terminal { reason });
        TrajectoryOutcome {
            success: success && answer.is_some(),
            final_answer: answer,
            total_cost: self.state.cumulative_cost,
            rectification_count: self.accepted,
            rectification_attempts: self.attempts,
            terminal: reason,
            infrastructure_failure: infra,
            steps_completed: self.state.steps_completed,
            event_log: self.state.event_log.clone(),
            workflow_versions: self.versions.clone(),
            rectifications: self.rectifications.clone(),
        }
    }

    fn exec_block(&mut self, stmts: &[Statement], env: &ExecEnv<'_>) -> Result<Flow, Stop> {
        for i in 0..stmts.len() {
            if let Flow::Return(v) = self.exec_stmt(stmts, i, false, env)? {
                return Ok(Flow::Return(v));
            }
        }
        Ok(Flow::Continue)
    }

    fn runtime_error(&mut self, detail: String) -> Stop {
        self.log(EventKind::RuntimeError { detail });
        self.state.outcome_flag = OutcomeFlag::Failure;
        let cause = TriggerCause::Failure;
        Stop::Trigger { cause, completed: false }
    }

    fn exec_stmt(&mut self, stmts: &[Statement], i: usize, top: bool, env: &ExecEnv<'_>) -> Result<Flow, Stop> {
        self.state.steps_completed += 1;
        if self.state.steps_completed > self.exec.step_ceiling {
            self.state.steps_completed -= 1;
            return Err(Stop::Halt(TerminalReason::StepCeiling));
        }
        match &stmts[i] {
            Statement::Call(call) => {
                let guarded = matches!(stmts.get(i + 1), Some(Statement::Fallback { var, .. }) if *var == call.output);
                let value = self.call(call, guarded, top, env)?;
                self.state.variable_bindings.insert(call.output.clone(), value);
                Ok(Flow::Continue)
            }
            Statement::ListInit { var, items } => {
                let items = items.iter().map(|e| self.eval(e)).collect::<Result<Vec<_>, _>>().map_err(|d| self.runtime_error(d))?;
                self.state.variable_bindings.insert(var.clone(), Value::List(items));
                Ok(Flow::Continue)
            }
            Statement::Append { list, value } => {
                let v = self.eval(value).map_err(|d| self.runtime_error(d))?;
                match self.state.variable_bindings.get_mut(list) {
                    Some(Value::List(items)) => {
                        items.push(v);
                        Ok(Flow::Continue)
                    }
                    _ => Err(self.runtime_error(format!("`{list}` is not a list"))),
                }
            }
            Statement::Loop { var, count, body } => {
                for k in 0..*count {
                    self.state.variable_bindings.insert(var.clone(), Value::Int(k as i64));
                    if let Flow::Return(v) = self.exec_block(body, env)? {
                        return Ok(Flow::Return(v));
                    }
                }
                Ok(Flow::Continue)
            }
            Statement::MapCall { item, source, call } => {
                let src = self.eval(source).map_err(|d| self.runtime_error(d))?;
                let items = match src {
                    Value::List(items) => items,
                    other => vec![other],
                };
                let mut out = Vec::with_capacity(items.len());
                for it in items {
                    self.state.variable_bindings.insert(item.clone(), it);
                    out.push(self.call(call, false, false, env)?);
                }
                self.state.variable_bindings.insert(call.output.clone(), Value::List(out));
                Ok(Flow::Continue)
            }
            Statement::Fallback { var, replacement } => {
                if self.state.variable_bindings.get(var).is_none_or(Value::is_blank) {
                    let v = self.eval(replacement).map_err(|d| self.runtime_error(d))?;
                    self.state.variable_bindings.insert(var.clone(), v);
                    self.log(EventKind::FallbackApplied { var: var.clone() });
                }
                Ok(Flow::Continue)
            }
            Statement::Return { value } => {
                let v = self.eval(value).map_err(|d| self.runtime_error(d))?;
                Ok(Flow::Return(v))
            }
        }
    }

    /// One operator invocation followed by the trigger checkpoint.
    fn call(&mut self, call: &Call, guarded: bool, top: bool, env: &ExecEnv<'_>) -> Result<Value, Stop> {
        let workflow = self.versions.last().expect("version").clone();
        let Some(role) = workflow.template.role(&call.role) else {
            return Err(self.runtime_error(format!("no role `{}`", call.role)));
        };
        let mut inputs = BTreeMap::new();
        for (name, expr) in &call.args {
            let v = self.eval(expr).map_err(|d| self.runtime_error(d))?;
            inputs.insert(name.clone(), v);
        }
        let backbone = if role.kind.uses_backbone() {
            workflow.assignment.get(&role.id).map(String::from).or_else(|| role.slot.clone())
        } else {
            None
        };
        self.log(EventKind::OperatorStart { role: role.id.clone(), operator: role.kind.name().into(), backbone: backbone.clone() });
        let params = SamplingParams {
            temperature: self.exec.operator_temperature,
            max_tokens: self.exec.operator_max_tokens,
            seed: derive_seed(self.seed, "operator", self.calls),
        };
        self.calls += 1;
        let ctx = OperatorContext {
            gateway: env.gateway,
            query: &self.query,
            stream: &self.stream,
            params,
            docstore: env.docstore,
            sandbox: env.sandbox,
            checks: env.checks,
            repair_rounds: self.exec.repair_rounds,
        };
        let result = run_operator(role, backbone.as_deref(), &inputs, &ctx);
        let (value, completed) = match result {
            Ok(out) => {
                self.charge(Spender::Operator, &out.exchanges);
                for line in &out.log {
                    self.log(EventKind::Note { text: line.clone() });
                }
                self.log(EventKind::OperatorFinish { role: role.id.clone(), output_chars: out.text.chars().count() });
                (Value::Text(out.text), top)
            }
            Err(fail) => {
                self.charge(Spender::Operator, &fail.exchanges);
                for line in &fail.log {
                    self.log(EventKind::Note { text: line.clone() });
                }
                self.log(EventKind::OperatorError { role: role.id.clone(), error: fail.error, handled: guarded });
                if !guarded {
                    self.state.outcome_flag = OutcomeFlag::Failure;
                }
                (Value::Text(String::new()), top && guarded)
            }
        };
        if should_rectify(self.state.cumulative_cost, self.state.outcome_flag, self.meta.theta_c) {
            let cause = if self.state.outcome_flag == OutcomeFlag::Failure { TriggerCause::Failure } else { TriggerCause::Budget };
            if completed {
                self.state.variable_bindings.insert(call.output.clone(), value);
            }
            return Err(Stop::Trigger { cause, completed });
        }
        Ok(value)
    }

    fn eval(&self, e: &Expr) -> Result<Value, String> {
        let b = &self.state.variable_bindings;
        Ok(match e {
            Expr::Str(s) => Value::Text(s.clone()),
            Expr::Int(i) => Value::Int(*i),
            Expr::None => Value::None,
            Expr::Query => Value::Text(self.query.clone()),
            Expr::Attr(name) => {
                let t = &self.versions.last().expect("version").template;
                match t.fields.iter().find(|f| f.name == *name) {
                    Some(f) => self.eval(&f.value)?,
                    None => return Err(format!("no attribute `self.{name}`")),
                }
            }
            Expr::Var(v) => b.get(v).cloned().ok_or_else(|| format!("`{v}` is not defined"))?,
            Expr::Index { var, index } => match b.get(var) {
                Some(Value::List(items)) => items.get(*index).cloned().ok_or_else(|| format!("`{var}[{index}]` is out of range ({} items)", items.len()))?,
                Some(_) => return Err(format!("`{var}` is not a list")),
                None => return Err(format!("`{var}` is not defined")),
            },
            Expr::List(items) => Value::List(items.iter().map(|x| self.eval(x)).collect::<Result<_, _>>()?),
            Expr::Dict(entries) => Value::Dict(entries.iter().map(|(k, x)| Ok((k.clone(), self.eval(x)?))).collect::<Result<_, String>>()?),
            Expr::DefinedOr { name, otherwise } => match b.get(name) {
                Some(v) => v.clone(),
                None => self.eval(otherwise)?,
            },
        })
    }
}

fn written_vars(stmts: &[Statement], out: &mut BTreeSet<String>) {
    for s in stmts {
        if let Some(v) = s.written_var() {
            out.insert(v.to_string());
        }
        match s {
            Statement::Loop { var, body, .. } => {
                out.insert(var.clone());
                written_vars(body, out);
            }
            Statement::MapCall { item, .. } => {
                out.insert(item.clone());
            }
            _ => {}
        }
    }
}

fn roles_called(s: &Statement, out: &mut BTreeSet<String>) {
    match s {
        Statement::Call(c) | Statement::MapCall { call: c, .. } => {
            out.insert(c.role.clone());
        }
        Statement::Loop { body, .. } => body.iter().for_each(|b| roles_called(b, out)),
        _ => {}
    }
}

/// Top-level statement to resume from after swapping `old` for `new`: the
/// earlier of the checkpoint and the first statement that differs (itself
/// or through a changed role). Constructor or variable-naming changes
/// restart from the beginning.
pub fn resume_point(old: &WorkflowTemplate, new: &WorkflowTemplate, checkpoint: usize) -> usize {
    if old.fields != new.fields {
        return 0;
    }
    let (mut ov, mut nv) = (BTreeSet::new(), BTreeSet::new());
    written_vars(&old.program.statements, &mut ov);
    written_vars(&new.program.statements, &mut nv);
    if nv.difference(&ov).next().is_some() && ov.difference(&nv).next().is_some() {
        return 0;
    }
    let changed_role = |id: &str| old.role(id) != new.role(id);
    let (a, b) = (&old.program.statements, &new.program.statements);
    let mut first = a.len().min(b.len());
    for i in 0..first {
        let mut roles = BTreeSet::new();
        roles_called(&b[i], &mut roles);
        if a[i] != b[i] || roles.iter().any(|r| changed_role(r)) {
            first = i;
            break;
        }
    }
    first.min(checkpoint)
}

/// Run `workflow` to completion, rectifying on every trigger.
#[allow(clippy::too_many_arguments)]
pub fn execute(
    workflow: InstantiatedWorkflow,
    query: &str,
    judge: &Judge,
    meta: &MetaAgentConfig,
    exec: &ExecutorConfig,
    env: &ExecEnv<'_>,
    stream: &str,
    seed: u64,
) -> TrajectoryOutcome {
    let mut run = Run::new(workflow, query, judge.clone(), meta, exec, stream, seed);
    drive(&mut run, env)
}

/// Continue a run until it finishes.
pub fn drive(run: &mut Run, env: &ExecEnv<'_>) -> TrajectoryOutcome {
    loop {
        match run.advance(env) {
            Advance::Finished(out) => return *out,
            Advance::Triggered(req) => {
                let prior = run.versions().last().expect("version").clone();
                let attempt = rectify(env.gateway, &req, &prior, &run.meta, run.rectifier_seed(), &run.stream);
                run.apply_rectification(attempt);
            }
        }
    }
}
