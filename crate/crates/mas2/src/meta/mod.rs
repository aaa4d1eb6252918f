//! The generator, implementer and rectifier: prompt assembly, one
//! completion per sample, and strict parsing of the returned workflow.

use std::fmt::Write as _;

use mas2_core::ir::{
    emit_dialect, extract_graph_block, parse_template_with, BackboneAssignment, BackbonePool, InstantiatedWorkflow, TemplateError,
    ValidationOptions, WorkflowTemplate, PLACEHOLDER,
};
use mas2_core::operator::{call_signature, OperatorKind};
use mas2_core::trigger::OutcomeFlag;
use mas2_core::Money;
use serde::{Deserialize, Serialize};

use crate::gateway::{Catalog, ChatExchange, ChatMessage, ChatRequest, Gateway, SamplingParams};
use crate::seeds::derive_seed;

pub const PROMPT_VERSION: u32 = 1;
const GENERATOR_PROMPT: &str = include_str!("../../assets/prompts/generator.txt");
const IMPLEMENTER_PROMPT: &str = include_str!("../../assets/prompts/implementer.txt");
const RECTIFIER_PROMPT: &str = include_str!("../../assets/prompts/rectifier.txt");

/// First line of each meta-agent prompt, for scripted mocks.
pub fn prompt_marker(agent: MetaAgent) -> &'static str {
    let text = match agent {
        MetaAgent::Generator => GENERATOR_PROMPT,
        MetaAgent::Implementer => IMPLEMENTER_PROMPT,
        MetaAgent::Rectifier => RECTIFIER_PROMPT,
    };
    text.lines().next().unwrap_or("")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetaAgent {
    Generator,
    Implementer,
    Rectifier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetaAgentConfig {
    pub generator_backbone: String,
    pub implementer_backbone: String,
    pub rectifier_backbone: String,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Templates sampled per query.
    pub k: usize,
    /// Instantiations per template.
    pub n: usize,
    /// θ_C: rectification fires when cumulative cost exceeds this.
    pub theta_c: Money,
    pub max_rectifications: u32,
    /// When false, a budget-triggered rectification is refused outright.
    pub rectify_over_budget: bool,
    /// Tail of the event log handed to the rectifier.
    pub error_log_chars: usize,
    pub max_loop: u32,
}

impl Default for MetaAgentConfig {
    fn default() -> Self {
        let meta = crate::gateway::META_BACKBONE.0.to_string();
        MetaAgentConfig {
            generator_backbone: meta.clone(),
            implementer_backbone: meta.clone(),
            rectifier_backbone: meta,
            temperature: 0.8,
            max_tokens: 4096,
            k: 4,
            n: 2,
            theta_c: "0.05".parse().expect("literal"),
            max_rectifications: 2,
            rectify_over_budget: true,
            error_log_chars: 4000,
            max_loop: mas2_core::ir::DEFAULT_MAX_LOOP,
        }
    }
}

impl MetaAgentConfig {
    pub fn check(&self) -> Result<(), String> {
        if self.k == 0 || self.n == 0 {
            return Err("k and n must be at least 1".into());
        }
        if self.theta_c.is_zero() {
            return Err("theta_c must be positive".into());
        }
        if self.max_loop == 0 {
            return Err("max_loop must be at least 1".into());
        }
        Ok(())
    }

    fn validation(&self) -> ValidationOptions {
        ValidationOptions { max_loop: self.max_loop }
    }

    fn params(&self, seed: u64) -> SamplingParams {
        SamplingParams { temperature: self.temperature, max_tokens: self.max_tokens, seed }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetaError {
    #[error("no valid candidate after {attempts} attempts; last problem: {last}")]
    AllCandidatesInvalid { attempts: usize, last: String, exchanges: Vec<ChatExchange> },
}

/// Why a completion could not be used.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AssignmentError {
    #[error("no workflow found in the reply")]
    NoGraphBlock,
    #[error("reply does not parse: {0}")]
    Unparsable(#[from] TemplateError),
    #[error("reply changes the workflow beyond backbone slots: {0}")]
    StructureTampered(String),
    #[error("role `{0}` still holds the placeholder")]
    IncompleteSubstitution(String),
    #[error("backbone `{0}` is not in the pool")]
    UnknownBackbone(String),
}

fn fill(template: &str, slots: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (name, value) in slots {
        out = out.replace(&format!("{{{{{name}}}}}"), value);
    }
    out
}

fn snake(kind: OperatorKind) -> String {
    let mut s = String::new();
    for (i, c) in kind.name().chars().enumerate() {
        if c.is_ascii_uppercase() && i > 0 {
            s.push('_');
        }
        s.push(c.to_ascii_lowercase());
    }
    s
}

/// Operator list for the generator prompt.
pub fn operator_listing() -> String {
    let mut s = String::new();
    for kind in OperatorKind::ALL {
        let _ = writeln!(s, "- {}: {} Call: {}", kind.name(), kind.description(), call_signature(kind, &format!("self.{}", snake(kind))));
    }
    s
}

/// Call formats for the rectifier prompt.
pub fn template_guide() -> String {
    let mut s = String::new();
    for kind in OperatorKind::ALL {
        let _ = writeln!(s, "- operator.{}: {}", kind.name(), call_signature(kind, &snake(kind)));
    }
    s
}

pub fn generator_prompt(query: &str) -> String {
    fill(GENERATOR_PROMPT, &[("operators", operator_listing().trim_end()), ("query", query.trim())])
}

pub fn implementer_prompt(template: &WorkflowTemplate, catalog: &Catalog) -> String {
    fill(IMPLEMENTER_PROMPT, &[("catalog", &catalog.describe_pool()), ("template", emit_dialect(&template.abstracted()).trim_end())])
}

pub fn rectifier_prompt(req: &RectificationRequest) -> String {
    fill(
        RECTIFIER_PROMPT,
        &[("broken_workflow", req.broken_workflow.trim_end()), ("error_log", req.error_log.trim()), ("template_guide", req.template_guide.trim_end())],
    )
}

fn ask(gw: &Gateway, backbone: &str, prompt: String, params: SamplingParams, stream: &str) -> Result<ChatExchange, String> {
    gw.complete(backbone, &ChatRequest::new(vec![ChatMessage::user(prompt)], params, stream)).map_err(|e| e.to_string())
}

fn parse_reply(reply: &str, opts: &ValidationOptions) -> Result<WorkflowTemplate, AssignmentError> {
    let block = extract_graph_block(reply).map_err(|_| AssignmentError::NoGraphBlock)?;
    Ok(parse_template_with(&block, opts)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub templates: Vec<WorkflowTemplate>,
    pub exchanges: Vec<ChatExchange>,
    /// Dropped or retried candidates, in order.
    pub notes: Vec<String>,
}

/// Up to `k` distinct templates. A candidate that fails to parse or
/// validate is resampled once, then dropped. Templates come back with every
/// backbone slot reset to the placeholder.
pub fn generate_templates(gw: &Gateway, query: &str, k: usize, cfg: &MetaAgentConfig, seed: u64, stream: &str) -> Result<Generated, MetaError> {
    let mut out = Generated { templates: Vec::new(), exchanges: Vec::new(), notes: Vec::new() };
    let prompt = generator_prompt(query);
    let mut attempts = 0;
    let mut last = String::from("no candidates requested");
    for j in 0..k {
        for attempt in 0..2u64 {
            attempts += 1;
            let params = cfg.params(derive_seed(seed, "generator", j as u64 * 2 + attempt));
            let parsed = ask(gw, &cfg.generator_backbone, prompt.clone(), params, stream).and_then(|ex| {
                let reply = ex.response.clone();
                out.exchanges.push(ex);
                parse_reply(&reply, &cfg.validation()).map_err(|e| e.to_string())
            });
            match parsed {
                Ok(t) => {
                    let t = t.abstracted();
                    if out.templates.contains(&t) {
                        out.notes.push(format!("candidate {j}: duplicate of an earlier template, dropped"));
                    } else {
                        out.templates.push(t);
                    }
                    break;
                }
                Err(e) => {
                    let what = if attempt == 0 { "resampling" } else { "dropped" };
                    out.notes.push(format!("candidate {j}: {e}; {what}"));
                    last = e;
                }
            }
        }
    }
    if out.templates.is_empty() {
        return Err(MetaError::AllCandidatesInvalid { attempts, last, exchanges: out.exchanges });
    }
    Ok(out)
}

/// Check an implementer reply against its template and read off φ.
pub fn parse_assignment<P: BackbonePool + ?Sized>(response: &str, template: &WorkflowTemplate, pool: &P) -> Result<BackboneAssignment, AssignmentError> {
    let parsed = parse_reply(response, &ValidationOptions { max_loop: u32::MAX })?;
    let expected = template.abstracted();
    let got = parsed.abstracted();
    if got != expected {
        return Err(AssignmentError::StructureTampered(describe_difference(&expected, &got)));
    }
    let mut a = BackboneAssignment::new();
    for role in parsed.llm_roles() {
        let slot = role.slot.as_deref().unwrap_or(PLACEHOLDER);
        if slot == PLACEHOLDER {
            return Err(AssignmentError::IncompleteSubstitution(role.id.clone()));
        }
        if !pool.contains_backbone(slot) {
            return Err(AssignmentError::UnknownBackbone(slot.into()));
        }
        a.mapping.insert(role.id.clone(), slot.into());
    }
    Ok(a)
}

fn describe_difference(expected: &WorkflowTemplate, got: &WorkflowTemplate) -> String {
    if expected.roles.len() != got.roles.len() {
        return format!("{} roles instead of {}", got.roles.len(), expected.roles.len());
    }
    for (a, b) in expected.roles.iter().zip(&got.roles) {
        if a != b {
            return format!("role `{}` differs", a.id);
        }
    }
    if expected.program != got.program {
        return "program differs".into();
    }
    "constructor fields differ".into()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instantiated {
    pub workflows: Vec<InstantiatedWorkflow>,
    pub exchanges: Vec<ChatExchange>,
    pub notes: Vec<String>,
}

/// `n` implementer samples; a rejected reply is resampled once then dropped.
/// Identical assignments are kept as separate instantiations.
pub fn instantiate(
    gw: &Gateway,
    template: &WorkflowTemplate,
    n: usize,
    cfg: &MetaAgentConfig,
    seed: u64,
    stream: &str,
) -> Result<Instantiated, MetaError> {
    let catalog = gw.catalog();
    let mut out = Instantiated { workflows: Vec::new(), exchanges: Vec::new(), notes: Vec::new() };
    let prompt = implementer_prompt(template, catalog);
    let mut attempts = 0;
    let mut last = String::from("no samples requested");
    for j in 0..n {
        for attempt in 0..2u64 {
            attempts += 1;
            let params = cfg.params(derive_seed(seed, "implementer", j as u64 * 2 + attempt));
            let result = ask(gw, &cfg.implementer_backbone, prompt.clone(), params, stream).and_then(|ex| {
                let reply = ex.response.clone();
                out.exchanges.push(ex);
                let a = parse_assignment(&reply, template, catalog).map_err(|e| e.to_string())?;
                mas2_core::ir::substitute_backbones(&template.abstracted(), &a, catalog).map_err(|e| e.to_string())
            });
            match result {
                Ok(w) => {
                    out.workflows.push(w);
                    break;
                }
                Err(e) => {
                    let what = if attempt == 0 { "resampling" } else { "dropped" };
                    out.notes.push(format!("instantiation {j}: {e}; {what}"));
                    last = e;
                }
            }
        }
    }
    if out.workflows.is_empty() {
        return Err(MetaError::AllCandidatesInvalid { attempts, last, exchanges: out.exchanges });
    }
    Ok(out)
}

/// Running-state summary included with a rectification request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSummary {
    pub cumulative_cost: Money,
    pub steps_completed: u64,
    pub outcome_flag: OutcomeFlag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriggerCause {
    Budget,
    Failure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RectificationRequest {
    pub broken_workflow: String,
    pub error_log: String,
    pub template_guide: String,
    pub state: StateSummary,
    pub cause: TriggerCause,
    pub theta_c: Money,
}

impl RectificationRequest {
    /// Text form used as the decision context in preference data.
    pub fn render(&self) -> String {
        format!("Workflow:\n{}\n\nError log:\n{}", self.broken_workflow.trim_end(), self.error_log.trim())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RectifyError {
    #[error("rectifier reply unusable: {detail}")]
    RectificationParseFailed { detail: String },
    #[error("cost {cost} already exceeds the budget {theta_c}; further spending is not allowed")]
    BudgetForbidden { cost: Money, theta_c: Money },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RectifyAttempt {
    pub exchanges: Vec<ChatExchange>,
    pub result: Result<InstantiatedWorkflow, RectifyError>,
}

/// One rectifier completion. Placeholder slots in the reply keep the
/// backbone the same role had before; concrete slots must be pool members.
pub fn rectify(gw: &Gateway, req: &RectificationRequest, prior: &InstantiatedWorkflow, cfg: &MetaAgentConfig, seed: u64, stream: &str) -> RectifyAttempt {
    if req.cause == TriggerCause::Budget && req.state.cumulative_cost > req.theta_c && !cfg.rectify_over_budget {
        return RectifyAttempt {
            exchanges: vec![],
            result: Err(RectifyError::BudgetForbidden { cost: req.state.cumulative_cost, theta_c: req.theta_c }),
        };
    }
    let params = cfg.params(seed);
    let ex = match ask(gw, &cfg.rectifier_backbone, rectifier_prompt(req), params, stream) {
        Ok(ex) => ex,
        Err(e) => return RectifyAttempt { exchanges: vec![], result: Err(RectifyError::RectificationParseFailed { detail: e }) },
    };
    let result = adopt(&ex.response, prior, gw.catalog(), &cfg.validation());
    RectifyAttempt { exchanges: vec![ex], result }
}

fn adopt(reply: &str, prior: &InstantiatedWorkflow, pool: &Catalog, opts: &ValidationOptions) -> Result<InstantiatedWorkflow, RectifyError> {
    let failed = |detail: String| RectifyError::RectificationParseFailed { detail };
    let mut t = parse_reply(reply, opts).map_err(|e| failed(e.to_string()))?;
    let mut a = BackboneAssignment::new();
    for role in t.roles.iter_mut().filter(|r| r.kind.uses_backbone()) {
        let slot = match role.slot.as_deref() {
            Some(s) if s != PLACEHOLDER => s.to_string(),
            _ => prior
                .assignment
                .get(&role.id)
                .map(String::from)
                .ok_or_else(|| failed(format!("new role `{}` has no backbone", role.id)))?,
        };
        if !pool.contains_backbone(&slot) {
            return Err(failed(format!("backbone `{slot}` is not in the pool")));
        }
        role.slot = Some(slot.clone());
        a.mapping.insert(role.id.clone(), slot);
    }
    t.source_text = None;
    Ok(InstantiatedWorkflow { template: t, assignment: a })
}
