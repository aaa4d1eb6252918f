//! Builds one collaboration tree per query and turns it into preference data.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use mas2_core::cto::{
    assign_cohort_rewards, extract_preferences, propagate_values, CollabTree, Exact, NodeId, NodeKind, PreferenceTuple, Weighting,
};
use mas2_core::ir::{emit_dialect, InstantiatedWorkflow, WorkflowTemplate};
use mas2_core::Money;
use serde::{Deserialize, Serialize};

use crate::executor::{drive, Advance, ExecEnv, ExecutorConfig, Judge, Run, TrajectoryOutcome};
use crate::meta::{generate_templates, instantiate, MetaAgentConfig, MetaError, RectificationRequest};
use crate::seeds::derive_seed;

pub const CTO_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum CtoPayload {
    Query { text: String },
    Template { template: WorkflowTemplate },
    Instantiation { workflow: InstantiatedWorkflow },
    Rectified { workflow: InstantiatedWorkflow, request: RectificationRequest },
    Outcome { outcome: Box<TrajectoryOutcome>, c_norm: Exact },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CurateConfig {
    pub weighting: Weighting,
    /// Rectifier samples drawn from the first trigger of each trajectory.
    /// Values above 1 branch the tree there; 0 and 1 keep a single chain.
    pub resample_rectifications: usize,
}

impl Default for CurateConfig {
    fn default() -> Self {
        CurateConfig { weighting: Weighting::TrajectoryCount, resample_rectifications: 0 }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CurateError {
    #[error(transparent)]
    Meta(#[from] MetaError),
    #[error("no template could be instantiated")]
    NoTrajectories,
    #[error("tree assembly failed: {0}")]
    Tree(String),
}

/// One executed path below an implementer node.
#[derive(Debug, Clone)]
pub struct Branch {
    pub outcome: TrajectoryOutcome,
}

impl Branch {
    /// Accepted rectifications in order, with the request that produced each.
    fn chain(&self) -> Vec<(InstantiatedWorkflow, RectificationRequest)> {
        self.outcome
            .rectifications
            .iter()
            .filter_map(|r| r.produced_version.map(|v| (self.outcome.workflow_versions[v].clone(), r.request.clone())))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct Curated {
    pub tree: CollabTree<CtoPayload>,
    pub zero_mean_cohort: bool,
    pub preferences: Vec<PreferenceTuple>,
    /// Generator and implementer spend, outside every trajectory's C(τ).
    pub meta_cost: Money,
    pub notes: Vec<String>,
}

impl Curated {
    pub fn outcomes(&self) -> impl Iterator<Item = (NodeId, &TrajectoryOutcome)> {
        self.tree.leaves().filter_map(|n| match &n.payload {
            CtoPayload::Outcome { outcome, .. } => Some((n.id, outcome.as_ref())),
            _ => None,
        })
    }
}

/// Archive form written as `.cto.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CtoArchive {
    pub schema_version: u32,
    pub weighting: Weighting,
    pub zero_mean_cohort: bool,
    pub meta_cost: Money,
    pub tree: CollabTree<CtoPayload>,
}

/// Run every instantiation, branching at the first trigger when resampling.
#[allow(clippy::too_many_arguments)]
fn run_trajectory(
    wf: InstantiatedWorkflow,
    query: &str,
    judge: &Judge,
    meta: &MetaAgentConfig,
    exec: &ExecutorConfig,
    env: &ExecEnv<'_>,
    stream: &str,
    seed: u64,
    resample: usize,
) -> Vec<Branch> {
    let mut run = Run::new(wf, query, judge.clone(), meta, exec, stream, seed);
    if resample < 2 {
        return vec![Branch { outcome: drive(&mut run, env) }];
    }
    match run.advance(env) {
        Advance::Finished(out) => vec![Branch { outcome: *out }],
        Advance::Triggered(_) => (0..resample)
            .map(|k| {
                let mut alt = run.clone();
                let s = format!("{stream}/r{k}");
                alt.set_stream(&s, derive_seed(seed, "resample", k as u64));
                Branch { outcome: drive(&mut alt, env) }
            })
            .collect(),
    }
}

/// Maps a closure over `items` on up to `jobs` threads, keeping input order.
pub fn parallel_map<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(usize, &T) -> R + Sync) -> Vec<R> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, items.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(i, &items[i]);
                slots.lock().expect("no panics while holding the lock")[i] = Some(r);
            });
        }
    });
    slots.into_inner().expect("lock").into_iter().map(|r| r.expect("every slot filled")).collect()
}

#[allow(clippy::too_many_arguments)]
pub fn build_tree(
    tree_id: &str,
    query: &str,
    judge: &Judge,
    meta: &MetaAgentConfig,
    exec: &ExecutorConfig,
    cfg: &CurateConfig,
    env: &ExecEnv<'_>,
    seed: u64,
    jobs: usize,
) -> Result<Curated, CurateError> {
    let mut notes = Vec::new();
    let gen = generate_templates(env.gateway, query, meta.k, meta, derive_seed(seed, "gen", 0), &format!("{tree_id}/gen"))?;
    let mut meta_cost: Money = gen.exchanges.iter().map(|e| e.cost).sum();
    notes.extend(gen.notes);

    let mut instantiated = Vec::new();
    for (g, t) in gen.templates.iter().enumerate() {
        match instantiate(env.gateway, t, meta.n, meta, derive_seed(seed, "imp", g as u64), &format!("{tree_id}/imp/{g}")) {
            Ok(out) => {
                meta_cost += out.exchanges.iter().map(|e| e.cost).sum::<Money>();
                notes.extend(out.notes.into_iter().map(|n| format!("template {g}: {n}")));
                instantiated.push((t.clone(), out.workflows));
            }
            Err(MetaError::AllCandidatesInvalid { last, exchanges, .. }) => {
                meta_cost += exchanges.iter().map(|e| e.cost).sum::<Money>();
                notes.push(format!("template {g}: dropped, no valid instantiation ({last})"));
            }
        }
    }
    if instantiated.is_empty() {
        return Err(CurateError::NoTrajectories);
    }

    let jobs_list: Vec<(usize, usize, InstantiatedWorkflow)> = instantiated
        .iter()
        .enumerate()
        .flat_map(|(g, (_, ws))| ws.iter().enumerate().map(move |(i, w)| (g, i, w.clone())))
        .collect();
    let branches = parallel_map(&jobs_list, jobs, |_, (g, i, w)| {
        let stream = format!("{tree_id}/traj/{g}/{i}");
        let s = derive_seed(seed, &format!("traj/{g}"), *i as u64);
        run_trajectory(w.clone(), query, judge, meta, exec, env, &stream, s, cfg.resample_rectifications)
    });

    let err = |e: mas2_core::cto::TreeError| CurateError::Tree(e.to_string());
    let mut tree = CollabTree::new(tree_id, CtoPayload::Query { text: query.to_string() });
    let mut imp_nodes = Vec::new();
    for (t, ws) in &instantiated {
        let gnode = tree.add_child(CollabTree::<CtoPayload>::ROOT, NodeKind::Generator, CtoPayload::Template { template: t.clone() }).map_err(err)?;
        for w in ws {
            imp_nodes.push(tree.add_child(gnode, NodeKind::Implementer, CtoPayload::Instantiation { workflow: w.clone() }).map_err(err)?);
        }
    }
    let cohort: Vec<(bool, Money)> = branches.iter().flatten().map(|b| (b.outcome.success, b.outcome.total_cost)).collect();
    let rewards = assign_cohort_rewards(&cohort).map_err(|e| CurateError::Tree(e.to_string()))?;
    let zero_mean_cohort = rewards.first().is_some_and(|r| r.zero_mean_cohort);
    let mut rewards = rewards.into_iter();
    for (inode, bs) in imp_nodes.iter().zip(branches) {
        for b in bs {
            let mut parent = *inode;
            for (workflow, request) in b.chain() {
                parent = tree.add_child(parent, NodeKind::Rectifier, CtoPayload::Rectified { workflow, request }).map_err(err)?;
            }
            let r = rewards.next().expect("one reward per branch");
            let leaf = tree
                .add_child(parent, NodeKind::Terminal, CtoPayload::Outcome { outcome: Box::new(b.outcome), c_norm: r.c_norm })
                .map_err(err)?;
            tree.set_reward(leaf, r.reward).map_err(err)?;
        }
    }
    propagate_values(&mut tree, cfg.weighting).map_err(|e| CurateError::Tree(e.to_string()))?;
    tree.check_invariants().map_err(err)?;
    let preferences = preferences(&tree)?;
    if preferences.is_empty() {
        notes.push("no preference pairs: every sibling group has equal values".into());
    }
    Ok(Curated { tree, zero_mean_cohort, preferences, meta_cost, notes })
}

/// Serialized decision context at `node`.
pub fn decision_context(tree: &CollabTree<CtoPayload>, node: NodeId) -> String {
    let n = tree.node(node);
    match &n.payload {
        CtoPayload::Query { text } => text.clone(),
        CtoPayload::Template { template } => emit_dialect(&template.abstracted()),
        CtoPayload::Instantiation { .. } | CtoPayload::Rectified { .. } => n
            .children
            .iter()
            .find_map(|&c| match &tree.node(c).payload {
                CtoPayload::Rectified { request, .. } => Some(request.render()),
                _ => None,
            })
            .unwrap_or_default(),
        CtoPayload::Outcome { .. } => String::new(),
    }
}

/// Serialized action that produced `child`.
pub fn decision_action(tree: &CollabTree<CtoPayload>, child: NodeId) -> String {
    match &tree.node(child).payload {
        CtoPayload::Template { template } => emit_dialect(template),
        CtoPayload::Instantiation { workflow } | CtoPayload::Rectified { workflow, .. } => emit_dialect(&workflow.template),
        CtoPayload::Query { text } => text.clone(),
        CtoPayload::Outcome { outcome, .. } => outcome.final_answer.clone().unwrap_or_default(),
    }
}

pub fn preferences(tree: &CollabTree<CtoPayload>) -> Result<Vec<PreferenceTuple>, CurateError> {
    extract_preferences(tree, &(decision_context, decision_action)).map_err(|e| CurateError::Tree(e.to_string()))
}

impl Curated {
    pub fn archive(&self, weighting: Weighting) -> CtoArchive {
        CtoArchive {
            schema_version: CTO_SCHEMA_VERSION,
            weighting,
            zero_mean_cohort: self.zero_mean_cohort,
            meta_cost: self.meta_cost,
            tree: self.tree.clone(),
        }
    }
}
