//! Command implementations behind the `mas2` binary.

mod config;
mod report;
mod tasks;

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use mas2_core::ir::{parse_canonical, parse_template, serialize_template, WorkflowTemplate};
use mas2_core::loss::{dataset_loss, LossConfig, LossReport};
use mas2_core::Money;

use crate::curate::{build_tree, parallel_map, Curated};
use crate::executor::{execute, ExecEnv, TrajectoryOutcome};
use crate::formats::{self, FormatError, TrajectoryRecord, TRAJ_SCHEMA_VERSION};
use crate::gateway::{Backend, Catalog, Gateway, HttpBackend, MockBackend, MockScript};
use crate::meta::{generate_templates, instantiate, MetaAgentConfig};
use crate::operators::{DocStore, Sandbox};
use crate::seeds::derive_seed;

pub use config::{Config, ConfigError, GatewaySection, MetaSection, SandboxSection, ThetaSetting, CALIBRATION_FACTOR};
pub use report::{BackboneUsage, RunReport, Tally, TaskRow, UNLABELLED};
pub use tasks::{load_tasks, parse_tasks, TaskError, TaskRecord};

/// Built-in script used by `--mock` without a file.
pub const DEMO_MOCK: &str = include_str!("../../assets/mock-demo.json");

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Tasks(#[from] TaskError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    /// Process exit status.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

fn failed(e: impl std::fmt::Display) -> CliError {
    CliError::Failed(e.to_string())
}

/// A task id with its tree, or the reason no tree was built.
pub type TreeResult = (String, Result<Curated, String>);

/// Loaded configuration plus the live services it describes.
pub struct Harness {
    pub cfg: Config,
    pub gateway: Gateway,
    pub sandbox: Sandbox,
    pub docstore: Option<DocStore>,
}

impl Harness {
    pub fn new(cfg: Config, mock: Option<MockScript>) -> Result<Harness, CliError> {
        let mut catalog = match &cfg.gateway.catalog {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| ConfigError::Unreadable { path: p.display().to_string(), message: e.to_string() })?;
                Catalog::from_toml(&text).map_err(|e| ConfigError::Invalid(format!("{}: {e}", p.display())))?
            }
            None => Catalog::seed(),
        };
        if let Some(ep) = &cfg.gateway.endpoint {
            catalog.set_endpoint(ep);
        }
        let backend: Arc<dyn Backend> = match mock {
            Some(script) => Arc::new(MockBackend::new(script)),
            None => Arc::new(HttpBackend::new(&cfg.gateway.api_key_env, cfg.timeout())),
        };
        let ceiling = cfg.gateway.call_ceiling.as_deref().map(|c| c.parse::<Money>()).transpose().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let gateway = Gateway::new(catalog, backend).with_retry(cfg.retry()).with_call_ceiling(ceiling);
        for b in [&cfg.meta.agents.generator_backbone, &cfg.meta.agents.implementer_backbone, &cfg.meta.agents.rectifier_backbone] {
            if gateway.catalog().get(b).is_none() {
                return Err(ConfigError::Invalid(format!("meta-agent backbone `{b}` is not in the catalog")).into());
            }
        }
        let docstore = match &cfg.docs {
            Some(d) => Some(DocStore::open(d).map_err(|e| ConfigError::Unreadable { path: d.display().to_string(), message: e.to_string() })?),
            None => None,
        };
        let sandbox = Sandbox { python: cfg.sandbox.python.clone(), timeout: Duration::from_secs(cfg.sandbox.timeout_secs) };
        Ok(Harness { cfg, gateway, sandbox, docstore })
    }

    pub fn env<'a>(&'a self, checks: Option<&'a str>) -> ExecEnv<'a> {
        ExecEnv { gateway: &self.gateway, docstore: self.docstore.as_ref(), sandbox: &self.sandbox, checks }
    }

    /// Meta-agent settings with θ_C resolved.
    pub fn meta_config(&self, theta_c: Money) -> MetaAgentConfig {
        MetaAgentConfig { theta_c, ..self.cfg.meta.agents.clone() }
    }

    /// `generate`: writes `g{j}.mas2t` files and returns their paths.
    pub fn generate(&self, query: &str, k: usize, out: &Path) -> Result<Vec<PathBuf>, CliError> {
        let meta = self.meta_config(Money::from_picos(1));
        let gen = generate_templates(&self.gateway, query, k, &meta, derive_seed(self.cfg.seed, "gen", 0), "generate").map_err(failed)?;
        for n in &gen.notes {
            eprintln!("note: {n}");
        }
        let mut paths = Vec::new();
        for (j, t) in gen.templates.iter().enumerate() {
            let p = out.join(format!("g{j}.mas2t"));
            write_text(&p, &serialize_template(t))?;
            paths.push(p);
        }
        Ok(paths)
    }

    /// `instantiate`: writes `i{j}.mas2t` files holding concrete workflows.
    pub fn instantiate(&self, template: &Path, n: usize, out: &Path) -> Result<Vec<PathBuf>, CliError> {
        let t = read_template(template)?;
        let meta = self.meta_config(Money::from_picos(1));
        let inst = instantiate(&self.gateway, &t, n, &meta, derive_seed(self.cfg.seed, "imp", 0), "instantiate").map_err(failed)?;
        for note in &inst.notes {
            eprintln!("note: {note}");
        }
        let mut paths = Vec::new();
        for (j, w) in inst.workflows.iter().enumerate() {
            let p = out.join(format!("i{j}.mas2t"));
            write_text(&p, &w.canonical())?;
            paths.push(p);
        }
        Ok(paths)
    }

    /// One generate → instantiate → execute pass for a task.
    fn single_trajectory(&self, task: &TaskRecord, meta: &MetaAgentConfig, prefix: &str) -> (Money, Result<TrajectoryOutcome, String>) {
        let seed = derive_seed(self.cfg.seed, &format!("{prefix}{}", task.id), 0);
        let mut meta_cost = Money::ZERO;
        let gen = match generate_templates(&self.gateway, &task.query, 1, meta, derive_seed(seed, "gen", 0), &format!("{prefix}{}/gen", task.id)) {
            Ok(g) => g,
            Err(e) => return (meta_cost, Err(e.to_string())),
        };
        meta_cost += gen.exchanges.iter().map(|e| e.cost).sum::<Money>();
        let inst = match instantiate(&self.gateway, &gen.templates[0], 1, meta, derive_seed(seed, "imp", 0), &format!("{prefix}{}/imp/0", task.id)) {
            Ok(i) => i,
            Err(e) => return (meta_cost, Err(e.to_string())),
        };
        meta_cost += inst.exchanges.iter().map(|e| e.cost).sum::<Money>();
        let env = self.env(task.checks.as_deref());
        let stream = format!("{prefix}{}/traj/0/0", task.id);
        let out = execute(inst.workflows[0].clone(), &task.query, &task.judge, meta, &self.cfg.executor, &env, &stream, derive_seed(seed, "traj/0", 0));
        (meta_cost, Ok(out))
    }

    /// Resolves θ_C, running the calibration pass when configured.
    pub fn theta_c(&self, tasks: &[TaskRecord]) -> Money {
        match self.cfg.meta.theta_c {
            ThetaSetting::Absolute(m) => m,
            ThetaSetting::Calibrate { factor } => {
                let limit = if self.cfg.meta.calibration_tasks == 0 { tasks.len() } else { self.cfg.meta.calibration_tasks.min(tasks.len()) };
                let meta = MetaAgentConfig { max_rectifications: 0, ..self.meta_config(Money::from_picos(u64::MAX / 2)) };
                let costs: Vec<Money> = parallel_map(&tasks[..limit], self.cfg.jobs(), |_, t| self.single_trajectory(t, &meta, "calibrate/").1.ok().map(|o| o.total_cost))
                    .into_iter()
                    .flatten()
                    .collect();
                let theta = calibrated_theta(&costs, factor);
                eprintln!("calibrated theta_c = {theta} ({factor}x mean over {} trajectories)", costs.len());
                theta
            }
        }
    }

    /// `run`: one trajectory per task; writes `run.traj.jsonl`, `report.txt`, `report.csv`.
    pub fn run(&self, tasks: &[TaskRecord], out: &Path) -> Result<RunReport, CliError> {
        let meta = self.meta_config(self.theta_c(tasks));
        let results = parallel_map(tasks, self.cfg.jobs(), |_, t| self.single_trajectory(t, &meta, ""));
        let records: Vec<TrajectoryRecord> = tasks
            .iter()
            .zip(results)
            .map(|(t, (meta_cost, res))| {
                if let Err(e) = &res {
                    eprintln!("task {}: {e}", t.id);
                }
                TrajectoryRecord {
                    schema_version: TRAJ_SCHEMA_VERSION,
                    task_id: t.id.clone(),
                    domain: t.domain.clone(),
                    trajectory_id: format!("{}/0/0", t.id),
                    meta_cost,
                    error: res.as_ref().err().cloned(),
                    outcome: res.ok(),
                }
            })
            .collect();
        formats::write_jsonl(&out.join("run.traj.jsonl"), &records)?;
        let report = RunReport::from_records(&records);
        write_text(&out.join("report.txt"), &report.to_text())?;
        write_text(&out.join("report.csv"), &report.to_csv())?;
        Ok(report)
    }

    /// `curate`: one tree per task; writes `{id}.cto.json`, `prefs.jsonl` and
    /// `curate.traj.jsonl`. Tasks whose tree could not be built are reported
    /// and skipped.
    pub fn curate(&self, tasks: &[TaskRecord], out: &Path) -> Result<Vec<TreeResult>, CliError> {
        let meta = self.meta_config(self.theta_c(tasks));
        let mut results = Vec::new();
        let mut prefs = Vec::new();
        let mut records = Vec::new();
        for t in tasks {
            let env = self.env(t.checks.as_deref());
            let seed = derive_seed(self.cfg.seed, &t.id, 0);
            let built = build_tree(&t.id, &t.query, &t.judge, &meta, &self.cfg.executor, &self.cfg.curate, &env, seed, self.cfg.jobs());
            match built {
                Ok(c) => {
                    for n in &c.notes {
                        eprintln!("task {}: {n}", t.id);
                    }
                    formats::write_json(&out.join(format!("{}.cto.json", file_stem(&t.id))), &c.archive(self.cfg.weighting()))?;
                    prefs.extend(c.preferences.iter().cloned());
                    for (leaf, o) in c.outcomes() {
                        records.push(TrajectoryRecord {
                            schema_version: TRAJ_SCHEMA_VERSION,
                            task_id: t.id.clone(),
                            domain: t.domain.clone(),
                            trajectory_id: format!("{}/{leaf}", t.id),
                            meta_cost: c.meta_cost,
                            outcome: Some(o.clone()),
                            error: None,
                        });
                    }
                    results.push((t.id.clone(), Ok(c)));
                }
                Err(e) => {
                    eprintln!("task {}: {e}", t.id);
                    results.push((t.id.clone(), Err(e.to_string())));
                }
            }
        }
        if results.iter().all(|(_, r)| r.is_err()) {
            return Err(CliError::Failed("no tree could be built".into()));
        }
        if prefs.is_empty() {
            eprintln!("warning: no preference tuples; every sibling group tied");
        }
        formats::export_preferences(&prefs, &out.join("prefs.jsonl"))?;
        formats::write_jsonl(&out.join("curate.traj.jsonl"), &records)?;
        Ok(results)
    }
}

/// `factor` times the mean cost, never below one pico.
pub fn calibrated_theta(costs: &[Money], factor: u64) -> Money {
    if costs.is_empty() {
        return Money::from_picos(1);
    }
    let total: u128 = costs.iter().map(|c| c.picos() as u128).sum();
    let theta = total * factor as u128 / costs.len() as u128;
    Money::from_picos(theta.clamp(1, u64::MAX as u128) as u64)
}

fn file_stem(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' }).collect()
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| failed(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, text).map_err(|e| failed(format!("{}: {e}", path.display())))
}

/// Canonical `.mas2t` JSON, or dialect source.
pub fn read_template(path: &Path) -> Result<WorkflowTemplate, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| failed(format!("{}: {e}", path.display())))?;
    if text.trim_start().starts_with('{') {
        parse_canonical(&text).map_err(|e| failed(format!("{}: {e}", path.display())))
    } else {
        parse_template(&text).map_err(|e| failed(format!("{}: {e}", path.display())))
    }
}

/// `eval-loss`.
pub fn eval_loss(prefs: &Path, logprobs: &Path, cfg: &LossConfig) -> Result<LossReport, CliError> {
    let tuples = formats::import_preferences(prefs)?;
    let records = formats::read_logprobs(logprobs)?;
    dataset_loss(&tuples, &records, cfg).map_err(failed)
}

pub fn render_loss(r: &LossReport) -> String {
    format!(
        "loss          {:.12}\ntuples        {}\ntrees         {}\nbeta          {}\nreduction     {:?}\nweighting     {:?}\ndelta_v min   {:.12}\ndelta_v max   {:.12}\ndelta_v mean  {:.12}\n",
        r.loss, r.count, r.trees, r.config.beta, r.config.reduction, r.config.weighting, r.delta_v_min, r.delta_v_max, r.delta_v_mean
    )
}

/// `report`: aggregates trajectory logs.
pub fn report(paths: &[PathBuf]) -> Result<RunReport, CliError> {
    let mut records = Vec::new();
    for p in paths {
        records.extend(formats::read_trajectories(p)?);
    }
    Ok(RunReport::from_records(&records))
}

/// Mock script from a JSON file, or the built-in demo script.
pub fn load_mock(path: Option<&Path>) -> Result<MockScript, CliError> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p).map_err(|e| ConfigError::Unreadable { path: p.display().to_string(), message: e.to_string() })?,
        None => DEMO_MOCK.to_string(),
    };
    serde_json::from_str(&text).map_err(|e| ConfigError::Invalid(format!("mock script: {e}")).into())
}
