use std::path::{Path, PathBuf};
use std::time::Duration;

use mas2_core::cto::Weighting;
use mas2_core::loss::LossConfig;
use mas2_core::Money;
use serde::{Deserialize, Deserializer};

use crate::curate::CurateConfig;
use crate::executor::ExecutorConfig;
use crate::gateway::RetryPolicy;
use crate::meta::MetaAgentConfig;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Unreadable { path: String, message: String },
    #[error("{0}")]
    Invalid(String),
}

/// θ_C as configured: a fixed amount, or a multiple of the mean trajectory
/// cost measured by an unconstrained calibration pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThetaSetting {
    Absolute(Money),
    Calibrate { factor: u64 },
}

pub const CALIBRATION_FACTOR: u64 = 5;

impl Default for ThetaSetting {
    fn default() -> Self {
        ThetaSetting::Calibrate { factor: CALIBRATION_FACTOR }
    }
}

impl std::str::FromStr for ThetaSetting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if s == "calibrate" {
            return Ok(ThetaSetting::default());
        }
        if let Some(f) = s.strip_prefix("calibrate:").or_else(|| s.strip_prefix("calibrate*")) {
            let factor = f.trim().parse().map_err(|_| format!("bad calibration factor `{f}`"))?;
            return Ok(ThetaSetting::Calibrate { factor });
        }
        let m: Money = s.parse().map_err(|e| format!("theta_c: {e}"))?;
        if m.is_zero() {
            return Err("theta_c must be positive".into());
        }
        Ok(ThetaSetting::Absolute(m))
    }
}

impl<'de> Deserialize<'de> for ThetaSetting {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => format!("{v}").parse().map_err(serde::de::Error::custom),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default)]
pub struct MetaSection {
    pub theta_c: ThetaSetting,
    /// Tasks used by the calibration pass; 0 means all.
    pub calibration_tasks: usize,
    #[serde(flatten)]
    pub agents: MetaAgentConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct GatewaySection {
    /// Backbone catalog file; the built-in seed catalog when absent.
    pub catalog: Option<PathBuf>,
    /// Overrides every catalog endpoint.
    pub endpoint: Option<String>,
    pub api_key_env: String,
    pub timeout_secs: u64,
    pub retries: u32,
    pub backoff_ms: u64,
    /// Refuse single calls whose projected cost exceeds this.
    pub call_ceiling: Option<String>,
}

impl Default for GatewaySection {
    fn default() -> Self {
        let r = RetryPolicy::default();
        GatewaySection {
            catalog: None,
            endpoint: None,
            api_key_env: "OPENAI_API_KEY".into(),
            timeout_secs: 120,
            retries: r.retries,
            backoff_ms: r.backoff_ms,
            call_ceiling: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct SandboxSection {
    pub python: String,
    pub timeout_secs: u64,
}

impl Default for SandboxSection {
    fn default() -> Self {
        SandboxSection { python: "python3".into(), timeout_secs: 10 }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default)]
pub struct Config {
    pub seed: u64,
    pub jobs: usize,
    /// Directory of `.txt` documents for Search and Browser operators.
    pub docs: Option<PathBuf>,
    pub meta: MetaSection,
    pub gateway: GatewaySection,
    pub executor: ExecutorConfig,
    pub curate: CurateConfig,
    pub loss: LossConfig,
    pub sandbox: SandboxSection,
}

impl Config {
    /// Reads `path` (defaults when `None`), applies `MAS2_*` overrides, then checks.
    pub fn load(path: Option<&Path>) -> Result<Config, ConfigError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| ConfigError::Unreadable { path: p.display().to_string(), message: e.to_string() })?;
                let mut cfg: Config = toml::from_str(&text).map_err(|e| ConfigError::Unreadable { path: p.display().to_string(), message: e.to_string() })?;
                // Relative paths inside the file are relative to the file.
                let base = p.parent().unwrap_or(Path::new(""));
                cfg.docs = cfg.docs.map(|d| base.join(d));
                cfg.gateway.catalog = cfg.gateway.catalog.map(|c| base.join(c));
                cfg
            }
            None => Config::default(),
        };
        cfg.apply_env(|k| std::env::var(k).ok())?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        fn parse<T: std::str::FromStr>(key: &str, v: String) -> Result<T, ConfigError> {
            v.trim().parse().map_err(|_| ConfigError::Invalid(format!("{key}: cannot parse `{v}`")))
        }
        if let Some(v) = get("MAS2_SEED") {
            self.seed = parse("MAS2_SEED", v)?;
        }
        if let Some(v) = get("MAS2_JOBS") {
            self.jobs = parse("MAS2_JOBS", v)?;
        }
        if let Some(v) = get("MAS2_K") {
            self.meta.agents.k = parse("MAS2_K", v)?;
        }
        if let Some(v) = get("MAS2_N") {
            self.meta.agents.n = parse("MAS2_N", v)?;
        }
        if let Some(v) = get("MAS2_THETA_C") {
            self.meta.theta_c = v.parse().map_err(|e| ConfigError::Invalid(format!("MAS2_THETA_C: {e}")))?;
        }
        if let Some(v) = get("MAS2_MAX_RECTIFICATIONS") {
            self.meta.agents.max_rectifications = parse("MAS2_MAX_RECTIFICATIONS", v)?;
        }
        if let Some(v) = get("MAS2_META_BACKBONE") {
            self.meta.agents.generator_backbone = v.clone();
            self.meta.agents.implementer_backbone = v.clone();
            self.meta.agents.rectifier_backbone = v;
        }
        if let Some(v) = get("MAS2_BETA") {
            self.loss.beta = parse("MAS2_BETA", v)?;
        }
        if let Some(v) = get("MAS2_CATALOG") {
            self.gateway.catalog = Some(v.into());
        }
        if let Some(v) = get("MAS2_ENDPOINT") {
            self.gateway.endpoint = Some(v);
        }
        if let Some(v) = get("MAS2_API_KEY_ENV") {
            self.gateway.api_key_env = v;
        }
        if let Some(v) = get("MAS2_DOCS") {
            self.docs = Some(v.into());
        }
        Ok(())
    }

    pub fn check(&self) -> Result<(), ConfigError> {
        let mut probe = self.meta.agents.clone();
        probe.theta_c = match self.meta.theta_c {
            ThetaSetting::Absolute(m) => m,
            ThetaSetting::Calibrate { factor: 0 } => return Err(ConfigError::Invalid("calibration factor must be positive".into())),
            ThetaSetting::Calibrate { .. } => Money::from_picos(1),
        };
        probe.check().map_err(ConfigError::Invalid)?;
        self.loss.check().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.executor.step_ceiling == 0 {
            return Err(ConfigError::Invalid("executor.step_ceiling must be positive".into()));
        }
        if let Some(c) = &self.gateway.call_ceiling {
            c.parse::<Money>().map_err(|e| ConfigError::Invalid(format!("gateway.call_ceiling: {e}")))?;
        }
        Ok(())
    }

    pub fn jobs(&self) -> usize {
        if self.jobs == 0 {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        } else {
            self.jobs
        }
    }

    pub fn weighting(&self) -> Weighting {
        self.curate.weighting
    }

    pub fn retry(&self) -> RetryPolicy {
        RetryPolicy { retries: self.gateway.retries, backoff_ms: self.gateway.backoff_ms }
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs(self.gateway.timeout_secs)
    }
}
