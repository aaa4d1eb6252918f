//! Value-scaled preference loss over externally scored preference pairs.
//!
//! Only the loss value is computed; nothing here differentiates it.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::cto::PreferenceTuple;

/// Sequence log-probabilities of both actions under the trained and the
/// reference policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogProbRecord {
    pub tuple_id: String,
    pub lp_theta_win: f64,
    pub lp_theta_lose: f64,
    pub lp_ref_win: f64,
    pub lp_ref_lose: f64,
}

impl LogProbRecord {
    pub fn check(&self) -> Result<(), LossError> {
        for v in [self.lp_theta_win, self.lp_theta_lose, self.lp_ref_win, self.lp_ref_lose] {
            if !v.is_finite() || v > 0.0 {
                return Err(LossError::InvalidRecord { tuple_id: self.tuple_id.clone(), value: v });
            }
        }
        Ok(())
    }

    /// Difference of the two log-ratios, before scaling by beta.
    pub fn margin(&self) -> f64 {
        (self.lp_theta_win - self.lp_ref_win) - (self.lp_theta_lose - self.lp_ref_lose)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reduction {
    #[default]
    Mean,
    Sum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolWeighting {
    /// Every tuple counts once.
    #[default]
    PerTuple,
    /// Tuples are averaged within their tree first, so each tree counts once.
    PerTree,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub beta: f64,
    #[serde(default)]
    pub reduction: Reduction,
    #[serde(default)]
    pub weighting: PoolWeighting,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig { beta: 0.1, reduction: Reduction::Mean, weighting: PoolWeighting::PerTuple }
    }
}

impl LossConfig {
    pub fn check(&self) -> Result<(), LossError> {
        if self.beta.is_finite() && self.beta > 0.0 {
            Ok(())
        } else {
            Err(LossError::InvalidBeta(self.beta))
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LossError {
    #[error("beta must be a positive finite number, got {0}")]
    InvalidBeta(f64),
    #[error("record for `{record}` does not match tuple `{tuple}`")]
    MismatchedRecord { tuple: String, record: String },
    #[error("no log-probability record for tuple `{0}`")]
    MissingRecord(String),
    #[error("log-probability {value} for `{tuple_id}` is not a finite non-positive number")]
    InvalidRecord { tuple_id: String, value: f64 },
    #[error("tuple `{tuple_id}` has non-positive value gap {delta_v}")]
    InvalidTuple { tuple_id: String, delta_v: f64 },
    #[error("the preference dataset is empty")]
    EmptyDataset,
}

/// log(1 + e^x) without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + libm::log1p(libm::exp(-x))
    } else {
        libm::log1p(libm::exp(x))
    }
}

/// ΔV · −log σ(β · margin), written as ΔV · softplus(−β · margin).
pub fn per_tuple_loss(t: &PreferenceTuple, lp: &LogProbRecord, cfg: &LossConfig) -> Result<f64, LossError> {
    cfg.check()?;
    if lp.tuple_id != t.tuple_id {
        return Err(LossError::MismatchedRecord { tuple: t.tuple_id.clone(), record: lp.tuple_id.clone() });
    }
    if !(t.delta_v > 0.0 && t.delta_v.is_finite()) {
        return Err(LossError::InvalidTuple { tuple_id: t.tuple_id.clone(), delta_v: t.delta_v });
    }
    lp.check()?;
    Ok(scaled_loss(t.delta_v, lp.margin(), cfg.beta))
}

/// The bare formula, for callers holding raw numbers.
pub fn scaled_loss(delta_v: f64, margin: f64, beta: f64) -> f64 {
    delta_v * softplus(-beta * margin)
}

/// Summation with O(log n) error growth, independent of how the input
/// was chunked for parallel evaluation.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub loss: f64,
    pub count: usize,
    pub trees: usize,
    pub delta_v_min: f64,
    pub delta_v_max: f64,
    pub delta_v_mean: f64,
    pub config: LossConfig,
}

/// Reduced loss over a dataset. Records are looked up by tuple id.
pub fn dataset_loss(tuples: &[PreferenceTuple], records: &[LogProbRecord], cfg: &LossConfig) -> Result<LossReport, LossError> {
    cfg.check()?;
    if tuples.is_empty() {
        return Err(LossError::EmptyDataset);
    }
    let by_id: BTreeMap<&str, &LogProbRecord> = records.iter().map(|r| (r.tuple_id.as_str(), r)).collect();
    let mut losses = Vec::with_capacity(tuples.len());
    for t in tuples {
        let lp = by_id.get(t.tuple_id.as_str()).ok_or_else(|| LossError::MissingRecord(t.tuple_id.clone()))?;
        losses.push(per_tuple_loss(t, lp, cfg)?);
    }

    let mut per_tree: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for (t, l) in tuples.iter().zip(&losses) {
        per_tree.entry(t.tree_id.as_str()).or_default().push(*l);
    }
    let (total, units) = match cfg.weighting {
        PoolWeighting::PerTuple => (pairwise_sum(&losses), losses.len()),
        PoolWeighting::PerTree => {
            let means: Vec<f64> = per_tree.values().map(|v| pairwise_sum(v) / v.len() as f64).collect();
            (pairwise_sum(&means), means.len())
        }
    };
    let loss = match cfg.reduction {
        Reduction::Sum => total,
        Reduction::Mean => total / units as f64,
    };

    let dvs: Vec<f64> = tuples.iter().map(|t| t.delta_v).collect();
    Ok(LossReport {
        loss,
        count: tuples.len(),
        trees: per_tree.len(),
        delta_v_min: dvs.iter().copied().fold(f64::INFINITY, f64::min),
        delta_v_max: dvs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        delta_v_mean: pairwise_sum(&dvs) / dvs.len() as f64,
        config: *cfg,
    })
}
