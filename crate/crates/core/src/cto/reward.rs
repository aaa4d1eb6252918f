use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use num_rational::Ratio;
use num_traits::Zero;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::Money;

/// Exact non-negative rational. Serialised as `"numer/denom"` so archives
/// keep full precision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Exact(pub Ratio<u128>);

impl Exact {
    pub const ZERO: Exact = Exact(Ratio::new_raw(0, 1));
    pub const ONE: Exact = Exact(Ratio::new_raw(1, 1));

    pub fn new(numer: u128, denom: u128) -> Self {
        Exact(Ratio::new(numer, denom))
    }

    pub fn to_f64(self) -> f64 {
        let (n, d) = (*self.0.numer(), *self.0.denom());
        (n / d) as f64 + (n % d) as f64 / d as f64
    }

    pub fn is_zero(self) -> bool {
        self.0.is_zero()
    }
}

impl fmt::Display for Exact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.0.numer(), self.0.denom())
    }
}

impl FromStr for Exact {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let (n, d) = s.split_once('/').unwrap_or((s, "1"));
        let n: u128 = n.trim().parse().map_err(|_| format!("bad numerator in `{s}`"))?;
        let d: u128 = d.trim().parse().map_err(|_| format!("bad denominator in `{s}`"))?;
        if d == 0 {
            return Err(format!("zero denominator in `{s}`"));
        }
        Ok(Exact::new(n, d))
    }
}

impl Serialize for Exact {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Exact {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RewardError {
    #[error("cohort is empty")]
    EmptyCohort,
    #[error("trajectory cost {0} does not appear in its cohort")]
    NotInCohort(Money),
    #[error("successful trajectory has zero cost while the cohort mean is positive")]
    DegenerateCohort,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RewardBreakdown {
    pub reward: Exact,
    pub c_norm: Exact,
    /// Cohort mean cost was zero, so every member got C_norm = 1.
    pub zero_mean_cohort: bool,
}

/// C(τ)/mean(cohort) for every member, in cohort order.
pub fn normalized_costs(cohort: &[Money]) -> Result<(Vec<Exact>, bool), RewardError> {
    if cohort.is_empty() {
        return Err(RewardError::EmptyCohort);
    }
    let n = cohort.len() as u128;
    let total: u128 = cohort.iter().map(|c| c.picos() as u128).sum();
    if total == 0 {
        return Ok((alloc::vec![Exact::ONE; cohort.len()], true));
    }
    Ok((cohort.iter().map(|c| Exact::new(c.picos() as u128 * n, total)).collect(), false))
}

/// Success-gated, cost-normalised reward: 0 on failure, otherwise
/// mean(cohort)/C(τ). The cohort includes failed trajectories.
pub fn trajectory_reward(success: bool, cost: Money, cohort: &[Money]) -> Result<RewardBreakdown, RewardError> {
    if cohort.is_empty() {
        return Err(RewardError::EmptyCohort);
    }
    if !cohort.contains(&cost) {
        return Err(RewardError::NotInCohort(cost));
    }
    let n = cohort.len() as u128;
    let total: u128 = cohort.iter().map(|c| c.picos() as u128).sum();
    if total == 0 {
        let reward = if success { Exact::ONE } else { Exact::ZERO };
        return Ok(RewardBreakdown { reward, c_norm: Exact::ONE, zero_mean_cohort: true });
    }
    let c = cost.picos() as u128;
    if c == 0 {
        if success {
            return Err(RewardError::DegenerateCohort);
        }
        return Ok(RewardBreakdown { reward: Exact::ZERO, c_norm: Exact::ZERO, zero_mean_cohort: false });
    }
    let c_norm = Exact::new(c * n, total);
    let reward = if success { Exact::new(total, c * n) } else { Exact::ZERO };
    Ok(RewardBreakdown { reward, c_norm, zero_mean_cohort: false })
}

/// Rewards for a whole cohort of `(success, cost)` outcomes.
pub fn assign_cohort_rewards(outcomes: &[(bool, Money)]) -> Result<Vec<RewardBreakdown>, RewardError> {
    let cohort: Vec<Money> = outcomes.iter().map(|o| o.1).collect();
    outcomes.iter().map(|&(ok, c)| trajectory_reward(ok, c, &cohort)).collect()
}
