//! The rectifier trigger.

use serde::{Deserialize, Serialize};

use crate::money::Money;

/// O(s): whether the running system has hit an explicit failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum OutcomeFlag {
    #[default]
    Nominal,
    Failure,
}

/// Fires when cumulative cost strictly exceeds the budget or the state is
/// flagged as failed.
pub fn should_rectify(cost: Money, flag: OutcomeFlag, budget: Money) -> bool {
    cost > budget || flag == OutcomeFlag::Failure
}
