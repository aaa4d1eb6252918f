//! Collaborative tree credit assignment.
//!
//! A decision tree per query records every generator, implementer and
//! rectifier choice that was sampled; leaves hold finished trajectories.
//! Leaf rewards are cost-normalised success indicators, internal nodes get
//! the mean reward of the trajectories below them, and sibling actions with
//! different values become weighted preference pairs.

mod prefs;
mod reward;
mod tree;
mod values;

pub use prefs::{extract_preferences, DecisionRole, DecisionView, NotPropagated, PreferenceTuple};
pub use reward::{assign_cohort_rewards, normalized_costs, trajectory_reward, Exact, RewardBreakdown, RewardError};
pub use tree::{CollabTree, Node, NodeId, NodeKind, TreeError};
pub use values::{propagate_values, PropagationError, Weighting};
