use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::tree::{CollabTree, NodeId, NodeKind};

/// Which meta-agent made the decision a preference is about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionRole {
    Generator,
    Implementer,
    Rectifier,
}

impl DecisionRole {
    pub const ALL: [DecisionRole; 3] = [DecisionRole::Generator, DecisionRole::Implementer, DecisionRole::Rectifier];

    fn of_action(kind: NodeKind) -> Option<DecisionRole> {
        match kind {
            NodeKind::Generator => Some(DecisionRole::Generator),
            NodeKind::Implementer => Some(DecisionRole::Implementer),
            NodeKind::Rectifier => Some(DecisionRole::Rectifier),
            NodeKind::Query | NodeKind::Terminal => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DecisionRole::Generator => "generator",
            DecisionRole::Implementer => "implementer",
            DecisionRole::Rectifier => "rectifier",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceTuple {
    pub tuple_id: String,
    pub tree_id: String,
    pub role: DecisionRole,
    /// Node whose children were compared.
    pub node: NodeId,
    pub win_node: NodeId,
    pub lose_node: NodeId,
    pub context: String,
    pub action_win: String,
    pub action_lose: String,
    pub delta_v: f64,
}

/// Serialises decision contexts and child actions for a payload type.
pub trait DecisionView<P> {
    fn context(&self, tree: &CollabTree<P>, node: NodeId) -> String;
    fn action(&self, tree: &CollabTree<P>, child: NodeId) -> String;
}

impl<P, C, A> DecisionView<P> for (C, A)
where
    C: Fn(&CollabTree<P>, NodeId) -> String,
    A: Fn(&CollabTree<P>, NodeId) -> String,
{
    fn context(&self, tree: &CollabTree<P>, node: NodeId) -> String {
        (self.0)(tree, node)
    }
    fn action(&self, tree: &CollabTree<P>, child: NodeId) -> String {
        (self.1)(tree, child)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("node {0} has no propagated value")]
pub struct NotPropagated(pub NodeId);

/// One tuple per sibling pair with a strictly positive value gap, oriented
/// winner first. Terminal children are outcomes, not meta-agent actions,
/// and take no part in comparisons. Output is grouped by role, then by node
/// id, then by sibling order.
pub fn extract_preferences<P>(tree: &CollabTree<P>, view: &impl DecisionView<P>) -> Result<Vec<PreferenceTuple>, NotPropagated> {
    let mut groups: [Vec<PreferenceTuple>; 3] = Default::default();
    for node in tree.nodes() {
        let actions: Vec<(NodeId, DecisionRole, f64)> = node
            .children
            .iter()
            .filter_map(|&c| {
                let child = tree.node(c);
                DecisionRole::of_action(child.kind).map(|role| child.value.map(|v| (c, role, v)).ok_or(NotPropagated(c)))
            })
            .collect::<Result<_, _>>()?;
        if actions.len() < 2 {
            continue;
        }
        let context = view.context(tree, node.id);
        for (a, &(ca, role, va)) in actions.iter().enumerate() {
            for &(cb, _, vb) in &actions[a + 1..] {
                let (win, lose, gap) = if va > vb {
                    (ca, cb, va - vb)
                } else if vb > va {
                    (cb, ca, vb - va)
                } else {
                    continue;
                };
                groups[role as usize].push(PreferenceTuple {
                    tuple_id: format!("{}/{}/{}>{}", tree.id, node.id, win, lose),
                    tree_id: tree.id.clone(),
                    role,
                    node: node.id,
                    win_node: win,
                    lose_node: lose,
                    context: context.clone(),
                    action_win: view.action(tree, win),
                    action_lose: view.action(tree, lose),
                    delta_v: gap,
                });
            }
        }
    }
    Ok(groups.into_iter().flatten().collect())
}
