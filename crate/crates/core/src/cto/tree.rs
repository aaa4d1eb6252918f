use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::reward::Exact;

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    /// v_Q: the task query.
    Query,
    /// v_G: a sampled workflow template.
    Generator,
    /// v_I: an instantiation of its parent template.
    Implementer,
    /// v_R: a rectified workflow version.
    Rectifier,
    /// v_F: a finished trajectory.
    Terminal,
}

impl NodeKind {
    fn may_parent(self, child: NodeKind) -> bool {
        use NodeKind::*;
        matches!(
            (self, child),
            (Query, Generator) | (Generator, Implementer) | (Implementer, Rectifier | Terminal) | (Rectifier, Rectifier | Terminal)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node<P> {
    pub id: NodeId,
    pub kind: NodeKind,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    pub payload: P,
    /// Terminal nodes only.
    pub reward: Option<Exact>,
    /// V(v), once propagated.
    pub value: Option<f64>,
    /// |T(v)|: trajectories passing through this node, once propagated.
    pub trajectories: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TreeError {
    #[error("node {0} does not exist")]
    NoSuchNode(NodeId),
    #[error("a {child:?} node cannot hang below a {parent:?} node")]
    LayerOrder { parent: NodeKind, child: NodeKind },
    #[error("node {0} is a leaf but not a terminal trajectory")]
    NonTerminalLeaf(NodeId),
    #[error("node {0} has inconsistent parent/child links")]
    BrokenLink(NodeId),
    #[error("reward set on non-terminal node {0}")]
    NotTerminal(NodeId),
    #[error("tree has no root query node")]
    NoRoot,
}

/// Rooted tree stored as an arena; children always have larger ids than
/// their parent, so reverse id order is a valid bottom-up order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollabTree<P> {
    pub id: String,
    nodes: Vec<Node<P>>,
}

impl<P> CollabTree<P> {
    pub fn new(id: impl Into<String>, query: P) -> Self {
        let root = Node {
            id: 0,
            kind: NodeKind::Query,
            parent: None,
            children: Vec::new(),
            payload: query,
            reward: None,
            value: None,
            trajectories: 0,
        };
        CollabTree { id: id.into(), nodes: alloc::vec![root] }
    }

    pub const ROOT: NodeId = 0;

    pub fn add_child(&mut self, parent: NodeId, kind: NodeKind, payload: P) -> Result<NodeId, TreeError> {
        let p = self.nodes.get(parent).ok_or(TreeError::NoSuchNode(parent))?;
        if !p.kind.may_parent(kind) {
            return Err(TreeError::LayerOrder { parent: p.kind, child: kind });
        }
        let id = self.nodes.len();
        self.nodes.push(Node { id, kind, parent: Some(parent), children: Vec::new(), payload, reward: None, value: None, trajectories: 0 });
        self.nodes[parent].children.push(id);
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> &Node<P> {
        &self.nodes[id]
    }

    pub fn get(&self, id: NodeId) -> Option<&Node<P>> {
        self.nodes.get(id)
    }

    pub fn nodes(&self) -> &[Node<P>] {
        &self.nodes
    }

    pub(crate) fn nodes_mut(&mut self) -> &mut [Node<P>] {
        &mut self.nodes
    }

    pub fn leaves(&self) -> impl Iterator<Item = &Node<P>> {
        self.nodes.iter().filter(|n| n.children.is_empty() && n.kind == NodeKind::Terminal)
    }

    pub fn count(&self, kind: NodeKind) -> usize {
        self.nodes.iter().filter(|n| n.kind == kind).count()
    }

    /// Node ids from `id` up to the root, inclusive.
    pub fn ancestry(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = alloc::vec![id];
        let mut cur = id;
        while let Some(p) = self.nodes[cur].parent {
            out.push(p);
            cur = p;
        }
        out
    }

    pub fn set_reward(&mut self, leaf: NodeId, reward: Exact) -> Result<(), TreeError> {
        let node = self.nodes.get_mut(leaf).ok_or(TreeError::NoSuchNode(leaf))?;
        if node.kind != NodeKind::Terminal {
            return Err(TreeError::NotTerminal(leaf));
        }
        node.reward = Some(reward);
        Ok(())
    }

    pub fn map_payload<Q>(self, mut f: impl FnMut(P) -> Q) -> CollabTree<Q> {
        CollabTree {
            id: self.id,
            nodes: self
                .nodes
                .into_iter()
                .map(|n| Node {
                    id: n.id,
                    kind: n.kind,
                    parent: n.parent,
                    children: n.children,
                    payload: f(n.payload),
                    reward: n.reward,
                    value: n.value,
                    trajectories: n.trajectories,
                })
                .collect(),
        }
    }

    /// Rooted-tree shape, layer order and terminal leaves.
    pub fn check_invariants(&self) -> Result<(), TreeError> {
        let root = self.nodes.first().ok_or(TreeError::NoRoot)?;
        if root.kind != NodeKind::Query || root.parent.is_some() {
            return Err(TreeError::NoRoot);
        }
        for (i, n) in self.nodes.iter().enumerate() {
            if n.id != i {
                return Err(TreeError::BrokenLink(i));
            }
            if i > 0 {
                let p = n.parent.ok_or(TreeError::BrokenLink(i))?;
                if p >= i {
                    return Err(TreeError::BrokenLink(i));
                }
                let parent = &self.nodes[p];
                if !parent.children.contains(&i) {
                    return Err(TreeError::BrokenLink(i));
                }
                if !parent.kind.may_parent(n.kind) {
                    return Err(TreeError::LayerOrder { parent: parent.kind, child: n.kind });
                }
            }
            for &c in &n.children {
                if self.nodes.get(c).and_then(|c| c.parent) != Some(i) {
                    return Err(TreeError::BrokenLink(i));
                }
            }
            if n.children.is_empty() && n.kind != NodeKind::Terminal {
                return Err(TreeError::NonTerminalLeaf(i));
            }
        }
        Ok(())
    }
}
