use super::tree::{CollabTree, NodeId, NodeKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Children weighted by the number of trajectories below them, so every
    /// node's value is the mean over its trajectories.
    #[default]
    TrajectoryCount,
    /// Plain mean of child values.
    Unweighted,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PropagationError {
    #[error("terminal node {0} has no reward")]
    UnrewardedLeaf(NodeId),
    #[error("node {0} is a leaf but not a terminal trajectory")]
    NonTerminalLeaf(NodeId),
}

/// Fills `value` and `trajectories` on every node, bottom-up.
pub fn propagate_values<P>(tree: &mut CollabTree<P>, weighting: Weighting) -> Result<(), PropagationError> {
    let nodes = tree.nodes_mut();
    for i in (0..nodes.len()).rev() {
        if nodes[i].children.is_empty() {
            if nodes[i].kind != NodeKind::Terminal {
                return Err(PropagationError::NonTerminalLeaf(i));
            }
            let r = nodes[i].reward.ok_or(PropagationError::UnrewardedLeaf(i))?;
            nodes[i].value = Some(r.to_f64());
            nodes[i].trajectories = 1;
            continue;
        }
        let mut count = 0u64;
        let mut num = 0.0f64;
        let mut plain = 0.0f64;
        for &c in &nodes[i].children {
            let child = &nodes[c];
            let v = child.value.expect("children have larger ids");
            count += child.trajectories;
            num += child.trajectories as f64 * v;
            plain += v;
        }
        let value = match weighting {
            Weighting::TrajectoryCount => num / count as f64,
            Weighting::Unweighted => plain / nodes[i].children.len() as f64,
        };
        nodes[i].value = Some(value);
        nodes[i].trajectories = count;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cto::Exact;

    #[test]
    fn two_leaf_mean_and_chain() {
        let mut t = CollabTree::new("q", ());
        let g = t.add_child(0, NodeKind::Generator, ()).unwrap();
        let i1 = t.add_child(g, NodeKind::Implementer, ()).unwrap();
        let f1 = t.add_child(i1, NodeKind::Terminal, ()).unwrap();
        let i2 = t.add_child(g, NodeKind::Implementer, ()).unwrap();
        let r = t.add_child(i2, NodeKind::Rectifier, ()).unwrap();
        let f2 = t.add_child(r, NodeKind::Terminal, ()).unwrap();
        t.set_reward(f1, Exact::new(2, 1)).unwrap();
        assert_eq!(propagate_values(&mut t, Weighting::TrajectoryCount), Err(PropagationError::UnrewardedLeaf(f2)));
        t.set_reward(f2, Exact::ZERO).unwrap();
        propagate_values(&mut t, Weighting::TrajectoryCount).unwrap();
        assert_eq!(t.node(g).value, Some(1.0));
        assert_eq!(t.node(i2).value, Some(0.0));
        assert_eq!(t.node(r).value, Some(0.0));
        assert_eq!(t.node(0).trajectories, 2);
    }

    #[test]
    fn weighting_differs_on_unbalanced_subtrees() {
        let mut t = CollabTree::new("q", ());
        let g1 = t.add_child(0, NodeKind::Generator, ()).unwrap();
        let g2 = t.add_child(0, NodeKind::Generator, ()).unwrap();
        let i1 = t.add_child(g1, NodeKind::Implementer, ()).unwrap();
        for _ in 0..3 {
            let f = t.add_child(i1, NodeKind::Terminal, ()).unwrap();
            t.set_reward(f, Exact::ONE).unwrap();
        }
        let i2 = t.add_child(g2, NodeKind::Implementer, ()).unwrap();
        let f = t.add_child(i2, NodeKind::Terminal, ()).unwrap();
        t.set_reward(f, Exact::ZERO).unwrap();
        let mut u = t.clone();
        propagate_values(&mut t, Weighting::TrajectoryCount).unwrap();
        propagate_values(&mut u, Weighting::Unweighted).unwrap();
        assert_eq!(t.node(0).value, Some(0.75));
        assert_eq!(u.node(0).value, Some(0.5));
    }
}
