//! Independent reference implementations used by the property suites.
#![allow(dead_code)]

use std::collections::BTreeMap;

use mas2_core::cto::{CollabTree, Exact, NodeId, NodeKind, PreferenceTuple};
use rand::Rng;

/// Random tree obeying the layer order, at most `max_nodes` nodes, with
/// rewards drawn from a small set so ties are common.
pub fn random_tree(rng: &mut impl Rng, max_nodes: usize) -> CollabTree<()> {
    let mut t = CollabTree::new(format!("tree-{}", rng.random::<u32>()), ());
    let rewards = [Exact::ZERO, Exact::new(1, 2), Exact::ONE, Exact::new(2, 1), Exact::new(2, 3), Exact::new(7, 5), Exact::new(13, 1)];
    let gens = rng.random_range(1..=6);
    for _ in 0..gens {
        if t.len() + 3 > max_nodes {
            break;
        }
        let g = t.add_child(0, NodeKind::Generator, ()).unwrap();
        let imps = rng.random_range(1..=4);
        for k in 0..imps {
            if k > 0 && t.len() + 2 > max_nodes {
                break;
            }
            let i = t.add_child(g, NodeKind::Implementer, ()).unwrap();
            grow_decisions(&mut t, i, 0, rng, max_nodes, &rewards);
        }
    }
    t
}

fn grow_decisions(t: &mut CollabTree<()>, at: NodeId, depth: usize, rng: &mut impl Rng, max_nodes: usize, rewards: &[Exact]) {
    let kids = rng.random_range(1..=3);
    for k in 0..kids {
        let room = max_nodes.saturating_sub(t.len());
        if k > 0 && room < 1 {
            break;
        }
        if depth < 3 && room >= 2 && rng.random_bool(0.35) {
            let r = t.add_child(at, NodeKind::Rectifier, ()).unwrap();
            grow_decisions(t, r, depth + 1, rng, max_nodes, rewards);
        } else {
            let f = t.add_child(at, NodeKind::Terminal, ()).unwrap();
            t.set_reward(f, rewards[rng.random_range(0..rewards.len())]).unwrap();
        }
    }
}

/// Every root-to-leaf path, found by walking down from the root.
pub fn all_paths<P>(t: &CollabTree<P>) -> Vec<Vec<NodeId>> {
    let mut out = Vec::new();
    let mut stack = vec![vec![0usize]];
    while let Some(path) = stack.pop() {
        let last = *path.last().unwrap();
        let node = t.node(last);
        if node.children.is_empty() {
            out.push(path);
        } else {
            for &c in &node.children {
                let mut p = path.clone();
                p.push(c);
                stack.push(p);
            }
        }
    }
    out
}

/// Mean reward over the paths through each node.
pub fn brute_force_values<P>(t: &CollabTree<P>) -> Vec<f64> {
    let paths = all_paths(t);
    (0..t.len())
        .map(|v| {
            let through: Vec<f64> = paths
                .iter()
                .filter(|p| p.contains(&v))
                .map(|p| t.node(*p.last().unwrap()).reward.unwrap().to_f64())
                .collect();
            through.iter().sum::<f64>() / through.len() as f64
        })
        .collect()
}

/// (node, win, lose, gap) for every ordered pair of sibling decisions
/// whose value gap is strictly positive.
pub fn exhaustive_pairs<P>(t: &CollabTree<P>) -> Vec<(NodeId, NodeId, NodeId, f64)> {
    let mut out = Vec::new();
    for n in t.nodes() {
        let decisions: Vec<NodeId> = n.children.iter().copied().filter(|&c| t.node(c).kind != NodeKind::Terminal).collect();
        for &a in &decisions {
            for &b in &decisions {
                if a == b {
                    continue;
                }
                let gap = t.node(a).value.unwrap() - t.node(b).value.unwrap();
                if gap > 0.0 {
                    out.push((n.id, a, b, gap));
                }
            }
        }
    }
    out.sort_by_key(|x| (x.0, x.1, x.2));
    out
}

pub fn tuple_keys(tuples: &[PreferenceTuple]) -> Vec<(NodeId, NodeId, NodeId, f64)> {
    let mut out: Vec<_> = tuples.iter().map(|t| (t.node, t.win_node, t.lose_node, t.delta_v)).collect();
    out.sort_by_key(|x| (x.0, x.1, x.2));
    out
}

/// Four templates, two instantiations each, one trajectory per
/// instantiation; only the branch at `winner` succeeds.
pub fn single_success_tree(winner: usize) -> CollabTree<String> {
    let mut t = CollabTree::new("single-success", "query".to_string());
    let mut leaves = Vec::new();
    for g in 0..4 {
        let gid = t.add_child(0, NodeKind::Generator, format!("template-{g}")).unwrap();
        for i in 0..2 {
            let iid = t.add_child(gid, NodeKind::Implementer, format!("assignment-{g}-{i}")).unwrap();
            let f = t.add_child(iid, NodeKind::Terminal, format!("outcome-{g}-{i}")).unwrap();
            leaves.push((g, f));
        }
    }
    let costs: BTreeMap<NodeId, u64> = leaves.iter().enumerate().map(|(k, &(_, f))| (f, 10 + k as u64)).collect();
    let cohort: Vec<mas2_core::Money> = costs.values().map(|&c| mas2_core::Money::from_picos(c)).collect();
    for (g, f) in leaves {
        let b = mas2_core::cto::trajectory_reward(g == winner, mas2_core::Money::from_picos(costs[&f]), &cohort).unwrap();
        t.set_reward(f, b.reward).unwrap();
    }
    t
}

/// JSON-level tokens: string literals, numbers/keywords, and punctuation.
pub fn json_tokens(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let b: Vec<char> = s.chars().collect();
    let mut i = 0;
    while i < b.len() {
        let c = b[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '"' {
            let start = i;
            i += 1;
            while b[i] != '"' {
                if b[i] == '\\' {
                    i += 1;
                }
                i += 1;
            }
            i += 1;
            out.push(b[start..i].iter().collect());
        } else if "{}[],:".contains(c) {
            out.push(c.to_string());
            i += 1;
        } else {
            let start = i;
            while i < b.len() && !b[i].is_whitespace() && !"{}[],:".contains(b[i]) {
                i += 1;
            }
            out.push(b[start..i].iter().collect());
        }
    }
    out
}

/// Token pairs that differ between two JSON texts, or `None` when the token
/// counts differ.
pub fn token_diff(a: &str, b: &str) -> Option<Vec<(String, String)>> {
    let (x, y) = (json_tokens(a), json_tokens(b));
    if x.len() != y.len() {
        return None;
    }
    Some(x.into_iter().zip(y).filter(|(p, q)| p != q).collect())
}
