//! Filtration scenario trees over a finite probability space.
//!
//! Nodes at depth `t` are the cells of the time-`t` partition; the root is
//! the trivial cell and the leaves are in bijection with the atoms of the
//! space. Each node stores the contiguous range of atoms below it, so
//! conditional expectations are plain range sums.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::space::{same_space, FiniteProbSpace, VectorMeasure};

/// Tolerance on `node probability - sum(children)` accepted at construction.
pub const TREE_PROB_TOL: f64 = 1e-10;

/// Raw node description used to build a tree.
#[derive(Debug, Clone)]
pub struct NodeInput {
    /// Caller-chosen identifier, unique within the tree.
    pub id: u64,
    /// Identifier of the parent; `None` exactly for the root.
    pub parent: Option<u64>,
    /// Probability mass of the cell.
    pub prob: f64,
}

/// A node of a built tree. Indices refer to `ScenarioTree::node`.
#[derive(Debug, Clone)]
pub struct TreeNode {
    /// Caller-chosen identifier from the input.
    pub id: u64,
    /// Internal index of the parent node.
    pub parent: Option<usize>,
    /// Internal indices of children, ordered by identifier.
    pub children: Vec<usize>,
    /// Distance from the root.
    pub depth: usize,
    /// Probability mass of the cell.
    pub prob: f64,
    /// Atoms below this node: half-open range `[start, end)`.
    pub leaf_range: (usize, usize),
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

/// Scenario tree with all leaves at a common depth `T`.
#[derive(Debug, Clone)]
pub struct ScenarioTree {
    space: Arc<FiniteProbSpace>,
    nodes: Vec<TreeNode>,
    root: usize,
    depth: usize,
    /// Node indices grouped by depth, each group ordered by identifier.
    levels: Vec<Vec<usize>>,
    /// Internal node index of the leaf carrying atom `k`.
    leaf_of_atom: Vec<usize>,
}

impl ScenarioTree {
    /// Builds a tree from raw nodes and derives its probability space.
    ///
    /// Rules: exactly one root; the root has probability 1 within 1e-12;
    /// every interior node's probability equals the sum over its children
    /// within 1e-10; all leaves sit at the same depth. Atoms are assigned to
    /// leaves in depth-first order with children visited in identifier
    /// order, so the k-th leaf in that order carries atom k.
    pub fn from_nodes(inputs: &[NodeInput]) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::invalid("scenario tree needs at least one node"));
        }
        let mut by_id: BTreeMap<u64, usize> = BTreeMap::new();
        for (pos, node) in inputs.iter().enumerate() {
            if by_id.insert(node.id, pos).is_some() {
                return Err(Error::invalid(format!("duplicate node id {}", node.id)));
            }
        }

        let mut roots = Vec::new();
        let mut children_ids: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
        for node in inputs {
            match node.parent {
                None => roots.push(node.id),
                Some(pid) => {
                    if !by_id.contains_key(&pid) {
                        return Err(Error::invalid(format!(
                            "node {} references missing parent {pid}",
                            node.id
                        )));
                    }
                    if pid == node.id {
                        return Err(Error::invalid(format!("node {} is its own parent", node.id)));
                    }
                    children_ids.entry(pid).or_default().push(node.id);
                }
            }
        }
        if roots.len() != 1 {
            return Err(Error::invalid(format!(
                "expected exactly one root, found {}",
                roots.len()
            )));
        }

        // Depth-first walk from the root, children in identifier order.
        // Assigns internal indices in visit order and atoms to leaves.
        let mut nodes: Vec<TreeNode> = Vec::with_capacity(inputs.len());
        let mut index_of_id: BTreeMap<u64, usize> = BTreeMap::new();
        let mut leaf_probs: Vec<f64> = Vec::new();
        let mut leaf_of_atom: Vec<usize> = Vec::new();

        // Iterative DFS carrying (id, parent internal index, depth).
        let mut stack: Vec<(u64, Option<usize>, usize)> = vec![(roots[0], None, 0)];
        while let Some((id, parent_idx, depth)) = stack.pop() {
            let input = &inputs[by_id[&id]];
            if !input.prob.is_finite() || input.prob <= 0.0 {
                return Err(Error::invalid(format!(
                    "node {id} has probability {}; node probabilities must be finite and strictly positive",
                    input.prob
                )));
            }
            let idx = nodes.len();
            index_of_id.insert(id, idx);
            if let Some(p) = parent_idx {
                nodes[p].children.push(idx);
            }
            nodes.push(TreeNode {
                id,
                parent: parent_idx,
                children: Vec::new(),
                depth,
                prob: input.prob,
                leaf_range: (0, 0),
            });
            match children_ids.get(&id) {
                None => {
                    let atom = leaf_probs.len();
                    leaf_probs.push(input.prob);
                    leaf_of_atom.push(idx);
                    nodes[idx].leaf_range = (atom, atom + 1);
                }
                Some(kids) => {
                    // Reverse push keeps identifier order on pop.
                    let mut sorted = kids.clone();
                    sorted.sort_unstable();
                    for &kid in sorted.iter().rev() {
                        stack.push((kid, Some(idx), depth + 1));
                    }
                }
            }
        }
        if nodes.len() != inputs.len() {
            return Err(Error::invalid(
                "tree contains nodes unreachable from the root",
            ));
        }

        // Leaf ranges bottom-up; children were created after parents, so a
        // reverse sweep sees every child before its parent.
        for idx in (0..nodes.len()).rev() {
            if nodes[idx].is_leaf() {
                continue;
            }
            let first = nodes[nodes[idx].children[0]].leaf_range.0;
            let last = nodes[*nodes[idx].children.last().unwrap()].leaf_range.1;
            nodes[idx].leaf_range = (first, last);
            let child_sum: f64 = nodes[idx]
                .children
                .iter()
                .map(|&c| nodes[c].prob)
                .sum();
            if (child_sum - nodes[idx].prob).abs() > TREE_PROB_TOL {
                return Err(Error::invalid(format!(
                    "node {} has probability {} but its children sum to {child_sum}",
                    nodes[idx].id, nodes[idx].prob
                )));
            }
        }

        let depth = nodes.iter().map(|n| n.depth).max().unwrap_or(0);
        for node in &nodes {
            if node.is_leaf() && node.depth != depth {
                return Err(Error::invalid(format!(
                    "leaf {} sits at depth {}, expected every leaf at depth {depth}",
                    node.id, node.depth
                )));
            }
        }

        let space = FiniteProbSpace::new(leaf_probs)?;

        let mut levels = vec![Vec::new(); depth + 1];
        for (idx, node) in nodes.iter().enumerate() {
            levels[node.depth].push(idx);
        }
        for level in &mut levels {
            level.sort_by_key(|&idx| nodes[idx].id);
        }

        Ok(ScenarioTree {
            space,
            nodes,
            root: 0,
            depth,
            levels,
            leaf_of_atom,
        })
    }

    /// One-period tree: a root over one leaf per atom.
    pub fn single_period(space: &Arc<FiniteProbSpace>) -> Result<Self> {
        let mut inputs = vec![NodeInput {
            id: 0,
            parent: None,
            prob: 1.0,
        }];
        for k in 0..space.len() {
            inputs.push(NodeInput {
                id: (k + 1) as u64,
                parent: Some(0),
                prob: space.prob(k),
            });
        }
        Self::from_nodes(&inputs)
    }

    /// Depth `T` of the tree.
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn space(&self) -> &Arc<FiniteProbSpace> {
        &self.space
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn node(&self, idx: usize) -> &TreeNode {
        &self.nodes[idx]
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    /// Node indices at depth `t`, ordered by identifier.
    pub fn level(&self, t: usize) -> &[usize] {
        &self.levels[t]
    }

    /// Internal index of the leaf carrying atom `k`.
    pub fn leaf_of_atom(&self, k: usize) -> usize {
        self.leaf_of_atom[k]
    }

    /// Node indices on the path root -> leaf of atom `k`, root first.
    pub fn path_to_atom(&self, k: usize) -> Vec<usize> {
        let mut path = Vec::with_capacity(self.depth + 1);
        let mut cur = Some(self.leaf_of_atom[k]);
        while let Some(idx) = cur {
            path.push(idx);
            cur = self.nodes[idx].parent;
        }
        path.reverse();
        path
    }

    /// Conditional density `E[dQ/dP | cell of node]`, one entry per measure
    /// component: range sum of `p * density` divided by the cell mass.
    pub fn node_conditional_expect(&self, q: &VectorMeasure, node_idx: usize) -> Result<Vec<f64>> {
        if node_idx >= self.nodes.len() {
            return Err(Error::dimension(format!(
                "node index {node_idx} out of range ({} nodes)",
                self.nodes.len()
            )));
        }
        if !same_space(&self.space, q.space()) {
            return Err(Error::dimension(
                "measure lives on a different space than the tree",
            ));
        }
        let node = &self.nodes[node_idx];
        let (a, b) = node.leaf_range;
        let mut out = vec![0.0; q.dim()];
        for k in a..b {
            let pk = self.space.prob(k);
            for (i, o) in out.iter_mut().enumerate() {
                *o += pk * q.density(k, i);
            }
        }
        for o in out.iter_mut() {
            *o /= node.prob;
        }
        Ok(out)
    }
}
