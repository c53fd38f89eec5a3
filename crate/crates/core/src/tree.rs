//! Distribution-tree augmentation: chaining consecutive leaves, or linking
//! every node to its grandparent with a sibling fallback under the root.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Edge, GraphError, NodeId, OverlayGraph};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeError {
    #[error("a tree needs at least {min} level(s), got {got}")]
    Levels { min: u32, got: u32 },
    #[error("node {0} is already in the tree")]
    DuplicateNode(NodeId),
    #[error("node {0} is not in the tree")]
    MissingNode(NodeId),
    #[error("tree is not connected to root {0}")]
    Detached(NodeId),
    #[error("augmentation edge {0} duplicates an existing link")]
    DuplicateLink(Edge),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("malformed tree JSON: {0}")]
    Json(String),
}

/// Rooted tree with ordered children.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RootedTree {
    root: NodeId,
    parent: BTreeMap<NodeId, NodeId>,
    children: BTreeMap<NodeId, Vec<NodeId>>,
}

impl RootedTree {
    pub fn new(root: NodeId) -> Self {
        RootedTree {
            root,
            parent: BTreeMap::new(),
            children: BTreeMap::from([(root, Vec::new())]),
        }
    }

    /// Appends `child` as the right-most child of `parent`.
    pub fn add_child(&mut self, parent: NodeId, child: NodeId) -> Result<(), TreeError> {
        if !self.children.contains_key(&parent) {
            return Err(TreeError::MissingNode(parent));
        }
        if self.children.contains_key(&child) {
            return Err(TreeError::DuplicateNode(child));
        }
        self.children.get_mut(&parent).expect("checked").push(child);
        self.children.insert(child, Vec::new());
        self.parent.insert(child, parent);
        Ok(())
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn len(&self) -> usize {
        self.children.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, n: NodeId) -> bool {
        self.children.contains_key(&n)
    }

    pub fn parent(&self, n: NodeId) -> Option<NodeId> {
        self.parent.get(&n).copied()
    }

    pub fn children(&self, n: NodeId) -> &[NodeId] {
        self.children.get(&n).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.children.keys().copied()
    }

    pub fn tree_edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.parent.iter().map(|(&c, &p)| Edge::new(c, p))
    }

    /// Nodes in depth-first order, children visited left to right.
    pub fn preorder(&self) -> Vec<NodeId> {
        let mut order = Vec::with_capacity(self.len());
        let mut stack = vec![self.root];
        while let Some(n) = stack.pop() {
            order.push(n);
            stack.extend(self.children(n).iter().rev());
        }
        order
    }

    /// Non-root nodes without children, left to right.
    pub fn leaves(&self) -> Vec<NodeId> {
        self.preorder()
            .into_iter()
            .filter(|&n| n != self.root && self.children(n).is_empty())
            .collect()
    }

    pub fn grandparent(&self, n: NodeId) -> Option<NodeId> {
        self.parent(n).and_then(|p| self.parent(p))
    }
}

/// Complete binary tree with `2^levels - 1` nodes numbered breadth-first from 1.
pub fn build_full_binary_tree(levels: u32) -> Result<RootedTree, TreeError> {
    if !(1..=40).contains(&levels) {
        return Err(TreeError::Levels { min: 1, got: levels });
    }
    let n = (1u64 << levels) - 1;
    let mut t = RootedTree::new(NodeId(1));
    for child in 2..=n {
        t.add_child(NodeId(child / 2), NodeId(child))?;
    }
    Ok(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Approach {
    LeafChain,
    Grandparent,
}

impl Approach {
    pub fn label(&self) -> &'static str {
        match self {
            Approach::LeafChain => "leaf-chain",
            Approach::Grandparent => "grandparent",
        }
    }
}

impl fmt::Display for Approach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Approach {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "leaf-chain" => Ok(Approach::LeafChain),
            "grandparent" => Ok(Approach::Grandparent),
            other => Err(format!("unknown approach `{other}` (expected leaf-chain or grandparent)")),
        }
    }
}

impl Serialize for Approach {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for Approach {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Links added to a tree by one approach, sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Augmentation {
    pub approach: Approach,
    #[serde(rename = "added")]
    pub added_edges: Vec<Edge>,
}

impl Augmentation {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("augmentation serializes")
    }
}

pub fn augment(t: &RootedTree, approach: Approach) -> Augmentation {
    match approach {
        Approach::LeafChain => leaf_chain_augment(t),
        Approach::Grandparent => grandparent_augment(t),
    }
}

/// Links every pair of consecutive leaves: an open chain of `L - 1` links.
pub fn leaf_chain_augment(t: &RootedTree) -> Augmentation {
    let mut added: Vec<Edge> = t
        .leaves()
        .windows(2)
        .map(|w| Edge::new(w[0], w[1]))
        .collect();
    added.sort_unstable();
    Augmentation {
        approach: Approach::LeafChain,
        added_edges: added,
    }
}

/// Links every node of depth two or more to its grandparent. The root's
/// children are matched pairwise left to right instead; an odd last child
/// links to its left neighbor.
pub fn grandparent_augment(t: &RootedTree) -> Augmentation {
    let mut added: BTreeSet<Edge> = t
        .nodes()
        .filter_map(|n| t.grandparent(n).map(|g| Edge::new(n, g)))
        .collect();
    let top = t.children(t.root());
    for pair in top.chunks(2) {
        match *pair {
            [a, b] => {
                added.insert(Edge::new(a, b));
            }
            [last] if top.len() > 1 => {
                added.insert(Edge::new(top[top.len() - 2], last));
            }
            _ => {}
        }
    }
    Augmentation {
        approach: Approach::Grandparent,
        added_edges: added.into_iter().collect(),
    }
}

/// Tree edges plus the augmentation's links as one overlay graph.
pub fn tree_to_graph(
    t: &RootedTree,
    aug: Option<&Augmentation>,
) -> Result<OverlayGraph, TreeError> {
    let mut g = OverlayGraph::new();
    for n in t.nodes() {
        g.add_node(n)?;
    }
    for e in t.tree_edges() {
        g.add_edge(e.lo(), e.hi())?;
    }
    for &e in aug.map(|a| a.added_edges.as_slice()).unwrap_or(&[]) {
        for end in [e.lo(), e.hi()] {
            if !t.contains(end) {
                return Err(TreeError::MissingNode(end));
            }
        }
        match g.add_edge(e.lo(), e.hi()) {
            Ok(_) => {}
            Err(GraphError::DuplicateEdge(e)) => return Err(TreeError::DuplicateLink(e)),
            Err(other) => return Err(other.into()),
        }
    }
    Ok(g)
}

/// Closed-form link count for a full binary tree of `levels` levels:
/// `(N-1)/2` for leaf chaining and `N-2` for grandparent links.
pub fn additional_links_count(levels: u32, approach: Approach) -> Result<u64, TreeError> {
    if !(2..=40).contains(&levels) {
        return Err(TreeError::Levels { min: 2, got: levels });
    }
    let n = (1u64 << levels) - 1;
    Ok(match approach {
        Approach::LeafChain => (n - 1) / 2,
        Approach::Grandparent => n - 2,
    })
}

/// Grandparent links per leaf-chain link.
pub fn link_ratio(levels: u32) -> Result<Ratio<u64>, TreeError> {
    Ok(Ratio::new(
        additional_links_count(levels, Approach::Grandparent)?,
        additional_links_count(levels, Approach::LeafChain)?,
    ))
}

#[derive(Serialize, Deserialize)]
struct TreeWire {
    root: NodeId,
    #[serde(default)]
    children: BTreeMap<NodeId, Vec<NodeId>>,
}

impl RootedTree {
    /// `{"root":1,"children":{"1":[2,3],...}}`; only nodes with children
    /// are listed.
    pub fn to_json(&self) -> String {
        let wire = TreeWire {
            root: self.root,
            children: self
                .children
                .iter()
                .filter(|(_, c)| !c.is_empty())
                .map(|(p, c)| (*p, c.clone()))
                .collect(),
        };
        serde_json::to_string(&wire).expect("tree serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, TreeError> {
        let wire: TreeWire =
            serde_json::from_str(text).map_err(|e| TreeError::Json(e.to_string()))?;
        let mut pending = wire.children;
        let mut t = RootedTree::new(wire.root);
        let mut frontier = vec![wire.root];
        while let Some(p) = frontier.pop() {
            for c in pending.remove(&p).unwrap_or_default() {
                t.add_child(p, c)?;
                frontier.push(c);
            }
        }
        match pending.into_keys().next() {
            Some(orphan) => Err(TreeError::Detached(orphan)),
            None => Ok(t),
        }
    }
}
