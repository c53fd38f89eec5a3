//! Undirected simple overlay graph and the connectivity primitives the
//! protocols are built on: articulation points, biconnectivity, node-disjoint
//! path pairs (unit-capacity flow on the node-split graph) and BFS hop counts.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flow::SplitFlow;

/// Identifier of an overlay node. Assigned by callers, never reused within a
/// graph's lifetime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u64);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u64> for NodeId {
    fn from(v: u64) -> Self {
        NodeId(v)
    }
}

/// Unordered node pair, stored with the smaller id first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    lo: NodeId,
    hi: NodeId,
}

impl Edge {
    pub fn new(u: impl Into<NodeId>, v: impl Into<NodeId>) -> Self {
        let (u, v) = (u.into(), v.into());
        if u <= v {
            Edge { lo: u, hi: v }
        } else {
            Edge { lo: v, hi: u }
        }
    }

    pub fn lo(&self) -> NodeId {
        self.lo
    }

    pub fn hi(&self) -> NodeId {
        self.hi
    }

    pub fn endpoints(&self) -> (NodeId, NodeId) {
        (self.lo, self.hi)
    }

    pub fn contains(&self, n: NodeId) -> bool {
        self.lo == n || self.hi == n
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.lo, self.hi)
    }
}

impl Serialize for Edge {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        [self.lo.0, self.hi.0].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Edge {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let [u, v] = <[u64; 2]>::deserialize(d)?;
        Ok(Edge::new(u, v))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EdgeAttr {
    pub carries_traffic: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("node {0} already exists")]
    DuplicateNode(NodeId),
    #[error("node id {0} was used before and cannot be reassigned")]
    ReusedNode(NodeId),
    #[error("node {0} does not exist")]
    MissingNode(NodeId),
    #[error("self-loop on node {0}")]
    SelfLoop(NodeId),
    #[error("edge {0} already exists")]
    DuplicateEdge(Edge),
    #[error("edge {0} does not exist")]
    MissingEdge(Edge),
    #[error("endpoints must differ, got {0} twice")]
    SameEndpoints(NodeId),
    #[error("graph invariant violated: {0}")]
    Corrupt(String),
    #[error("malformed graph JSON: {0}")]
    Json(String),
}

/// Undirected simple graph with a traffic flag per edge.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OverlayGraph {
    adjacency: BTreeMap<NodeId, BTreeSet<NodeId>>,
    edges: BTreeMap<Edge, EdgeAttr>,
    retired: BTreeSet<NodeId>,
}

impl OverlayGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn contains_node(&self, n: NodeId) -> bool {
        self.adjacency.contains_key(&n)
    }

    pub fn contains_edge(&self, u: NodeId, v: NodeId) -> bool {
        u != v && self.edges.contains_key(&Edge::new(u, v))
    }

    /// Live nodes in ascending order.
    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.adjacency.keys().copied()
    }

    /// Edges in ascending `(lo, hi)` order.
    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.edges.keys().copied()
    }

    pub fn edge_attr(&self, e: Edge) -> Option<EdgeAttr> {
        self.edges.get(&e).copied()
    }

    pub fn traffic_edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.edges
            .iter()
            .filter(|(_, a)| a.carries_traffic)
            .map(|(e, _)| *e)
    }

    /// Neighbors in ascending order; empty for unknown nodes.
    pub fn neighbors(&self, n: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.adjacency.get(&n).into_iter().flatten().copied()
    }

    pub fn degree(&self, n: NodeId) -> Option<usize> {
        self.adjacency.get(&n).map(BTreeSet::len)
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.values().map(BTreeSet::len).max().unwrap_or(0)
    }

    /// Largest id ever seen by this graph, live or removed.
    pub fn max_used_id(&self) -> Option<NodeId> {
        let live = self.adjacency.keys().next_back().copied();
        let dead = self.retired.iter().next_back().copied();
        live.max(dead)
    }

    pub fn add_node(&mut self, id: NodeId) -> Result<(), GraphError> {
        if self.adjacency.contains_key(&id) {
            return Err(GraphError::DuplicateNode(id));
        }
        if self.retired.contains(&id) {
            return Err(GraphError::ReusedNode(id));
        }
        self.adjacency.insert(id, BTreeSet::new());
        self.debug_validate();
        Ok(())
    }

    pub fn add_edge(&mut self, u: NodeId, v: NodeId) -> Result<Edge, GraphError> {
        if u == v {
            return Err(GraphError::SelfLoop(u));
        }
        for n in [u, v] {
            if !self.adjacency.contains_key(&n) {
                return Err(GraphError::MissingNode(n));
            }
        }
        let e = Edge::new(u, v);
        if self.edges.contains_key(&e) {
            return Err(GraphError::DuplicateEdge(e));
        }
        self.edges.insert(e, EdgeAttr::default());
        self.adjacency.get_mut(&u).expect("checked").insert(v);
        self.adjacency.get_mut(&v).expect("checked").insert(u);
        self.debug_validate();
        Ok(e)
    }

    /// Removes a node and every incident edge, returning the removed edges in
    /// ascending order. The id is retired.
    pub fn remove_node(&mut self, id: NodeId) -> Result<Vec<Edge>, GraphError> {
        let nbrs = self
            .adjacency
            .remove(&id)
            .ok_or(GraphError::MissingNode(id))?;
        let mut removed = Vec::with_capacity(nbrs.len());
        for n in nbrs {
            self.adjacency.get_mut(&n).expect("symmetric").remove(&id);
            let e = Edge::new(id, n);
            self.edges.remove(&e);
            removed.push(e);
        }
        self.retired.insert(id);
        self.debug_validate();
        Ok(removed)
    }

    pub fn remove_edge(&mut self, u: NodeId, v: NodeId) -> Result<EdgeAttr, GraphError> {
        let e = Edge::new(u, v);
        let attr = self.edges.remove(&e).ok_or(GraphError::MissingEdge(e))?;
        self.adjacency.get_mut(&u).expect("endpoint").remove(&v);
        self.adjacency.get_mut(&v).expect("endpoint").remove(&u);
        self.debug_validate();
        Ok(attr)
    }

    pub fn set_traffic(&mut self, e: Edge, carries_traffic: bool) -> Result<(), GraphError> {
        let attr = self.edges.get_mut(&e).ok_or(GraphError::MissingEdge(e))?;
        attr.carries_traffic = carries_traffic;
        Ok(())
    }

    pub fn clear_traffic(&mut self) {
        for attr in self.edges.values_mut() {
            attr.carries_traffic = false;
        }
    }

    /// Checks adjacency symmetry, the simple-graph constraints and that the
    /// edge attribute keys match the edge set.
    pub fn validate(&self) -> Result<(), GraphError> {
        let mut half_edges = 0usize;
        for (&u, nbrs) in &self.adjacency {
            for &v in nbrs {
                if u == v {
                    return Err(GraphError::Corrupt(format!("self-loop on {u}")));
                }
                if !self.adjacency.get(&v).is_some_and(|s| s.contains(&u)) {
                    return Err(GraphError::Corrupt(format!("asymmetric adjacency {u}->{v}")));
                }
                if !self.edges.contains_key(&Edge::new(u, v)) {
                    return Err(GraphError::Corrupt(format!("edge {u}-{v} has no attributes")));
                }
                half_edges += 1;
            }
        }
        if half_edges != 2 * self.edges.len() {
            return Err(GraphError::Corrupt("stale edge attributes".into()));
        }
        if let Some(n) = self.retired.iter().find(|n| self.adjacency.contains_key(n)) {
            return Err(GraphError::Corrupt(format!("retired id {n} is live")));
        }
        Ok(())
    }

    #[inline]
    fn debug_validate(&self) {
        #[cfg(debug_assertions)]
        if self.adjacency.len() <= 64 {
            if let Err(e) = self.validate() {
                panic!("{e}");
            }
        }
    }

    pub fn is_connected(&self) -> bool {
        match self.nodes().next() {
            None => true,
            Some(first) => self.reachable_from(first, None).len() == self.node_count(),
        }
    }

    /// Nodes reachable from `src` (inclusive), optionally pretending `skip` is absent.
    fn reachable_from(&self, src: NodeId, skip: Option<NodeId>) -> BTreeSet<NodeId> {
        let mut seen = BTreeSet::from([src]);
        let mut stack = vec![src];
        while let Some(u) = stack.pop() {
            for v in self.neighbors(u) {
                if Some(v) != skip && seen.insert(v) {
                    stack.push(v);
                }
            }
        }
        seen
    }

    /// Cut vertices, found with an iterative lowpoint DFS in O(V + E).
    pub fn articulation_points(&self) -> BTreeSet<NodeId> {
        let index: BTreeMap<NodeId, usize> =
            self.nodes().enumerate().map(|(i, n)| (n, i)).collect();
        let ids: Vec<NodeId> = self.nodes().collect();
        let adj: Vec<Vec<usize>> = ids
            .iter()
            .map(|n| self.neighbors(*n).map(|m| index[&m]).collect())
            .collect();

        const UNSEEN: usize = usize::MAX;
        let n = ids.len();
        let mut disc = vec![UNSEEN; n];
        let mut low = vec![0; n];
        let mut is_cut = vec![false; n];
        let mut timer = 0;

        for root in 0..n {
            if disc[root] != UNSEEN {
                continue;
            }
            disc[root] = timer;
            low[root] = timer;
            timer += 1;
            let mut root_children = 0;
            // (vertex, parent, next neighbor cursor)
            let mut stack: Vec<(usize, usize, usize)> = vec![(root, UNSEEN, 0)];
            while let Some(top) = stack.last_mut() {
                let (u, parent, cursor) = *top;
                if cursor < adj[u].len() {
                    top.2 += 1;
                    let v = adj[u][cursor];
                    if disc[v] == UNSEEN {
                        disc[v] = timer;
                        low[v] = timer;
                        timer += 1;
                        if u == root {
                            root_children += 1;
                        }
                        stack.push((v, u, 0));
                    } else if v != parent {
                        low[u] = low[u].min(disc[v]);
                    }
                } else {
                    stack.pop();
                    if parent != UNSEEN {
                        low[parent] = low[parent].min(low[u]);
                        if parent != root && low[u] >= disc[parent] {
                            is_cut[parent] = true;
                        }
                    }
                }
            }
            if root_children >= 2 {
                is_cut[root] = true;
            }
        }

        ids.into_iter()
            .zip(is_cut)
            .filter_map(|(id, cut)| cut.then_some(id))
            .collect()
    }

    /// Connected, at least three nodes, and no articulation point. A single
    /// node or a single edge is not biconnected.
    pub fn is_biconnected(&self) -> bool {
        self.node_count() >= 3 && self.is_connected() && self.articulation_points().is_empty()
    }

    /// Whether `u` and `v` are joined by two paths with disjoint interiors.
    /// A direct edge counts as one such path.
    pub fn has_two_node_disjoint_paths(&self, u: NodeId, v: NodeId) -> Result<bool, GraphError> {
        self.disjoint_flow(u, v, None).map(|f| f.value() >= 2)
    }

    /// Same as [`has_two_node_disjoint_paths`](Self::has_two_node_disjoint_paths)
    /// evaluated on the graph with `ignored` taken out.
    pub(crate) fn has_two_node_disjoint_paths_without(
        &self,
        u: NodeId,
        v: NodeId,
        ignored: Edge,
    ) -> Result<bool, GraphError> {
        self.disjoint_flow(u, v, Some(ignored)).map(|f| f.value() >= 2)
    }

    /// Two explicit internally disjoint `u`–`v` paths, or `None` when they do
    /// not exist.
    pub fn node_disjoint_path_pair(
        &self,
        u: NodeId,
        v: NodeId,
    ) -> Result<Option<PathPair>, GraphError> {
        let flow = self.disjoint_flow(u, v, None)?;
        if flow.value() < 2 {
            return Ok(None);
        }
        let mut paths = flow.decompose();
        paths.sort();
        let second = paths.pop().expect("flow value 2");
        let first = paths.pop().expect("flow value 2");
        Ok(Some(PathPair { first, second }))
    }

    fn disjoint_flow(
        &self,
        u: NodeId,
        v: NodeId,
        ignored: Option<Edge>,
    ) -> Result<SplitFlow, GraphError> {
        if u == v {
            return Err(GraphError::SameEndpoints(u));
        }
        for n in [u, v] {
            if !self.contains_node(n) {
                return Err(GraphError::MissingNode(n));
            }
        }
        let mut flow = SplitFlow::new(self, u, v, ignored);
        flow.augment_up_to(2);
        Ok(flow)
    }

    /// Unweighted hop counts from `src` to every other reachable node.
    pub fn bfs_hops(&self, src: NodeId) -> Result<BTreeMap<NodeId, usize>, GraphError> {
        if !self.contains_node(src) {
            return Err(GraphError::MissingNode(src));
        }
        let mut dist = BTreeMap::from([(src, 0usize)]);
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            let d = dist[&u];
            for v in self.neighbors(u) {
                dist.entry(v).or_insert_with(|| {
                    queue.push_back(v);
                    d + 1
                });
            }
        }
        dist.remove(&src);
        Ok(dist)
    }

    /// Components after deleting `removed`; used by tests and diagnostics.
    pub fn is_connected_without(&self, removed: NodeId) -> bool {
        match self.nodes().find(|&n| n != removed) {
            None => true,
            Some(start) => {
                let expected = self.node_count() - usize::from(self.contains_node(removed));
                self.reachable_from(start, Some(removed)).len() == expected
            }
        }
    }
}

/// Two paths between the same endpoints whose interiors share no node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathPair {
    pub first: Vec<NodeId>,
    pub second: Vec<NodeId>,
}

impl PathPair {
    /// Checks the pair against `g`: shared endpoints, simple paths over live
    /// edges, disjoint interiors.
    pub fn is_valid_in(&self, g: &OverlayGraph) -> bool {
        let (a, b) = (&self.first, &self.second);
        if a.len() < 2 || b.len() < 2 || a.first() != b.first() || a.last() != b.last() {
            return false;
        }
        if a == b {
            return false;
        }
        for p in [a, b] {
            let distinct: BTreeSet<_> = p.iter().collect();
            if distinct.len() != p.len() {
                return false;
            }
            if !p.windows(2).all(|w| g.contains_edge(w[0], w[1])) {
                return false;
            }
        }
        let inner_a: BTreeSet<_> = a[1..a.len() - 1].iter().collect();
        b[1..b.len() - 1].iter().all(|n| !inner_a.contains(n))
    }
}

/// Renders a path as `1-2-3`.
pub fn format_path(path: &[NodeId]) -> String {
    path.iter()
        .map(NodeId::to_string)
        .collect::<Vec<_>>()
        .join("-")
}

#[derive(Serialize, Deserialize)]
struct GraphWire {
    nodes: Vec<NodeId>,
    edges: Vec<Edge>,
    #[serde(default)]
    traffic: Vec<Edge>,
}

impl OverlayGraph {
    /// Canonical JSON: ascending nodes, `[lo, hi]` edges sorted
    /// lexicographically, and the traffic-carrying subset.
    pub fn to_json(&self) -> String {
        let wire = GraphWire {
            nodes: self.nodes().collect(),
            edges: self.edges().collect(),
            traffic: self.traffic_edges().collect(),
        };
        serde_json::to_string(&wire).expect("graph serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        let wire: GraphWire =
            serde_json::from_str(text).map_err(|e| GraphError::Json(e.to_string()))?;
        let mut g = OverlayGraph::new();
        for n in wire.nodes {
            g.add_node(n)?;
        }
        for e in wire.edges {
            g.add_edge(e.lo, e.hi)?;
        }
        for e in wire.traffic {
            g.set_traffic(e, true)?;
        }
        Ok(g)
    }

    /// Graphviz rendering; traffic edges are drawn bold and isolated nodes
    /// are listed on their own.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("graph G {\n");
        for n in self.nodes().filter(|n| self.degree(*n) == Some(0)) {
            out.push_str(&format!("  {n};\n"));
        }
        for (e, attr) in &self.edges {
            if attr.carries_traffic {
                out.push_str(&format!("  {} -- {} [style=bold];\n", e.lo, e.hi));
            } else {
                out.push_str(&format!("  {} -- {};\n", e.lo, e.hi));
            }
        }
        out.push_str("}\n");
        out
    }

    /// Builds a graph from an edge list, adding endpoints as needed.
    pub fn from_edges<I, T>(edges: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = (T, T)>,
        T: Into<NodeId>,
    {
        let mut g = OverlayGraph::new();
        for (u, v) in edges {
            let (u, v) = (u.into(), v.into());
            for n in [u, v] {
                if !g.contains_node(n) {
                    g.add_node(n)?;
                }
            }
            g.add_edge(u, v)?;
        }
        Ok(g)
    }
}
