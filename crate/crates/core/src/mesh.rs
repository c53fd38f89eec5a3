//! Least-degree mesh construction, redundant-link pruning and ring repair
//! after a node failure.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::{Edge, GraphError, NodeId, OverlayGraph};

/// Above this many neighbors the repair ring is built greedily instead of by
/// searching every cyclic order.
pub const EXHAUSTIVE_RING_LIMIT: usize = 8;

/// How a join picks between equally loaded candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieBreakPolicy {
    #[default]
    LowestId,
    /// Uniform among tied candidates. The generator is derived from the seed
    /// and the joining id, so a choice depends only on its inputs.
    SeededRandom { seed: u64 },
}

impl TieBreakPolicy {
    pub fn label(&self) -> &'static str {
        match self {
            TieBreakPolicy::LowestId => "lowest-id",
            TieBreakPolicy::SeededRandom { .. } => "random",
        }
    }
}

impl fmt::Display for TieBreakPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Policy kind as written on the command line and in script headers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    LowestId,
    Random,
}

impl PolicyKind {
    pub fn with_seed(self, seed: u64) -> TieBreakPolicy {
        match self {
            PolicyKind::LowestId => TieBreakPolicy::LowestId,
            PolicyKind::Random => TieBreakPolicy::SeededRandom { seed },
        }
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lowest-id" => Ok(PolicyKind::LowestId),
            "random" | "seeded-random" => Ok(PolicyKind::Random),
            other => Err(format!("unknown policy `{other}` (expected lowest-id or random)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MeshError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("a mesh of {live} nodes needs {expected} join target(s), got {got}")]
    TargetCount { live: usize, expected: usize, got: usize },
    #[error("join target {0} is not a live node")]
    DeadTarget(NodeId),
}

/// Nodes a newcomer linked to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JoinOutcome {
    pub attached_to: BTreeSet<NodeId>,
}

/// Edges changed by a failure and its ring repair.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RepairOutcome {
    pub removed: Vec<Edge>,
    pub added: Vec<Edge>,
}

fn expected_targets(live: usize) -> usize {
    live.min(2)
}

/// Attaches `new_id` to the two live nodes of least degree (fewer while the
/// mesh has under two nodes).
pub fn join(
    g: &mut OverlayGraph,
    new_id: NodeId,
    policy: TieBreakPolicy,
) -> Result<JoinOutcome, MeshError> {
    let targets = choose_targets(g, new_id, policy);
    attach(g, new_id, &targets)
}

/// Attaches `new_id` to caller-chosen targets; the target count must match
/// what [`join`] would use.
pub fn join_explicit(
    g: &mut OverlayGraph,
    new_id: NodeId,
    targets: &BTreeSet<NodeId>,
) -> Result<JoinOutcome, MeshError> {
    let expected = expected_targets(g.node_count());
    if targets.len() != expected {
        return Err(MeshError::TargetCount {
            live: g.node_count(),
            expected,
            got: targets.len(),
        });
    }
    if let Some(&dead) = targets.iter().find(|t| !g.contains_node(**t)) {
        return Err(MeshError::DeadTarget(dead));
    }
    let targets: Vec<NodeId> = targets.iter().copied().collect();
    attach(g, new_id, &targets)
}

fn attach(
    g: &mut OverlayGraph,
    new_id: NodeId,
    targets: &[NodeId],
) -> Result<JoinOutcome, MeshError> {
    g.add_node(new_id)?;
    for &t in targets {
        g.add_edge(new_id, t)?;
    }
    Ok(JoinOutcome {
        attached_to: targets.iter().copied().collect(),
    })
}

fn choose_targets(g: &OverlayGraph, new_id: NodeId, policy: TieBreakPolicy) -> Vec<NodeId> {
    let want = expected_targets(g.node_count());
    let mut ranked: Vec<(usize, NodeId)> = g
        .nodes()
        .map(|n| (g.degree(n).expect("live"), n))
        .collect();
    ranked.sort_unstable();
    match policy {
        TieBreakPolicy::LowestId => ranked.iter().take(want).map(|&(_, n)| n).collect(),
        TieBreakPolicy::SeededRandom { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ new_id.0.wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let mut picked = Vec::with_capacity(want);
            let mut rest = ranked.as_slice();
            while picked.len() < want {
                let degree = rest[0].0;
                let tied = rest.iter().take_while(|(d, _)| *d == degree).count();
                let group: Vec<NodeId> = rest[..tied].iter().map(|&(_, n)| n).collect();
                let take = (want - picked.len()).min(tied);
                picked.extend(group.choose_multiple(&mut rng, take).copied());
                rest = &rest[tied..];
            }
            picked.sort_unstable();
            picked
        }
    }
}

/// Whether `u` and `v` keep two node-disjoint paths once the edge between
/// them is gone.
pub fn is_redundant(g: &OverlayGraph, u: NodeId, v: NodeId) -> Result<bool, MeshError> {
    let e = Edge::new(u, v);
    if !g.contains_edge(u, v) {
        return Err(GraphError::MissingEdge(e).into());
    }
    Ok(g.has_two_node_disjoint_paths_without(u, v, e)?)
}

/// Deletes idle redundant links. Edges are visited in ascending order and
/// re-checked against the current graph; passes repeat until one removes
/// nothing.
pub fn prune_redundant(g: &mut OverlayGraph) -> Vec<Edge> {
    let mut removed = Vec::new();
    loop {
        let before = removed.len();
        let snapshot: Vec<Edge> = g.edges().collect();
        for e in snapshot {
            let Some(attr) = g.edge_attr(e) else { continue };
            if attr.carries_traffic {
                continue;
            }
            let (u, v) = e.endpoints();
            if is_redundant(g, u, v).expect("edge is live") {
                g.remove_edge(u, v).expect("edge is live");
                removed.push(e);
            }
        }
        if removed.len() == before {
            return removed;
        }
    }
}

/// Removes `failed` and links its former neighbors into a ring, reusing the
/// links already present among them wherever possible.
pub fn repair_failure(g: &mut OverlayGraph, failed: NodeId) -> Result<RepairOutcome, MeshError> {
    let ring: Vec<NodeId> = g.neighbors(failed).collect();
    let removed = g.remove_node(failed)?;
    let added = match ring.len() {
        0 | 1 => Vec::new(),
        2 => {
            let (a, b) = (ring[0], ring[1]);
            if g.contains_edge(a, b) {
                Vec::new()
            } else {
                vec![g.add_edge(a, b)?]
            }
        }
        _ => {
            let order = if ring.len() <= EXHAUSTIVE_RING_LIMIT {
                best_cyclic_order(g, &ring)
            } else {
                greedy_cyclic_order(g, &ring)
            };
            let mut added = Vec::new();
            for i in 0..order.len() {
                let (a, b) = (order[i], order[(i + 1) % order.len()]);
                if !g.contains_edge(a, b) {
                    added.push(g.add_edge(a, b)?);
                }
            }
            added.sort_unstable();
            added
        }
    };
    Ok(RepairOutcome { removed, added })
}

fn reused_links(g: &OverlayGraph, order: &[NodeId]) -> usize {
    (0..order.len())
        .filter(|&i| g.contains_edge(order[i], order[(i + 1) % order.len()]))
        .count()
}

/// Cyclic order of `ring` (first element fixed) with the most existing
/// links; the lexicographically first order wins ties.
fn best_cyclic_order(g: &OverlayGraph, ring: &[NodeId]) -> Vec<NodeId> {
    let mut rest = ring[1..].to_vec();
    let mut best = ring.to_vec();
    let mut best_score = reused_links(g, &best);
    let mut candidate = Vec::with_capacity(ring.len());
    while next_permutation(&mut rest) {
        candidate.clear();
        candidate.push(ring[0]);
        candidate.extend_from_slice(&rest);
        let score = reused_links(g, &candidate);
        if score > best_score {
            best_score = score;
            best.clone_from(&candidate);
        }
        if best_score == ring.len() {
            break;
        }
    }
    best
}

/// Lexicographic successor; false once the slice is the last permutation.
fn next_permutation<T: Ord>(xs: &mut [T]) -> bool {
    let Some(i) = xs.windows(2).rposition(|w| w[0] < w[1]) else {
        return false;
    };
    let j = xs.iter().rposition(|x| *x > xs[i]).expect("pivot has a successor");
    xs.swap(i, j);
    xs[i + 1..].reverse();
    true
}

/// Walks from the lowest id, stepping to the lowest unvisited neighbor that
/// is already linked, else to the lowest unvisited one.
fn greedy_cyclic_order(g: &OverlayGraph, ring: &[NodeId]) -> Vec<NodeId> {
    let mut left: BTreeSet<NodeId> = ring[1..].iter().copied().collect();
    let mut order = vec![ring[0]];
    while !left.is_empty() {
        let at = *order.last().expect("non-empty");
        let next = left
            .iter()
            .copied()
            .find(|&n| g.contains_edge(at, n))
            .unwrap_or_else(|| *left.first().expect("non-empty"));
        left.remove(&next);
        order.push(next);
    }
    order
}

/// Builds a join-only mesh over ids `1..=n`.
pub fn build_mesh(n: u64, policy: TieBreakPolicy) -> OverlayGraph {
    let mut g = OverlayGraph::new();
    for id in 1..=n {
        join(&mut g, NodeId(id), policy).expect("fresh id");
    }
    g
}
