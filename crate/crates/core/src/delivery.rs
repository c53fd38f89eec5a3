//! Source-rooted delivery tree over the mesh, and the backup ("double feed")
//! path each member can fall back to when its tree path breaks.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{format_path, Edge, GraphError, NodeId, OverlayGraph};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DeliveryError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("mesh is disconnected; unreachable from source: {}", join_ids(.unreachable))]
    Disconnected { unreachable: Vec<NodeId> },
    #[error("node {0} is not covered by the delivery tree")]
    NotInTree(NodeId),
    #[error("destination {0} is the source")]
    SourceAsDestination(NodeId),
    #[error("invalid delivery tree: {0}")]
    InvalidTree(String),
    #[error("malformed delivery tree JSON: {0}")]
    Json(String),
}

fn join_ids(ids: &[NodeId]) -> String {
    ids.iter().map(NodeId::to_string).collect::<Vec<_>>().join(",")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeliveryTree {
    source: NodeId,
    parent: BTreeMap<NodeId, NodeId>,
    tree_edges: BTreeSet<Edge>,
}

impl DeliveryTree {
    /// Accepts an externally chosen tree. Every parent link must be a mesh
    /// edge and every member must reach `source`; members need not cover the
    /// whole mesh, so nodes outside the tree act as relays only.
    pub fn from_parents(
        g: &OverlayGraph,
        source: NodeId,
        parent: BTreeMap<NodeId, NodeId>,
    ) -> Result<Self, DeliveryError> {
        if !g.contains_node(source) {
            return Err(GraphError::MissingNode(source).into());
        }
        if parent.contains_key(&source) {
            return Err(DeliveryError::InvalidTree(format!("source {source} has a parent")));
        }
        for (&child, &up) in &parent {
            if !g.contains_edge(child, up) {
                return Err(DeliveryError::InvalidTree(format!(
                    "link {child}-{up} is not a mesh edge"
                )));
            }
        }
        for &start in parent.keys() {
            let mut at = start;
            for _ in 0..=parent.len() {
                match parent.get(&at) {
                    Some(&up) => at = up,
                    None => break,
                }
            }
            if at != source {
                return Err(DeliveryError::InvalidTree(format!(
                    "node {start} does not lead back to the source"
                )));
            }
        }
        let tree_edges = parent.iter().map(|(&c, &p)| Edge::new(c, p)).collect();
        Ok(DeliveryTree {
            source,
            parent,
            tree_edges,
        })
    }

    pub fn source(&self) -> NodeId {
        self.source
    }

    pub fn parent(&self, n: NodeId) -> Option<NodeId> {
        self.parent.get(&n).copied()
    }

    pub fn parents(&self) -> &BTreeMap<NodeId, NodeId> {
        &self.parent
    }

    pub fn tree_edges(&self) -> &BTreeSet<Edge> {
        &self.tree_edges
    }

    pub fn contains(&self, n: NodeId) -> bool {
        n == self.source || self.parent.contains_key(&n)
    }

    /// Members other than the source, ascending.
    pub fn destinations(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.parent.keys().copied()
    }

    /// Tree path from the source to `dest`, both inclusive.
    pub fn path_to(&self, dest: NodeId) -> Result<Vec<NodeId>, DeliveryError> {
        if !self.contains(dest) {
            return Err(DeliveryError::NotInTree(dest));
        }
        let mut path = vec![dest];
        let mut at = dest;
        while let Some(&up) = self.parent.get(&at) {
            path.push(up);
            at = up;
        }
        path.reverse();
        Ok(path)
    }

    /// `{"source":S,"parent":{"4":"5",...}}`
    pub fn to_json(&self) -> String {
        let wire = TreeWire {
            source: self.source,
            parent: self
                .parent
                .iter()
                .map(|(c, p)| (*c, IdText::Text(p.to_string())))
                .collect(),
        };
        serde_json::to_string(&wire).expect("delivery tree serializes")
    }

    pub fn from_json(g: &OverlayGraph, text: &str) -> Result<Self, DeliveryError> {
        let wire: TreeWire =
            serde_json::from_str(text).map_err(|e| DeliveryError::Json(e.to_string()))?;
        let mut parent = BTreeMap::new();
        for (child, up) in wire.parent {
            let up = match up {
                IdText::Number(v) => NodeId(v),
                IdText::Text(s) => NodeId(
                    s.parse()
                        .map_err(|_| DeliveryError::Json(format!("bad node id `{s}`")))?,
                ),
            };
            parent.insert(child, up);
        }
        DeliveryTree::from_parents(g, wire.source, parent)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum IdText {
    Number(u64),
    Text(String),
}

#[derive(Serialize, Deserialize)]
struct TreeWire {
    source: NodeId,
    parent: BTreeMap<NodeId, IdText>,
}

/// Shortest-path tree from `source`: each node's parent is its lowest-id
/// neighbor one hop closer to the source.
pub fn shortest_path_tree(g: &OverlayGraph, source: NodeId) -> Result<DeliveryTree, DeliveryError> {
    let mut dist = g.bfs_hops(source)?;
    dist.insert(source, 0);
    let unreachable: Vec<NodeId> = g.nodes().filter(|n| !dist.contains_key(n)).collect();
    if !unreachable.is_empty() {
        return Err(DeliveryError::Disconnected { unreachable });
    }
    let parent = dist
        .iter()
        .filter(|(&n, _)| n != source)
        .map(|(&n, &d)| {
            let up = g
                .neighbors(n)
                .find(|m| dist[m] + 1 == d)
                .expect("BFS predecessor");
            (n, up)
        })
        .collect();
    DeliveryTree::from_parents(g, source, parent)
}

/// Sets the traffic flag on exactly the tree's links.
pub fn mark_traffic(g: &mut OverlayGraph, tree: &DeliveryTree) -> Result<(), DeliveryError> {
    g.clear_traffic();
    for &e in &tree.tree_edges {
        g.set_traffic(e, true)?;
    }
    Ok(())
}

/// Builds the shortest-path tree and marks its links as traffic-carrying.
pub fn build_delivery_tree(
    g: &mut OverlayGraph,
    source: NodeId,
) -> Result<DeliveryTree, DeliveryError> {
    let tree = shortest_path_tree(g, source)?;
    mark_traffic(g, &tree)?;
    Ok(tree)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DoubleFeed {
    pub dest: NodeId,
    pub primary: Vec<NodeId>,
    pub backup: Vec<NodeId>,
}

/// Tree path to `dest` plus the shortest source-to-`dest` path avoiding the
/// tree path's interior (and, for a one-hop tree path, that link). `None`
/// when no such backup exists.
pub fn double_feed(
    g: &OverlayGraph,
    tree: &DeliveryTree,
    dest: NodeId,
) -> Result<Option<DoubleFeed>, DeliveryError> {
    for n in [tree.source, dest] {
        if !g.contains_node(n) {
            return Err(GraphError::MissingNode(n).into());
        }
    }
    if dest == tree.source {
        return Err(DeliveryError::SourceAsDestination(dest));
    }
    let primary = tree.path_to(dest)?;
    let blocked: BTreeSet<NodeId> = primary[1..primary.len() - 1].iter().copied().collect();
    let banned_link = (primary.len() == 2).then(|| Edge::new(primary[0], primary[1]));
    Ok(
        shortest_path_avoiding(g, tree.source, dest, &blocked, banned_link).map(|backup| {
            DoubleFeed {
                dest,
                primary,
                backup,
            }
        }),
    )
}

fn shortest_path_avoiding(
    g: &OverlayGraph,
    from: NodeId,
    to: NodeId,
    blocked: &BTreeSet<NodeId>,
    banned_link: Option<Edge>,
) -> Option<Vec<NodeId>> {
    let mut prev: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    let mut queue = VecDeque::from([from]);
    while let Some(u) = queue.pop_front() {
        if u == to {
            let mut path = vec![to];
            let mut at = to;
            while let Some(&p) = prev.get(&at) {
                path.push(p);
                at = p;
            }
            path.reverse();
            return Some(path);
        }
        for v in g.neighbors(u) {
            if v == from || blocked.contains(&v) || prev.contains_key(&v) {
                continue;
            }
            if banned_link == Some(Edge::new(u, v)) {
                continue;
            }
            prev.insert(v, u);
            queue.push_back(v);
        }
    }
    None
}

/// Non-tree links used by at least one member's backup path.
pub fn extraneous_edges(g: &OverlayGraph, tree: &DeliveryTree) -> Result<BTreeSet<Edge>, DeliveryError> {
    let mut extra = BTreeSet::new();
    for dest in tree.destinations() {
        if let Some(feed) = double_feed(g, tree, dest)? {
            extra.extend(
                feed.backup
                    .windows(2)
                    .map(|w| Edge::new(w[0], w[1]))
                    .filter(|e| !tree.tree_edges.contains(e)),
            );
        }
    }
    Ok(extra)
}

/// One line per destination: `dest primary=<path> backup=<path|NONE>`.
pub fn feed_report(g: &OverlayGraph, tree: &DeliveryTree) -> Result<String, DeliveryError> {
    let mut out = String::new();
    for dest in tree.destinations() {
        let primary = tree.path_to(dest)?;
        let backup = match double_feed(g, tree, dest)? {
            Some(feed) => format_path(&feed.backup),
            None => "NONE".to_string(),
        };
        out.push_str(&format!("{dest} primary={} backup={backup}\n", format_path(&primary)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(v: u64) -> NodeId {
        NodeId(v)
    }

    fn ids(p: &[NodeId]) -> Vec<u64> {
        p.iter().map(|x| x.0).collect()
    }

    /// S is node 0.
    fn two_routes() -> OverlayGraph {
        OverlayGraph::from_edges([(0u64, 1u64), (1, 2), (2, 3), (3, 4), (0, 5), (5, 4)]).unwrap()
    }

    fn long_primary(g: &OverlayGraph) -> DeliveryTree {
        let parent = BTreeMap::from([(n(1), n(0)), (n(2), n(1)), (n(3), n(2)), (n(4), n(3))]);
        DeliveryTree::from_parents(g, n(0), parent).unwrap()
    }

    #[test]
    fn bfs_tree_prefers_short_path() {
        let mut g = two_routes();
        let tree = build_delivery_tree(&mut g, n(0)).unwrap();
        assert_eq!(ids(&tree.path_to(n(4)).unwrap()), vec![0, 5, 4]);
        let flagged: BTreeSet<Edge> = g.traffic_edges().collect();
        assert_eq!(&flagged, tree.tree_edges());
    }

    #[test]
    fn small_trees() {
        let mut tri = OverlayGraph::from_edges([(1u64, 2u64), (1, 3), (2, 3)]).unwrap();
        let t = build_delivery_tree(&mut tri, n(1)).unwrap();
        assert_eq!(t.parents(), &BTreeMap::from([(n(2), n(1)), (n(3), n(1))]));

        let mut pair = OverlayGraph::from_edges([(1u64, 2u64)]).unwrap();
        let t = build_delivery_tree(&mut pair, n(1)).unwrap();
        assert_eq!(t.parents(), &BTreeMap::from([(n(2), n(1))]));

        let mut split = OverlayGraph::from_edges([(1u64, 2u64), (3, 4)]).unwrap();
        assert_eq!(
            build_delivery_tree(&mut split, n(1)),
            Err(DeliveryError::Disconnected { unreachable: vec![n(3), n(4)] })
        );
    }

    #[test]
    fn backup_and_extraneous_links() {
        let g = two_routes();
        let tree = long_primary(&g);
        let feed = double_feed(&g, &tree, n(4)).unwrap().unwrap();
        assert_eq!(ids(&feed.primary), vec![0, 1, 2, 3, 4]);
        assert_eq!(ids(&feed.backup), vec![0, 5, 4]);
        assert_eq!(
            extraneous_edges(&g, &tree).unwrap(),
            BTreeSet::from([Edge::new(0u64, 5u64), Edge::new(4u64, 5u64)])
        );
    }

    #[test]
    fn triangle_feeds() {
        let mut g = OverlayGraph::from_edges([(1u64, 2u64), (1, 3), (2, 3)]).unwrap();
        let tree = build_delivery_tree(&mut g, n(1)).unwrap();
        let feed = double_feed(&g, &tree, n(2)).unwrap().unwrap();
        assert_eq!(ids(&feed.primary), vec![1, 2]);
        assert_eq!(ids(&feed.backup), vec![1, 3, 2]);
        assert_eq!(extraneous_edges(&g, &tree).unwrap(), BTreeSet::from([Edge::new(2u64, 3u64)]));
    }

    #[test]
    fn acyclic_mesh_has_no_backup() {
        let mut g = OverlayGraph::from_edges([(1u64, 2u64), (2, 3)]).unwrap();
        let tree = build_delivery_tree(&mut g, n(1)).unwrap();
        assert_eq!(double_feed(&g, &tree, n(3)).unwrap(), None);
        assert!(extraneous_edges(&g, &tree).unwrap().is_empty());
        assert_eq!(
            double_feed(&g, &tree, n(1)),
            Err(DeliveryError::SourceAsDestination(n(1)))
        );
        assert!(matches!(double_feed(&g, &tree, n(9)), Err(DeliveryError::Graph(_))));
    }

    #[test]
    fn explicit_trees_are_validated() {
        let g = two_routes();
        let not_an_edge = BTreeMap::from([(n(4), n(0))]);
        assert!(matches!(
            DeliveryTree::from_parents(&g, n(0), not_an_edge),
            Err(DeliveryError::InvalidTree(_))
        ));
        let cycle = BTreeMap::from([(n(1), n(2)), (n(2), n(1))]);
        assert!(matches!(
            DeliveryTree::from_parents(&g, n(0), cycle),
            Err(DeliveryError::InvalidTree(_))
        ));
    }

    #[test]
    fn json_and_report() {
        let g = two_routes();
        let tree = long_primary(&g);
        let json = tree.to_json();
        assert_eq!(json, r#"{"source":0,"parent":{"1":"0","2":"1","3":"2","4":"3"}}"#);
        assert_eq!(DeliveryTree::from_json(&g, &json).unwrap(), tree);
        let numeric = r#"{"source":0,"parent":{"1":0,"2":1,"3":2,"4":3}}"#;
        assert_eq!(DeliveryTree::from_json(&g, numeric).unwrap(), tree);

        let report = feed_report(&g, &tree).unwrap();
        assert_eq!(report.lines().last().unwrap(), "4 primary=0-1-2-3-4 backup=0-5-4");
    }
}
