//! Construction and maintenance of biconnected overlay-multicast topologies.
//!
//! * [`graph`]: the overlay graph, articulation points, biconnectivity and
//!   node-disjoint path pairs.
//! * [`mesh`]: least-degree joins, redundant-link pruning and ring repair
//!   after a failure.
//! * [`tree`]: leaf-chain and child-grandparent augmentation of trees.
//! * [`delivery`]: source-rooted delivery tree and double-feed backup paths.
//! * [`analytics`]: degree / hop metrics and N-sweeps.
//! * [`sim`]: scripted churn with invariant checking.
//! * [`cli`]: the `bimesh` command-line tool.

pub mod analytics;
pub mod cli;
pub mod delivery;
mod flow;
pub mod graph;
pub mod mesh;
pub mod sim;
pub mod tree;

pub use graph::{Edge, EdgeAttr, GraphError, NodeId, OverlayGraph, PathPair};
pub use mesh::{JoinOutcome, RepairOutcome, TieBreakPolicy};
pub use tree::{Approach, Augmentation, RootedTree};
