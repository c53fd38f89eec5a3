//! Topology metrics (average degree, average hop count, augmentation link
//! counts), N-sweeps, and their CSV rendering.
//!
//! Averages are kept as exact rationals and only rounded when rendered, so
//! repeated sweeps are bit-identical.

use num_rational::Ratio;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::graph::{NodeId, OverlayGraph};
use crate::mesh::{join, TieBreakPolicy};
use crate::tree::{build_full_binary_tree, grandparent_augment, leaf_chain_augment, TreeError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalyticsError {
    #[error("metric undefined on an empty graph")]
    EmptyGraph,
    #[error("average hops needs at least two nodes")]
    TooFewNodes,
    #[error("average hops undefined on a disconnected graph")]
    Disconnected,
    #[error("linear fit needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("linear fit needs {xs} x values to match {ys} y values")]
    LengthMismatch { xs: usize, ys: usize },
    #[error("linear fit needs pairwise distinct x values")]
    DegenerateXs,
    #[error("sweep values must be positive and ascending")]
    BadSweep,
    #[error(transparent)]
    Tree(#[from] TreeError),
}

/// Sum of degrees over node count, i.e. `2m / n`.
pub fn avg_degree(g: &OverlayGraph) -> Result<Ratio<u64>, AnalyticsError> {
    if g.is_empty() {
        return Err(AnalyticsError::EmptyGraph);
    }
    let degree_sum: u64 = g.nodes().map(|n| g.degree(n).expect("live") as u64).sum();
    Ok(Ratio::new(degree_sum, g.node_count() as u64))
}

/// Mean BFS hop count over all unordered node pairs.
pub fn avg_hops(g: &OverlayGraph) -> Result<Ratio<u64>, AnalyticsError> {
    let n = g.node_count();
    if n < 2 {
        return Err(AnalyticsError::TooFewNodes);
    }
    let mut total = 0u64;
    for src in g.nodes() {
        let hops = g.bfs_hops(src).expect("live");
        if hops.len() + 1 != n {
            return Err(AnalyticsError::Disconnected);
        }
        // each unordered pair once
        total += hops.range(src..).map(|(_, &h)| h as u64).sum::<u64>();
    }
    let pairs = (n as u64) * (n as u64 - 1) / 2;
    Ok(Ratio::new(total, pairs))
}

fn ser_ratio<S: Serializer>(r: &Ratio<u64>, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(ratio_to_f64(*r))
}

fn ser_opt_ratio<S: Serializer>(r: &Option<Ratio<u64>>, s: S) -> Result<S::Ok, S::Error> {
    match r {
        Some(r) => s.serialize_f64(ratio_to_f64(*r)),
        None => s.serialize_none(),
    }
}

pub fn ratio_to_f64(r: Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Rounds half away from zero to six decimals without going through floats.
pub fn format_decimal6(r: Ratio<u64>) -> String {
    const SCALE: u128 = 1_000_000;
    let (num, den) = (*r.numer() as u128, *r.denom() as u128);
    let scaled = (num * SCALE * 2 + den) / (den * 2);
    format!("{}.{:06}", scaled / SCALE, scaled % SCALE)
}

/// Metrics of one topology snapshot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MetricsRecord {
    pub n: usize,
    pub edges: usize,
    #[serde(serialize_with = "ser_ratio")]
    pub avg_degree: Ratio<u64>,
    pub max_degree: usize,
    /// Absent when the graph has fewer than two nodes, is disconnected, or
    /// hop metrics were not requested.
    #[serde(serialize_with = "ser_opt_ratio")]
    pub avg_hops: Option<Ratio<u64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub approach: Option<String>,
}

impl MetricsRecord {
    pub fn of(g: &OverlayGraph, with_hops: bool) -> Self {
        MetricsRecord {
            n: g.node_count(),
            edges: g.edge_count(),
            avg_degree: avg_degree(g).unwrap_or_else(|_| Ratio::from_integer(0)),
            max_degree: g.max_degree(),
            avg_hops: if with_hops { avg_hops(g).ok() } else { None },
            approach: None,
        }
    }
}

pub const MESH_CSV_HEADER: &str = "n,edges,avg_degree,max_degree,avg_hops";
pub const TREE_CSV_HEADER: &str = "n,leaf_chain_links,grandparent_links,ratio";

pub fn mesh_csv(records: &[MetricsRecord]) -> String {
    let mut out = format!("{MESH_CSV_HEADER}\n");
    for r in records {
        let hops = r.avg_hops.map(format_decimal6).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.n,
            r.edges,
            format_decimal6(r.avg_degree),
            r.max_degree,
            hops
        ));
    }
    out
}

/// Grows one join-only mesh and snapshots it at every requested size. The
/// join rule never looks ahead, so the mesh at size `k` is exactly the mesh
/// one would build from scratch with `k` joins.
pub fn sweep_mesh(
    n_values: &[usize],
    policy: TieBreakPolicy,
) -> Result<Vec<MetricsRecord>, AnalyticsError> {
    if n_values.first() == Some(&0) || n_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(AnalyticsError::BadSweep);
    }
    let mut g = OverlayGraph::new();
    let mut records = Vec::with_capacity(n_values.len());
    for &target in n_values {
        while g.node_count() < target {
            let id = NodeId(g.node_count() as u64 + 1);
            join(&mut g, id, policy).expect("fresh id");
        }
        records.push(MetricsRecord::of(&g, true));
    }
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TreeLinksRecord {
    pub levels: u32,
    pub n: u64,
    pub leaf_chain_links: u64,
    pub grandparent_links: u64,
}

impl TreeLinksRecord {
    pub fn ratio(&self) -> Ratio<u64> {
        Ratio::new(self.grandparent_links, self.leaf_chain_links)
    }
}

/// Counts the links each approach actually adds to full binary trees of the
/// given depths (at least two levels).
pub fn sweep_trees(levels_values: &[u32]) -> Result<Vec<TreeLinksRecord>, AnalyticsError> {
    levels_values
        .iter()
        .map(|&levels| {
            if levels < 2 {
                return Err(TreeError::Levels { min: 2, got: levels }.into());
            }
            let tree = build_full_binary_tree(levels)?;
            let leaf = leaf_chain_augment(&tree).added_edges.len() as u64;
            let grand = grandparent_augment(&tree).added_edges.len() as u64;
            Ok(TreeLinksRecord {
                levels,
                n: tree.len() as u64,
                leaf_chain_links: leaf,
                grandparent_links: grand,
            })
        })
        .collect()
}

pub fn trees_csv(records: &[TreeLinksRecord]) -> String {
    let mut out = format!("{TREE_CSV_HEADER}\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.n,
            r.leaf_chain_links,
            r.grandparent_links,
            format_decimal6(r.ratio())
        ));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares. Constant `ys` give `r_squared = 0`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit, AnalyticsError> {
    if xs.len() != ys.len() {
        return Err(AnalyticsError::LengthMismatch { xs: xs.len(), ys: ys.len() });
    }
    if xs.len() < 3 {
        return Err(AnalyticsError::TooFewPoints(xs.len()));
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(AnalyticsError::DegenerateXs);
    }
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mean_x).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mean_x) * (y - mean_y)).sum();
    let syy: f64 = ys.iter().map(|y| (y - mean_y).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let r_squared = if syy == 0.0 {
        0.0
    } else {
        (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    };
    Ok(LinearFit { slope, intercept, r_squared })
}
