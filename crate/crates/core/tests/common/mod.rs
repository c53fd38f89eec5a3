//! Brute-force reference implementations. They work on a bitmask adjacency
//! copy of the graph and share no code with the library algorithms.

#![allow(dead_code)]

use bimesh::{NodeId, OverlayGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Graph on vertices `0..n` with adjacency bitmasks (n <= 32).
#[derive(Debug, Clone)]
pub struct Small {
    pub n: usize,
    pub adj: Vec<u32>,
}

impl Small {
    pub fn from_overlay(g: &OverlayGraph) -> (Small, Vec<NodeId>) {
        let ids: Vec<NodeId> = g.nodes().collect();
        let pos = |id: NodeId| ids.iter().position(|&x| x == id).unwrap();
        let mut adj = vec![0u32; ids.len()];
        for e in g.edges() {
            let (a, b) = (pos(e.lo()), pos(e.hi()));
            adj[a] |= 1 << b;
            adj[b] |= 1 << a;
        }
        (Small { n: ids.len(), adj }, ids)
    }

    pub fn to_overlay(&self) -> OverlayGraph {
        let mut g = OverlayGraph::new();
        for v in 0..self.n {
            g.add_node(NodeId(v as u64)).unwrap();
        }
        for u in 0..self.n {
            for v in u + 1..self.n {
                if self.has(u, v) {
                    g.add_edge(NodeId(u as u64), NodeId(v as u64)).unwrap();
                }
            }
        }
        g
    }

    pub fn has(&self, u: usize, v: usize) -> bool {
        self.adj[u] >> v & 1 == 1
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for u in 0..self.n {
            for v in u + 1..self.n {
                if self.has(u, v) {
                    out.push((u, v));
                }
            }
        }
        out
    }

    pub fn without_edge(&self, u: usize, v: usize) -> Small {
        let mut s = self.clone();
        s.adj[u] &= !(1 << v);
        s.adj[v] &= !(1 << u);
        s
    }

    /// Vertices reachable from `src` while avoiding the `banned` mask.
    pub fn reach(&self, src: usize, banned: u32) -> u32 {
        let mut seen = 1u32 << src;
        let mut frontier = seen;
        while frontier != 0 {
            let mut next = 0;
            for v in 0..self.n {
                if frontier >> v & 1 == 1 {
                    next |= self.adj[v];
                }
            }
            next &= !seen & !banned;
            seen |= next;
            frontier = next;
        }
        seen
    }

    pub fn all(&self) -> u32 {
        if self.n == 32 {
            u32::MAX
        } else {
            (1u32 << self.n) - 1
        }
    }

    pub fn components(&self, banned: u32) -> usize {
        let mut left = self.all() & !banned;
        let mut count = 0;
        while left != 0 {
            let v = left.trailing_zeros() as usize;
            left &= !self.reach(v, banned);
            count += 1;
        }
        count
    }

    pub fn connected(&self) -> bool {
        self.components(0) <= 1
    }
}

/// Nodes whose deletion increases the component count.
pub fn brute_articulation_points(s: &Small) -> Vec<usize> {
    let base = s.components(0);
    (0..s.n).filter(|&v| s.components(1 << v) > base).collect()
}

/// At least three vertices, connected, and still connected after deleting
/// any single vertex.
pub fn brute_biconnected(s: &Small) -> bool {
    s.n >= 3 && s.connected() && (0..s.n).all(|v| s.components(1 << v) == 1)
}

/// Two internally disjoint u-v paths, by vertex deletion: for adjacent u, v
/// the graph minus the edge must still join them; otherwise no single vertex
/// may separate them.
pub fn brute_two_paths_by_deletion(s: &Small, u: usize, v: usize) -> bool {
    if s.has(u, v) {
        return s.without_edge(u, v).reach(u, 0) >> v & 1 == 1;
    }
    if s.reach(u, 0) >> v & 1 == 0 {
        return false;
    }
    (0..s.n)
        .filter(|&w| w != u && w != v)
        .all(|w| s.reach(u, 1 << w) >> v & 1 == 1)
}

/// Every simple u-v path, as (interior mask, vertex sequence).
pub fn simple_paths(s: &Small, u: usize, v: usize) -> Vec<(u32, Vec<usize>)> {
    fn go(s: &Small, at: usize, v: usize, used: u32, path: &mut Vec<usize>, out: &mut Vec<(u32, Vec<usize>)>) {
        if at == v {
            let interior = path[1..path.len() - 1].iter().fold(0u32, |m, &x| m | 1 << x);
            out.push((interior, path.clone()));
            return;
        }
        for next in 0..s.n {
            if s.has(at, next) && used >> next & 1 == 0 {
                path.push(next);
                go(s, next, v, used | 1 << next, path, out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(s, u, v, 1 << u, &mut vec![u], &mut out);
    out
}

/// Two internally disjoint u-v paths, by enumerating path pairs.
pub fn brute_two_paths_by_enumeration(s: &Small, u: usize, v: usize) -> bool {
    let paths = simple_paths(s, u, v);
    for i in 0..paths.len() {
        for j in i + 1..paths.len() {
            if paths[i].0 & paths[j].0 == 0 {
                return true;
            }
        }
    }
    false
}

pub fn brute_redundant_by_enumeration(s: &Small, u: usize, v: usize) -> bool {
    brute_two_paths_by_enumeration(&s.without_edge(u, v), u, v)
}

pub fn brute_redundant_by_deletion(s: &Small, u: usize, v: usize) -> bool {
    brute_two_paths_by_deletion(&s.without_edge(u, v), u, v)
}

/// All-pairs hop distances; `usize::MAX` when unreachable.
pub fn floyd_warshall(s: &Small) -> Vec<Vec<usize>> {
    const INF: usize = usize::MAX / 4;
    let mut d = vec![vec![INF; s.n]; s.n];
    for u in 0..s.n {
        d[u][u] = 0;
        for v in 0..s.n {
            if s.has(u, v) {
                d[u][v] = 1;
            }
        }
    }
    for k in 0..s.n {
        for i in 0..s.n {
            for j in 0..s.n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    for row in &mut d {
        for x in row.iter_mut() {
            if *x >= INF {
                *x = usize::MAX;
            }
        }
    }
    d
}

/// Random graph on `n` vertices with edge probability `p`.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, p: f64) -> Small {
    let mut adj = vec![0u32; n];
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(p) {
                adj[u] |= 1 << v;
                adj[v] |= 1 << u;
            }
        }
    }
    Small { n, adj }
}

/// Random connected graph: a random spanning tree plus extra edges.
pub fn random_connected_graph(seed: u64, max_n: usize) -> Small {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(3..=max_n);
    let p = rng.gen_range(0.0..0.6);
    let mut s = random_graph(&mut rng, n, p);
    for v in 1..n {
        let u = rng.gen_range(0..v);
        s.adj[u] |= 1 << v;
        s.adj[v] |= 1 << u;
    }
    s
}

/// Every labelled graph on `n` vertices (2^(n(n-1)/2) of them).
pub fn all_graphs(n: usize) -> impl Iterator<Item = Small> {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
    let total = 1u64 << pairs.len();
    (0..total).map(move |mask| {
        let mut adj = vec![0u32; n];
        for (bit, &(u, v)) in pairs.iter().enumerate() {
            if mask >> bit & 1 == 1 {
                adj[u] |= 1 << v;
                adj[v] |= 1 << u;
            }
        }
        Small { n, adj }
    })
}
