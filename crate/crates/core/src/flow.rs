//! Unit-capacity max-flow on the node-split graph. Every node `x` other than
//! the terminals becomes `x_in -> x_out` with capacity 1, so the flow value
//! between the terminals counts internally node-disjoint paths.

use std::collections::VecDeque;

use crate::graph::{Edge, NodeId, OverlayGraph};

#[derive(Debug, Clone)]
struct Arc {
    to: usize,
    cap: u8,
    orig: u8,
    rev: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct SplitFlow {
    ids: Vec<NodeId>,
    arcs: Vec<Vec<Arc>>,
    source: usize,
    sink: usize,
    value: usize,
}

fn in_half(i: usize) -> usize {
    2 * i
}

fn out_half(i: usize) -> usize {
    2 * i + 1
}

impl SplitFlow {
    pub(crate) fn new(g: &OverlayGraph, s: NodeId, t: NodeId, ignored: Option<Edge>) -> Self {
        let ids: Vec<NodeId> = g.nodes().collect();
        let index = |n: NodeId| ids.binary_search(&n).expect("live node");
        let (si, ti) = (index(s), index(t));
        let links: Vec<(usize, usize)> = g
            .edges()
            .filter(|e| Some(*e) != ignored)
            .map(|e| (index(e.lo()), index(e.hi())))
            .collect();
        let mut flow = SplitFlow {
            arcs: vec![Vec::new(); 2 * ids.len()],
            source: out_half(si),
            sink: in_half(ti),
            value: 0,
            ids,
        };
        for i in 0..flow.ids.len() {
            if i != si && i != ti {
                flow.add_arc(in_half(i), out_half(i));
            }
        }
        for (a, b) in links {
            for (x, y) in [(a, b), (b, a)] {
                // nothing flows back into the source or out of the sink
                if y == si || x == ti {
                    continue;
                }
                flow.add_arc(out_half(x), in_half(y));
            }
        }
        flow
    }

    fn add_arc(&mut self, from: usize, to: usize) {
        let fwd = self.arcs[from].len();
        let bwd = self.arcs[to].len();
        self.arcs[from].push(Arc { to, cap: 1, orig: 1, rev: bwd });
        self.arcs[to].push(Arc { to: from, cap: 0, orig: 0, rev: fwd });
    }

    pub(crate) fn value(&self) -> usize {
        self.value
    }

    /// Pushes unit augmenting paths until the flow reaches `limit` or no
    /// augmenting path remains.
    pub(crate) fn augment_up_to(&mut self, limit: usize) {
        while self.value < limit && self.augment_once() {
            self.value += 1;
        }
    }

    fn augment_once(&mut self) -> bool {
        let mut prev: Vec<Option<(usize, usize)>> = vec![None; self.arcs.len()];
        let mut queue = VecDeque::from([self.source]);
        let mut reached = false;
        'bfs: while let Some(u) = queue.pop_front() {
            for (k, arc) in self.arcs[u].iter().enumerate() {
                if arc.cap > 0 && arc.to != self.source && prev[arc.to].is_none() {
                    prev[arc.to] = Some((u, k));
                    if arc.to == self.sink {
                        reached = true;
                        break 'bfs;
                    }
                    queue.push_back(arc.to);
                }
            }
        }
        if !reached {
            return false;
        }
        let mut v = self.sink;
        while let Some((u, k)) = prev[v] {
            let rev = self.arcs[u][k].rev;
            self.arcs[u][k].cap -= 1;
            self.arcs[v][rev].cap += 1;
            v = u;
        }
        true
    }

    /// Splits the current flow into `value()` source-to-sink node paths.
    pub(crate) fn decompose(&self) -> Vec<Vec<NodeId>> {
        let mut remaining: Vec<Vec<u8>> = self
            .arcs
            .iter()
            .map(|arcs| arcs.iter().map(|a| a.orig.saturating_sub(a.cap)).collect())
            .collect();
        let mut paths = Vec::with_capacity(self.value);
        for _ in 0..self.value {
            let mut path = vec![self.ids[self.source / 2]];
            let mut at = self.source;
            while at != self.sink {
                let k = remaining[at]
                    .iter()
                    .position(|&f| f > 0)
                    .expect("flow conservation");
                remaining[at][k] -= 1;
                at = self.arcs[at][k].to;
                if at.is_multiple_of(2) {
                    path.push(self.ids[at / 2]);
                }
            }
            paths.push(path);
        }
        paths
    }
}
