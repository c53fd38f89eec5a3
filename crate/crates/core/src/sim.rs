//! Deterministic churn engine. Applies join / fail / prune / tree events to a
//! mesh, checks the protocol invariants after every event and records a
//! replayable trace.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::analytics::MetricsRecord;
use crate::delivery::build_delivery_tree;
use crate::graph::{Edge, NodeId, OverlayGraph};
use crate::mesh::{self, PolicyKind, TieBreakPolicy};

/// Join-only meshes never exceed this degree.
pub const JOIN_ONLY_MAX_DEGREE: usize = 4;

/// Node generated scripts use as the delivery source; it is never failed.
pub const GENERATED_SOURCE: NodeId = NodeId(1);

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventKind {
    /// Least-degree join of the next fresh id.
    Join,
    /// Join of the next fresh id onto the given targets.
    JoinExplicit(BTreeSet<NodeId>),
    Fail(NodeId),
    Prune,
    BuildTree(NodeId),
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EventKind::Join => f.write_str("join"),
            EventKind::JoinExplicit(targets) => {
                f.write_str("join!")?;
                for t in targets {
                    write!(f, " {t}")?;
                }
                Ok(())
            }
            EventKind::Fail(n) => write!(f, "fail {n}"),
            EventKind::Prune => f.write_str("prune"),
            EventKind::BuildTree(s) => write!(f, "tree {s}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChurnEvent {
    /// 1-based position in the script.
    pub at: usize,
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChurnScript {
    pub seed: u64,
    pub policy: TieBreakPolicy,
    pub events: Vec<ChurnEvent>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScriptError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

impl ChurnScript {
    pub fn new(seed: u64, policy: TieBreakPolicy) -> Self {
        ChurnScript {
            seed,
            policy,
            events: Vec::new(),
        }
    }

    pub fn push(&mut self, kind: EventKind) {
        let at = self.events.len() + 1;
        self.events.push(ChurnEvent { at, kind });
    }

    /// The first `len` events under the same header.
    pub fn prefix(&self, len: usize) -> ChurnScript {
        ChurnScript {
            seed: self.seed,
            policy: self.policy,
            events: self.events[..len.min(self.events.len())].to_vec(),
        }
    }

    /// Checks step ordering, id freshness and that every failed or targeted
    /// node is live at that point, without building the mesh.
    pub fn validate(&self) -> Result<(), SimError> {
        let mut live = BTreeSet::new();
        let mut next_id = 1u64;
        let mut last_at = 0;
        for ev in &self.events {
            let bad = |reason: String| SimError::Malformed { step: ev.at, reason };
            if ev.at <= last_at {
                return Err(bad("step indices must increase".into()));
            }
            last_at = ev.at;
            match &ev.kind {
                EventKind::Join => {
                    live.insert(NodeId(next_id));
                    next_id += 1;
                }
                EventKind::JoinExplicit(targets) => {
                    if let Some(t) = targets.iter().find(|t| !live.contains(*t)) {
                        return Err(bad(format!("join target {t} is not live")));
                    }
                    if targets.len() != live.len().min(2) {
                        return Err(bad(format!(
                            "{} live node(s) call for {} target(s)",
                            live.len(),
                            live.len().min(2)
                        )));
                    }
                    live.insert(NodeId(next_id));
                    next_id += 1;
                }
                EventKind::Fail(n) | EventKind::BuildTree(n) => {
                    if !live.contains(n) {
                        return Err(bad(format!("node {n} is not live")));
                    }
                    if matches!(ev.kind, EventKind::Fail(_)) {
                        live.remove(n);
                    }
                }
                EventKind::Prune => {}
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, ScriptError> {
        let mut seed = 0u64;
        let mut policy = PolicyKind::LowestId;
        let mut kinds = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |reason: String| ScriptError::Parse { line: i + 1, reason };
            let id = |tok: &str| -> Result<NodeId, ScriptError> {
                tok.parse::<u64>()
                    .map(NodeId)
                    .map_err(|_| err(format!("bad node id `{tok}`")))
            };
            if let Some(v) = line.strip_prefix("seed=") {
                seed = v.trim().parse().map_err(|_| err(format!("bad seed `{v}`")))?;
                continue;
            }
            if let Some(v) = line.strip_prefix("policy=") {
                policy = v.trim().parse().map_err(err)?;
                continue;
            }
            let mut words = line.split_whitespace();
            let verb = words.next().expect("non-empty line");
            let args: Vec<&str> = words.collect();
            let kind = match (verb, args.as_slice()) {
                ("join", []) => EventKind::Join,
                ("join!", targets) if targets.len() <= 2 => EventKind::JoinExplicit(
                    targets.iter().map(|t| id(t)).collect::<Result<_, _>>()?,
                ),
                ("fail", [k]) => EventKind::Fail(id(k)?),
                ("prune", []) => EventKind::Prune,
                ("tree", [s]) => EventKind::BuildTree(id(s)?),
                _ => return Err(err(format!("unrecognised event `{line}`"))),
            };
            kinds.push(kind);
        }
        let mut script = ChurnScript::new(seed, policy.with_seed(seed));
        for k in kinds {
            script.push(k);
        }
        Ok(script)
    }
}

impl fmt::Display for ChurnScript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "seed={}", self.seed)?;
        writeln!(f, "policy={}", self.policy.label())?;
        for ev in &self.events {
            writeln!(f, "{}", ev.kind)?;
        }
        Ok(())
    }
}

impl FromStr for ChurnScript {
    type Err = ScriptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ChurnScript::parse(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CheckLevel {
    None,
    #[default]
    Biconnectivity,
    /// Biconnectivity plus the edge-count and max-degree invariants while the
    /// history holds only joins and tree builds.
    Full,
}

impl FromStr for CheckLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(CheckLevel::None),
            "biconnectivity" => Ok(CheckLevel::Biconnectivity),
            "full" => Ok(CheckLevel::Full),
            other => Err(format!("unknown check level `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub check: CheckLevel,
    /// All-pairs hop averages cost O(N·E) per event; bulk runs turn them off.
    pub hop_metrics: bool,
}

impl RunOptions {
    pub fn new(check: CheckLevel) -> Self {
        RunOptions {
            check,
            hop_metrics: true,
        }
    }

    pub fn without_hops(mut self) -> Self {
        self.hop_metrics = false;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceEntry {
    pub step: usize,
    pub event: String,
    /// Id assigned by a join, or the failed node.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub node: Option<NodeId>,
    pub edges_added: Vec<Edge>,
    pub edges_removed: Vec<Edge>,
    pub post_biconnected: bool,
    pub post_metrics: MetricsRecord,
}

/// JSON-lines rendering, one entry per line.
pub fn trace_to_jsonl(trace: &[TraceEntry]) -> String {
    let mut out = String::new();
    for entry in trace {
        out.push_str(&serde_json::to_string(entry).expect("trace entry serializes"));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub step: usize,
    pub message: String,
    /// Shortest prefix of the script that reproduces the violation.
    pub reproduction: ChurnScript,
    /// Trace up to and including the violating event.
    pub trace: Vec<TraceEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("malformed script at step {step}: {reason}")]
    Malformed { step: usize, reason: String },
    #[error("invariant violated at step {}: {}", .0.step, .0.message)]
    Violation(Box<Violation>),
    #[error("cannot generate script: {0}")]
    Unsatisfiable(String),
}

/// Runs `script` with hop metrics enabled.
pub fn run(script: &ChurnScript, check: CheckLevel) -> Result<Vec<TraceEntry>, SimError> {
    run_with(script, RunOptions::new(check))
}

pub fn run_with(script: &ChurnScript, opts: RunOptions) -> Result<Vec<TraceEntry>, SimError> {
    let mut g = OverlayGraph::new();
    let mut next_id = 1u64;
    let mut join_only = true;
    let mut trace = Vec::with_capacity(script.events.len());

    for (idx, ev) in script.events.iter().enumerate() {
        let malformed = |reason: String| SimError::Malformed { step: ev.at, reason };
        let mut node = None;
        let (edges_added, edges_removed) = match &ev.kind {
            EventKind::Join | EventKind::JoinExplicit(_) => {
                let id = NodeId(next_id);
                next_id += 1;
                node = Some(id);
                let outcome = match &ev.kind {
                    EventKind::JoinExplicit(targets) => mesh::join_explicit(&mut g, id, targets),
                    _ => mesh::join(&mut g, id, script.policy),
                }
                .map_err(|e| malformed(e.to_string()))?;
                let added = outcome.attached_to.iter().map(|&t| Edge::new(id, t)).collect();
                (added, Vec::new())
            }
            EventKind::Fail(k) => {
                join_only = false;
                node = Some(*k);
                let out = mesh::repair_failure(&mut g, *k).map_err(|e| malformed(e.to_string()))?;
                (out.added, out.removed)
            }
            EventKind::Prune => {
                join_only = false;
                (Vec::new(), mesh::prune_redundant(&mut g))
            }
            EventKind::BuildTree(s) => {
                if !g.contains_node(*s) {
                    return Err(malformed(format!("tree source {s} is not live")));
                }
                if let Err(e) = build_delivery_tree(&mut g, *s) {
                    let message = format!("delivery tree from {s} failed: {e}");
                    return Err(violation(script, idx, message, trace));
                }
                (Vec::new(), Vec::new())
            }
        };

        let post_biconnected = g.is_biconnected();
        trace.push(TraceEntry {
            step: ev.at,
            event: ev.kind.to_string(),
            node,
            edges_added,
            edges_removed,
            post_biconnected,
            post_metrics: MetricsRecord::of(&g, opts.hop_metrics),
        });

        if let Some(message) = check_invariants(&g, post_biconnected, join_only, opts.check) {
            return Err(violation(script, idx, message, trace));
        }
    }
    Ok(trace)
}

fn check_invariants(
    g: &OverlayGraph,
    biconnected: bool,
    join_only: bool,
    level: CheckLevel,
) -> Option<String> {
    if level == CheckLevel::None {
        return None;
    }
    let n = g.node_count();
    if n >= 3 && !biconnected {
        let cuts: Vec<String> = g.articulation_points().iter().map(|c| c.to_string()).collect();
        return Some(format!(
            "mesh of {n} nodes is not biconnected (articulation points: [{}])",
            cuts.join(",")
        ));
    }
    if level == CheckLevel::Full && join_only {
        let expected = (2 * n).saturating_sub(3);
        if g.edge_count() != expected {
            return Some(format!(
                "join-only mesh of {n} nodes has {} edges, expected {expected}",
                g.edge_count()
            ));
        }
        if g.max_degree() > JOIN_ONLY_MAX_DEGREE {
            return Some(format!(
                "join-only mesh reached degree {} (limit {JOIN_ONLY_MAX_DEGREE})",
                g.max_degree()
            ));
        }
    }
    None
}

fn violation(
    script: &ChurnScript,
    idx: usize,
    message: String,
    trace: Vec<TraceEntry>,
) -> SimError {
    SimError::Violation(Box::new(Violation {
        step: script.events[idx].at,
        message,
        reproduction: script.prefix(idx + 1),
        trace,
    }))
}

/// Random interleaving of `n_joins` joins and `n_fails` failures, at least
/// three nodes live before any failure. A prune follows every
/// `prune_every`-th join or failure (0 disables pruning). Scripts with
/// failures or prunes also build a delivery tree from node 1 once the mesh
/// reaches three nodes and rebuild it after every failure; node 1 is never
/// failed.
pub fn generate_script(
    seed: u64,
    n_joins: usize,
    n_fails: usize,
    prune_every: usize,
) -> Result<ChurnScript, SimError> {
    if n_joins < n_fails + 3 {
        return Err(SimError::Unsatisfiable(format!(
            "{n_joins} joins cannot absorb {n_fails} failures while keeping 3 nodes live"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut script = ChurnScript::new(seed, TieBreakPolicy::LowestId);
    let with_tree = n_fails > 0 || prune_every > 0;
    let (mut joins_left, mut fails_left) = (n_joins, n_fails);
    let mut live: Vec<NodeId> = Vec::new();
    let mut next_id = 1u64;
    let mut churn = 0usize;

    while joins_left + fails_left > 0 {
        let can_fail = fails_left > 0 && live.len() >= 4;
        let fail = can_fail
            && (joins_left == 0 || rng.gen_range(0..joins_left + fails_left) < fails_left);
        if fail {
            let candidates: Vec<NodeId> = live
                .iter()
                .copied()
                .filter(|&n| n != GENERATED_SOURCE)
                .collect();
            let victim = candidates[rng.gen_range(0..candidates.len())];
            live.retain(|&n| n != victim);
            script.push(EventKind::Fail(victim));
            fails_left -= 1;
            if with_tree {
                script.push(EventKind::BuildTree(GENERATED_SOURCE));
            }
        } else {
            live.push(NodeId(next_id));
            next_id += 1;
            script.push(EventKind::Join);
            joins_left -= 1;
            if with_tree && next_id == 4 {
                script.push(EventKind::BuildTree(GENERATED_SOURCE));
            }
        }
        churn += 1;
        if prune_every > 0 && churn.is_multiple_of(prune_every) {
            script.push(EventKind::Prune);
        }
    }
    Ok(script)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn joins(k: usize) -> ChurnScript {
        let mut s = ChurnScript::new(0, TieBreakPolicy::LowestId);
        for _ in 0..k {
            s.push(EventKind::Join);
        }
        s
    }

    #[test]
    fn five_joins() {
        let trace = run(&joins(5), CheckLevel::Full).unwrap();
        assert_eq!(trace.len(), 5);
        assert!(trace[..2].iter().all(|t| !t.post_biconnected));
        assert!(trace[2..].iter().all(|t| t.post_biconnected));
        assert_eq!(trace[4].post_metrics.edges, 7);
        assert_eq!(trace[4].node, Some(NodeId(5)));
    }

    #[test]
    fn twelve_joins_then_fail_seven() {
        let mut s = joins(12);
        s.push(EventKind::Fail(NodeId(7)));
        let trace = run(&s, CheckLevel::Full).unwrap();
        let last = trace.last().unwrap();
        assert!(last.post_biconnected);
        assert!(last.edges_removed.iter().all(|e| e.contains(NodeId(7))));
        assert_eq!(last.post_metrics.n, 11);
    }

    #[test]
    fn shrinking_below_three_suspends_checks() {
        let mut s = joins(4);
        for k in 1..=3 {
            s.push(EventKind::Fail(NodeId(k)));
        }
        let trace = run(&s, CheckLevel::Biconnectivity).unwrap();
        let sizes: Vec<usize> = trace.iter().map(|t| t.post_metrics.n).collect();
        assert_eq!(sizes, vec![1, 2, 3, 4, 3, 2, 1]);
        assert!(trace[4].post_biconnected);
        assert!(!trace[5].post_biconnected);
    }

    #[test]
    fn explicit_joins_can_break_the_degree_bound() {
        let mut s = joins(3);
        for _ in 0..3 {
            s.push(EventKind::JoinExplicit([NodeId(1), NodeId(2)].into()));
        }
        let err = run(&s, CheckLevel::Full).unwrap_err();
        let SimError::Violation(v) = err else { panic!("expected violation") };
        assert_eq!(v.step, 6);
        assert_eq!(v.reproduction.events.len(), 6);
        assert!(v.message.contains("degree 5"));
        // the same script passes without the full checks
        assert!(run(&s, CheckLevel::Biconnectivity).is_ok());
    }

    #[test]
    fn malformed_events() {
        let mut s = joins(3);
        s.push(EventKind::Fail(NodeId(9)));
        assert!(matches!(run(&s, CheckLevel::None), Err(SimError::Malformed { step: 4, .. })));
        assert!(matches!(s.validate(), Err(SimError::Malformed { step: 4, .. })));
        let mut s = joins(3);
        s.push(EventKind::JoinExplicit([NodeId(1)].into()));
        assert!(matches!(run(&s, CheckLevel::None), Err(SimError::Malformed { .. })));
    }

    #[test]
    fn script_text_round_trip() {
        let text = "seed=7\npolicy=random\njoin\njoin\njoin\njoin! 1 2\nfail 2\nprune\ntree 1\n";
        let s = ChurnScript::parse(text).unwrap();
        assert_eq!(s.policy, TieBreakPolicy::SeededRandom { seed: 7 });
        assert_eq!(s.events.len(), 7);
        assert_eq!(s.to_string(), text);
        assert!(ChurnScript::parse("join 3\n").is_err());
        assert!(ChurnScript::parse("seed=x\n").is_err());
        assert!(ChurnScript::parse("policy=fancy\n").is_err());
        let commented = ChurnScript::parse("# growth\n\njoin  # first\n").unwrap();
        assert_eq!(commented.events.len(), 1);
    }

    #[test]
    fn generation_examples() {
        let growth = generate_script(1, 10, 0, 0).unwrap();
        assert_eq!(growth.events.len(), 10);
        assert!(growth.events.iter().all(|e| e.kind == EventKind::Join));
        assert_eq!(
            generate_script(1, 30, 5, 3).unwrap().to_string(),
            generate_script(1, 30, 5, 3).unwrap().to_string()
        );

        let mixed = generate_script(2, 50, 10, 5).unwrap();
        let count = |pred: fn(&EventKind) -> bool| mixed.events.iter().filter(|e| pred(&e.kind)).count();
        assert_eq!(count(|k| *k == EventKind::Join), 50);
        assert_eq!(count(|k| matches!(k, EventKind::Fail(_))), 10);
        assert_eq!(count(|k| *k == EventKind::Prune), 12);
        mixed.validate().unwrap();
        assert!(!mixed
            .events
            .iter()
            .any(|e| e.kind == EventKind::Fail(GENERATED_SOURCE)));
        run(&mixed, CheckLevel::Full).unwrap();

        assert!(matches!(generate_script(1, 5, 3, 0), Err(SimError::Unsatisfiable(_))));
    }

    #[test]
    fn trace_serialization() {
        let trace = run(&joins(3), CheckLevel::Full).unwrap();
        let jsonl = trace_to_jsonl(&trace);
        let last = jsonl.lines().last().unwrap();
        assert_eq!(
            last,
            r#"{"step":3,"event":"join","node":3,"edges_added":[[1,3],[2,3]],"edges_removed":[],"post_biconnected":true,"post_metrics":{"n":3,"edges":3,"avg_degree":2.0,"max_degree":2,"avg_hops":1.0}}"#
        );
    }
}
