use bimesh::sim::{
    generate_script, run, run_with, trace_to_jsonl, ChurnScript, CheckLevel, EventKind, RunOptions,
    SimError,
};
use bimesh::{NodeId, TieBreakPolicy};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn replay_is_byte_identical(seed in any::<u64>(), joins in 3usize..40, fails in 0usize..10, prune in 0usize..6) {
        prop_assume!(joins >= fails + 3);
        let script = generate_script(seed, joins, fails, prune).unwrap();
        prop_assert_eq!(script.to_string(), generate_script(seed, joins, fails, prune).unwrap().to_string());
        let a = trace_to_jsonl(&run(&script, CheckLevel::Full).unwrap());
        let b = trace_to_jsonl(&run(&script, CheckLevel::Full).unwrap());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn script_text_round_trips(seed in any::<u64>(), joins in 3usize..30, fails in 0usize..8, prune in 0usize..4, random in any::<bool>()) {
        prop_assume!(joins >= fails + 3);
        let mut script = generate_script(seed, joins, fails, prune).unwrap();
        if random {
            script.policy = TieBreakPolicy::SeededRandom { seed };
        }
        let parsed = ChurnScript::parse(&script.to_string()).unwrap();
        prop_assert_eq!(parsed, script);
    }

    #[test]
    fn churn_keeps_mesh_biconnected(seed in any::<u64>(), joins in 3usize..60, fails in 0usize..20, prune in 0usize..5) {
        prop_assume!(joins >= fails + 3);
        let script = generate_script(seed, joins, fails, prune).unwrap();
        script.validate().unwrap();
        let trace = run_with(&script, RunOptions::new(CheckLevel::Biconnectivity).without_hops()).unwrap();
        let mut previous = false;
        for (entry, event) in trace.iter().zip(&script.events) {
            if entry.post_metrics.n >= 3 {
                prop_assert!(entry.post_biconnected, "step {}", entry.step);
            }
            if event.kind == EventKind::Prune && previous {
                prop_assert!(entry.post_biconnected);
            }
            previous = entry.post_biconnected;
        }
    }
}

#[test]
fn violations_carry_the_shortest_failing_prefix() {
    let mut script = ChurnScript::new(5, TieBreakPolicy::LowestId);
    for _ in 0..3 {
        script.push(EventKind::Join);
    }
    for _ in 0..4 {
        script.push(EventKind::JoinExplicit([NodeId(1), NodeId(3)].into()));
    }
    script.push(EventKind::Prune);

    let Err(SimError::Violation(v)) = run(&script, CheckLevel::Full) else {
        panic!("expected a violation");
    };
    assert_eq!(v.step, 6);
    assert_eq!(v.trace.len(), 6);
    // the reproduction fails at its final event and every shorter prefix passes
    let repro = &v.reproduction;
    assert_eq!(repro.events.len(), 6);
    assert!(matches!(run(repro, CheckLevel::Full), Err(SimError::Violation(_))));
    for len in 0..repro.events.len() {
        assert!(run(&repro.prefix(len), CheckLevel::Full).is_ok(), "prefix {len}");
    }
    // and it survives a text round trip
    let reparsed = ChurnScript::parse(&repro.to_string()).unwrap();
    assert_eq!(&reparsed, repro);
}

#[test]
fn failing_the_tree_source_is_allowed() {
    let script = ChurnScript::parse("join\njoin\njoin\njoin\ntree 1\nfail 1\nprune\n").unwrap();
    let trace = run(&script, CheckLevel::Full).unwrap();
    assert!(trace.iter().skip(2).all(|t| t.post_biconnected));
}
