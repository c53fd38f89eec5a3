mod common;

use bimesh::mesh::is_redundant;
use bimesh::{NodeId, OverlayGraph};
use common::*;
use proptest::prelude::*;

fn small_graph(max_n: usize) -> impl Strategy<Value = Small> {
    (1..=max_n).prop_flat_map(|n| {
        let pairs = n * (n - 1) / 2;
        proptest::collection::vec(any::<bool>(), pairs).prop_map(move |bits| {
            let mut adj = vec![0u32; n];
            let mut k = 0;
            for u in 0..n {
                for v in u + 1..n {
                    if bits[k] {
                        adj[u] |= 1 << v;
                        adj[v] |= 1 << u;
                    }
                    k += 1;
                }
            }
            Small { n, adj }
        })
    })
}

fn id(v: usize) -> NodeId {
    NodeId(v as u64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn articulation_points_match_deletion(s in small_graph(12)) {
        let g = s.to_overlay();
        let fast: Vec<usize> = g.articulation_points().iter().map(|n| n.0 as usize).collect();
        prop_assert_eq!(fast, brute_articulation_points(&s));
    }

    #[test]
    fn biconnectivity_characterisations_agree(s in small_graph(12)) {
        let g = s.to_overlay();
        let bi = g.is_biconnected();
        prop_assert_eq!(bi, brute_biconnected(&s));
        if s.n >= 3 && s.connected() {
            prop_assert_eq!(bi, g.articulation_points().is_empty());
            let all_pairs = (0..s.n).all(|u| {
                (u + 1..s.n).all(|v| g.has_two_node_disjoint_paths(id(u), id(v)).unwrap())
            });
            prop_assert_eq!(bi, all_pairs);
        }
    }

    #[test]
    fn path_pairs_are_valid_and_agree(s in small_graph(10)) {
        let g = s.to_overlay();
        for u in 0..s.n {
            for v in u + 1..s.n {
                let exists = g.has_two_node_disjoint_paths(id(u), id(v)).unwrap();
                prop_assert_eq!(exists, brute_two_paths_by_deletion(&s, u, v));
                match g.node_disjoint_path_pair(id(u), id(v)).unwrap() {
                    Some(pair) => {
                        prop_assert!(exists);
                        prop_assert!(pair.is_valid_in(&g), "{:?}", pair);
                        prop_assert_eq!(pair.first[0], id(u));
                        prop_assert_eq!(*pair.first.last().unwrap(), id(v));
                    }
                    None => prop_assert!(!exists),
                }
            }
        }
    }

    #[test]
    fn redundancy_matches_path_enumeration(s in small_graph(7)) {
        let g = s.to_overlay();
        for (u, v) in s.edges() {
            prop_assert_eq!(
                is_redundant(&g, id(u), id(v)).unwrap(),
                brute_redundant_by_enumeration(&s, u, v)
            );
        }
    }

    #[test]
    fn bfs_matches_floyd_warshall(s in small_graph(12)) {
        let g = s.to_overlay();
        let d = floyd_warshall(&s);
        for src in 0..s.n {
            let hops = g.bfs_hops(id(src)).unwrap();
            for dst in 0..s.n {
                let expected = (dst != src && d[src][dst] != usize::MAX).then_some(d[src][dst]);
                prop_assert_eq!(hops.get(&id(dst)).copied(), expected);
            }
        }
    }

    #[test]
    fn json_round_trip(s in small_graph(9), traffic_mask in any::<u64>()) {
        let mut g = s.to_overlay();
        for (k, e) in g.edges().collect::<Vec<_>>().into_iter().enumerate() {
            if traffic_mask >> (k % 64) & 1 == 1 {
                g.set_traffic(e, true).unwrap();
            }
        }
        let back = OverlayGraph::from_json(&g.to_json()).unwrap();
        prop_assert_eq!(back.to_json(), g.to_json());
        prop_assert!(back.validate().is_ok());
    }
}

#[test]
fn mutations_keep_graph_valid() {
    let mut g = OverlayGraph::new();
    for v in 0..8u64 {
        g.add_node(NodeId(v)).unwrap();
    }
    for (u, v) in [(0u64, 1u64), (1, 2), (2, 3), (3, 0), (4, 5), (5, 6), (6, 7), (0, 4)] {
        g.add_edge(NodeId(u), NodeId(v)).unwrap();
    }
    g.remove_edge(NodeId(1), NodeId(2)).unwrap();
    g.remove_node(NodeId(5)).unwrap();
    assert!(g.validate().is_ok());
    assert_eq!(g.edge_count(), 5);
    assert_eq!(g.degree(NodeId(4)), Some(1));
}
