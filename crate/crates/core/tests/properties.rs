mod common;

use blocksched::analysis::{
    est_chromatic, est_longest_path, level_latency, optimal_latency_of, OracleMode, OracleOptions,
};
use blocksched::coloring::{
    convert_to_coloring, exact_min_coloring, exact_min_weighted_coloring, greedy_by_degree, greedy_coloring,
};
use blocksched::conflict::{build_conflict_graph, conflicts};
use blocksched::executor::{execute_graph_schedule, execute_sequential, simulate_execution};
use blocksched::schedule::{batch_latency, batch_to_graph, is_valid_schedule, latency, level_schedule};
use blocksched::{BatchSchedule, Block, ConflictGraph, GlobalState, GraphSchedule};
use common::{hetero_lengths, random_block, random_partition, random_valid_schedule};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn graph(max_n: usize) -> impl Strategy<Value = ConflictGraph> {
    (1..=max_n).prop_flat_map(|n| {
        proptest::collection::vec(any::<bool>(), n * (n - 1) / 2).prop_map(move |bits| {
            let pairs = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v)));
            ConflictGraph::from_edges(n, pairs.zip(bits).filter(|(_, b)| *b).map(|(e, _)| e)).unwrap()
        })
    })
}

fn weighted_graph(max_n: usize) -> impl Strategy<Value = (ConflictGraph, Vec<u64>)> {
    graph(max_n).prop_flat_map(|g| {
        let n = g.n();
        (
            Just(g),
            proptest::collection::vec(prop::sample::select(vec![1u64, 10, 100, 1000]), n),
        )
    })
}

fn block(max_n: usize) -> impl Strategy<Value = Block> {
    (1..=max_n, any::<u64>())
        .prop_map(|(n, seed)| random_block(&mut ChaCha8Rng::seed_from_u64(seed), n, hetero_lengths()))
}

/// Longest simple path in edges, by exhaustive search.
fn longest_path(g: &ConflictGraph) -> usize {
    fn dfs(g: &ConflictGraph, v: usize, seen: &mut [bool]) -> usize {
        seen[v] = true;
        let mut best = 0;
        for &u in g.neighbors(v) {
            if !seen[u] {
                best = best.max(1 + dfs(g, u, seen));
            }
        }
        seen[v] = false;
        best
    }
    (0..g.n())
        .map(|v| dfs(g, v, &mut vec![false; g.n()]))
        .max()
        .unwrap_or(0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conflict_graph_matches_pairwise_relation(b in block(14)) {
        let g = build_conflict_graph(&b).unwrap();
        for x in &b.txs {
            for y in &b.txs {
                if x.id != y.id {
                    prop_assert_eq!(g.has_edge(x.id, y.id), conflicts(x, y).unwrap());
                }
            }
        }
    }

    #[test]
    fn block_json_round_trips(b in block(10)) {
        prop_assert_eq!(Block::from_json(&b.to_json()).unwrap(), b.clone());
        prop_assert_eq!(Block::from_json(&b.to_json_line()).unwrap().hash(), b.hash());
    }

    #[test]
    fn level_schedules_are_valid((g, lengths) in weighted_graph(10), seed in any::<u64>()) {
        let p = random_partition(&mut ChaCha8Rng::seed_from_u64(seed), &g);
        let s = level_schedule(&p, &g).unwrap();
        prop_assert!(is_valid_schedule(&s, &g).unwrap());
        prop_assert_eq!(latency(&s, &lengths).unwrap(), level_latency(&g, &lengths, &p).unwrap());
        // No level edge is implied by other edges.
        let desc = s.descendants();
        for (u, v) in s.edges() {
            let via_other = s.successors(u).iter().any(|&w| w != v && desc[w].contains(v));
            prop_assert!(!via_other, "edge {}->{} is redundant", u, v);
        }
    }

    #[test]
    fn converted_coloring_is_legal_and_no_slower((g, lengths) in weighted_graph(9), seed in any::<u64>()) {
        let s = random_valid_schedule(&mut ChaCha8Rng::seed_from_u64(seed), &g, 0.2);
        let c = convert_to_coloring(&s);
        prop_assert!(c.is_legal(&g));
        let unit = vec![1; g.n()];
        prop_assert_eq!(c.k() as u64, latency(&s, &unit).unwrap());
        let rebuilt = level_schedule(&c.classes(), &g).unwrap();
        prop_assert!(latency(&rebuilt, &lengths).unwrap() <= latency(&s, &lengths).unwrap());
    }

    #[test]
    fn colorings_are_ordered(g in graph(11)) {
        let exact = exact_min_coloring(&g, 64).unwrap();
        let greedy = greedy_by_degree(&g);
        prop_assert!(exact.is_legal(&g) && greedy.is_legal(&g));
        prop_assert!(exact.k() <= greedy.k());
        prop_assert_eq!(est_chromatic(&g), greedy.k());
        prop_assert!(est_chromatic(&g) >= exact.k());
        for fewer in 1..exact.k() as usize {
            prop_assert!(blocksched::analysis::colorings_with_k(&g, fewer).is_empty());
        }
    }

    #[test]
    fn weighted_coloring_is_minimal((g, lengths) in weighted_graph(8)) {
        let w = exact_min_weighted_coloring(&g, &lengths, 20).unwrap();
        prop_assert!(w.is_legal(&g));
        let exact = exact_min_coloring(&g, 64).unwrap();
        prop_assert!(w.weight(&lengths) <= exact.weight(&lengths));
        for k in 1..=g.n() {
            for classes in blocksched::analysis::colorings_with_k(&g, k) {
                let c = blocksched::Coloring::from_classes(g.n(), &classes).unwrap();
                prop_assert!(w.weight(&lengths) <= c.weight(&lengths));
            }
        }
    }

    #[test]
    fn oracle_is_a_lower_bound_and_modes_agree((g, lengths) in weighted_graph(7), seed in any::<u64>()) {
        let fast = optimal_latency_of(&g, &lengths, OracleOptions::default()).unwrap();
        let slow = optimal_latency_of(&g, &lengths, OracleOptions { mode: OracleMode::Orientations, ..Default::default() }).unwrap();
        prop_assert_eq!(fast.optimal_latency, slow.optimal_latency);
        prop_assert!(is_valid_schedule(&fast.schedule, &g).unwrap());
        let s = random_valid_schedule(&mut ChaCha8Rng::seed_from_u64(seed), &g, 0.1);
        prop_assert!(fast.optimal_latency <= latency(&s, &lengths).unwrap());
    }

    #[test]
    fn est_path_bounds(g in graph(11), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut order: Vec<usize> = (0..g.n()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let ell = est_longest_path(&g, &order).unwrap();
        prop_assert!(ell <= longest_path(&g));
        // Orienting conflicts by the same order gives a schedule whose unit
        // latency is at least the estimated path's vertex count.
        let block = blocksched::analysis::transform_graph_to_block(&g, 1);
        let mut pos = vec![0; g.n()];
        for (i, &v) in order.iter().enumerate() {
            pos[v] = i;
        }
        let s = GraphSchedule::new(g.n(), g.edges().map(|(u, v)| if pos[u] < pos[v] { (u, v) } else { (v, u) })).unwrap();
        prop_assert!((ell as u64) < latency(&s, &block.lengths()).unwrap());
    }

    #[test]
    fn simulation_matches_latency_and_serial_order(b in block(12), seed in any::<u64>()) {
        let g = build_conflict_graph(&b).unwrap();
        let s = random_valid_schedule(&mut ChaCha8Rng::seed_from_u64(seed), &g, 0.1);
        let (out, makespan) = simulate_execution(&b, &s, &GlobalState::new()).unwrap();
        prop_assert_eq!(makespan, latency(&s, &b.lengths()).unwrap());
        let reference = execute_sequential(&b, s.topo_order(), &GlobalState::new()).unwrap();
        prop_assert!(reference.equivalent(&out));
    }

    #[test]
    fn batch_latency_matches_graph(b in block(12), seed in any::<u64>()) {
        let g = build_conflict_graph(&b).unwrap();
        let batches = BatchSchedule::new(random_partition(&mut ChaCha8Rng::seed_from_u64(seed), &g), &g).unwrap();
        prop_assert_eq!(batch_latency(&batches, &b.lengths()).unwrap(), latency(&batch_to_graph(&batches), &b.lengths()).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn concurrent_execution_is_serializable(b in block(16), seed in any::<u64>()) {
        let g = build_conflict_graph(&b).unwrap();
        let s = random_valid_schedule(&mut ChaCha8Rng::seed_from_u64(seed), &g, 0.05);
        let out = execute_graph_schedule(&b, &s, &GlobalState::new()).unwrap();
        let reference = execute_sequential(&b, s.topo_order(), &GlobalState::new()).unwrap();
        prop_assert!(reference.equivalent(&out), "{:?}", reference.diff(&out));
        let mut ids: Vec<usize> = out.results.iter().map(|r| r.tx_id).collect();
        ids.sort_unstable();
        prop_assert_eq!(ids, (0..b.len()).collect::<Vec<_>>());
    }
}

#[test]
fn greedy_in_id_order_is_legal() {
    let g = ConflictGraph::cycle(7);
    let order: Vec<usize> = (0..7).collect();
    assert!(greedy_coloring(&g, &order).unwrap().is_legal(&g));
}

#[test]
fn degree_greedy_is_within_one_color_on_random_graphs() {
    let mut worst = 0;
    for n in [8, 12, 16, 20] {
        for p in [0.1, 0.3, 0.5, 0.7] {
            for sample in 0..10 {
                let g =
                    blocksched::analysis::gnp_graph(n, p, blocksched::analysis::sample_seed(7, n, p, sample)).unwrap();
                let gap = greedy_by_degree(&g).k() - exact_min_coloring(&g, 64).unwrap().k();
                worst = worst.max(gap);
            }
        }
    }
    assert!(worst <= 1, "greedy used {worst} extra colors");
}
