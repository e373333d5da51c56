#![allow(dead_code)]

use blocksched::model::Block;
use blocksched::schedule::GraphSchedule;
use blocksched::workload::{gen_block, KeyModel, LengthMode, SizeRange, WorkloadSpec};
use blocksched::ConflictGraph;
use rand::seq::SliceRandom;
use rand::Rng;

pub const HETERO: [u64; 4] = [1, 10, 100, 1000];

/// A random block of `n` transactions over a small key universe.
pub fn random_block(rng: &mut impl Rng, n: usize, lengths: LengthMode) -> Block {
    let universe = rng.gen_range(n.max(2)..=2 * n.max(2));
    let keys = KeyModel::Uniform {
        universe,
        reads: SizeRange(0, 2),
        writes: SizeRange(1, 2),
    };
    gen_block(&WorkloadSpec::new(n, keys, lengths, rng.gen())).unwrap()
}

pub fn hetero_lengths() -> LengthMode {
    LengthMode::Heterogeneous {
        choices: HETERO.to_vec(),
    }
}

/// A valid schedule: every conflict oriented along a random order, plus
/// random extra edges consistent with that order.
pub fn random_valid_schedule(rng: &mut impl Rng, g: &ConflictGraph, extra: f64) -> GraphSchedule {
    let n = g.n();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut pos = vec![0; n];
    for (i, &v) in order.iter().enumerate() {
        pos[v] = i;
    }
    let mut edges: Vec<(usize, usize)> = g
        .edges()
        .map(|(u, v)| if pos[u] < pos[v] { (u, v) } else { (v, u) })
        .collect();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(extra) {
                edges.push((order[i], order[j]));
            }
        }
    }
    GraphSchedule::new(n, edges).unwrap()
}

/// A random legal ordered partition: greedy coloring from a random vertex
/// order, classes shuffled.
pub fn random_partition(rng: &mut impl Rng, g: &ConflictGraph) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..g.n()).collect();
    order.shuffle(rng);
    let mut classes = blocksched::coloring::greedy_coloring(g, &order).unwrap().classes();
    classes.shuffle(rng);
    classes
}
