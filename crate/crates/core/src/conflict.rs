//! The conflict relation between transactions and the block's conflict graph.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::{Block, ObjectKey, Transaction};

/// Two transactions conflict when one writes what the other reads or writes.
pub fn conflicts(a: &Transaction, b: &Transaction) -> Result<bool> {
    if a.id == b.id {
        return Err(Error::SameTransaction(a.id));
    }
    Ok(intersects(&a.read_set, &b.write_set)
        || intersects(&a.write_set, &b.read_set)
        || intersects(&a.write_set, &b.write_set))
}

fn intersects(a: &BTreeSet<ObjectKey>, b: &BTreeSet<ObjectKey>) -> bool {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    small.iter().any(|k| large.contains(k))
}

/// Undirected simple graph over `0..n`. Neighbor lists are kept sorted.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConflictGraph {
    adjacency: Vec<Vec<usize>>,
    edge_count: usize,
}

impl ConflictGraph {
    pub fn new(n: usize) -> Self {
        ConflictGraph {
            adjacency: vec![Vec::new(); n],
            edge_count: 0,
        }
    }

    /// Builds a graph from an edge list. Duplicates collapse; self-loops and
    /// out-of-range endpoints are errors.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut g = ConflictGraph::new(n);
        for (u, v) in edges {
            g.add_edge(u, v)?;
        }
        Ok(g)
    }

    pub fn complete(n: usize) -> Self {
        let mut g = ConflictGraph::new(n);
        for u in 0..n {
            g.adjacency[u] = (0..n).filter(|&v| v != u).collect();
        }
        g.edge_count = n * n.saturating_sub(1) / 2;
        g
    }

    pub fn path(n: usize) -> Self {
        ConflictGraph::from_edges(n, (1..n).map(|i| (i - 1, i))).expect("path edges are in range")
    }

    pub fn cycle(n: usize) -> Self {
        let mut g = ConflictGraph::path(n);
        if n >= 3 {
            g.add_edge(n - 1, 0).expect("cycle edge is in range");
        }
        g
    }

    /// Adds `{u, v}`. Returns whether the edge was new.
    pub fn add_edge(&mut self, u: usize, v: usize) -> Result<bool> {
        let n = self.n();
        for x in [u, v] {
            if x >= n {
                return Err(Error::VertexOutOfRange { v: x, n });
            }
        }
        if u == v {
            return Err(Error::SelfLoop(u));
        }
        match self.adjacency[u].binary_search(&v) {
            Ok(_) => Ok(false),
            Err(pos) => {
                self.adjacency[u].insert(pos, v);
                let pos = self.adjacency[v].binary_search(&u).unwrap_err();
                self.adjacency[v].insert(pos, u);
                self.edge_count += 1;
                Ok(true)
            }
        }
    }

    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.n() && self.adjacency[u].binary_search(&v).is_ok()
    }

    /// Edges as `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(u, ns)| ns.iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
    }

    /// No two members are adjacent.
    pub fn is_independent(&self, set: &[usize]) -> bool {
        self.first_conflict_in(set).is_none()
    }

    pub(crate) fn first_conflict_in(&self, set: &[usize]) -> Option<(usize, usize)> {
        for (i, &u) in set.iter().enumerate() {
            for &v in &set[i + 1..] {
                if self.has_edge(u, v) {
                    return Some((u.min(v), u.max(v)));
                }
            }
        }
        None
    }

    /// Adjacency as `u64` masks. Only valid for `n <= 64`.
    pub(crate) fn masks(&self) -> Vec<u64> {
        debug_assert!(self.n() <= 64);
        self.adjacency
            .iter()
            .map(|ns| ns.iter().fold(0u64, |m, &v| m | (1 << v)))
            .collect()
    }

    /// Edge list dump: one `i j` per line with `i < j`, sorted.
    pub fn dump_edges(&self) -> String {
        let mut out = String::new();
        for (u, v) in self.edges() {
            writeln!(out, "{u} {v}").unwrap();
        }
        out
    }
}

/// Builds the conflict graph of a validated block.
///
/// Pairs are discovered through a per-key index of readers and writers, so
/// the cost is proportional to the number of (writer, accessor) pairs per key
/// rather than to `n^2`.
pub fn build_conflict_graph(block: &Block) -> Result<ConflictGraph> {
    block.validate()?;
    let mut by_key: BTreeMap<&ObjectKey, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for tx in &block.txs {
        for k in &tx.read_set {
            by_key.entry(k).or_default().0.push(tx.id);
        }
        for k in &tx.write_set {
            by_key.entry(k).or_default().1.push(tx.id);
        }
    }
    let mut g = ConflictGraph::new(block.len());
    for (readers, writers) in by_key.values() {
        for (i, &w) in writers.iter().enumerate() {
            for &other in readers.iter().chain(&writers[i + 1..]) {
                if other != w {
                    g.add_edge(w, other)?;
                }
            }
        }
    }
    Ok(g)
}
