//! Graph schedules (dependency DAGs over a block's transactions), batch
//! schedules, and the operations that build and measure them.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};
use std::fmt::Write as _;

use fixedbitset::FixedBitSet;
use num_rational::Ratio;

use crate::coloring::Coloring;
use crate::conflict::ConflictGraph;
use crate::error::{Error, Result};
use crate::model::Block;

/// A DAG over `0..n`; an edge `u -> v` means `u` runs before `v`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphSchedule {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
    succ: Vec<Vec<usize>>,
    pred: Vec<Vec<usize>>,
    topo: Vec<usize>,
}

impl GraphSchedule {
    /// Builds a schedule, rejecting self-loops, out-of-range vertices and cycles.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            for x in [u, v] {
                if x >= n {
                    return Err(Error::VertexOutOfRange { v: x, n });
                }
            }
            if u == v {
                return Err(Error::SelfLoop(u));
            }
            set.insert((u, v));
        }
        let mut succ = vec![Vec::new(); n];
        let mut pred = vec![Vec::new(); n];
        for &(u, v) in &set {
            succ[u].push(v);
            pred[v].push(u);
        }
        for p in &mut pred {
            p.sort_unstable();
        }

        // Kahn's algorithm, smallest ready id first.
        let mut indeg: Vec<usize> = pred.iter().map(Vec::len).collect();
        let mut ready: BinaryHeap<Reverse<usize>> = (0..n).filter(|&v| indeg[v] == 0).map(Reverse).collect();
        let mut topo = Vec::with_capacity(n);
        while let Some(Reverse(v)) = ready.pop() {
            topo.push(v);
            for &w in &succ[v] {
                indeg[w] -= 1;
                if indeg[w] == 0 {
                    ready.push(Reverse(w));
                }
            }
        }
        if topo.len() != n {
            return Err(Error::Cycle);
        }
        Ok(GraphSchedule {
            n,
            edges: set,
            succ,
            pred,
            topo,
        })
    }

    pub fn empty(n: usize) -> Self {
        GraphSchedule::new(n, []).expect("no edges, no cycle")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edges.contains(&(u, v))
    }

    pub fn successors(&self, v: usize) -> &[usize] {
        &self.succ[v]
    }

    pub fn predecessors(&self, v: usize) -> &[usize] {
        &self.pred[v]
    }

    /// A topological order; among ready vertices the smallest id comes first.
    pub fn topo_order(&self) -> &[usize] {
        &self.topo
    }

    /// `descendants()[u]` contains every `v` with a non-empty path `u ~> v`.
    pub fn descendants(&self) -> Vec<FixedBitSet> {
        let mut desc = vec![FixedBitSet::with_capacity(self.n); self.n];
        for &u in self.topo.iter().rev() {
            let mut set = FixedBitSet::with_capacity(self.n);
            for &w in &self.succ[u] {
                set.insert(w);
                set.union_with(&desc[w]);
            }
            desc[u] = set;
        }
        desc
    }

    /// Header `n k` (vertex and edge counts), then `u v` per edge, sorted.
    pub fn dump(&self) -> String {
        let mut out = format!("{} {}\n", self.n, self.edges.len());
        for (u, v) in self.edges() {
            writeln!(out, "{u} {v}").unwrap();
        }
        out
    }
}

/// Every conflicting pair is connected by a directed path in one direction.
pub fn is_valid_schedule(s: &GraphSchedule, g: &ConflictGraph) -> Result<bool> {
    if s.n() != g.n() {
        return Err(Error::VertexMismatch {
            schedule: s.n(),
            graph: g.n(),
        });
    }
    let desc = s.descendants();
    Ok(g.edges().all(|(u, v)| desc[u].contains(v) || desc[v].contains(u)))
}

fn check_lengths(n: usize, lengths: &[u64]) -> Result<()> {
    if lengths.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: lengths.len(),
        });
    }
    Ok(())
}

/// For every vertex, the heaviest path ending at it (inclusive), weighted by
/// vertex lengths. This is also its finish time with unbounded processors.
pub fn finish_times(s: &GraphSchedule, lengths: &[u64]) -> Result<Vec<u64>> {
    check_lengths(s.n(), lengths)?;
    let mut finish = vec![0u64; s.n()];
    for &v in s.topo_order() {
        let start = s.predecessors(v).iter().map(|&u| finish[u]).max().unwrap_or(0);
        finish[v] = start + lengths[v];
    }
    Ok(finish)
}

/// The heaviest vertex-weighted path of the DAG (0 for an empty block).
pub fn latency(s: &GraphSchedule, lengths: &[u64]) -> Result<u64> {
    Ok(finish_times(s, lengths)?.into_iter().max().unwrap_or(0))
}

/// Checks that `partition` covers `0..n` exactly once with conflict-free sets.
pub fn check_partition(partition: &[Vec<usize>], g: &ConflictGraph) -> Result<Vec<usize>> {
    let n = g.n();
    let mut level = vec![usize::MAX; n];
    for (i, set) in partition.iter().enumerate() {
        for &v in set {
            if v >= n {
                return Err(Error::VertexOutOfRange { v, n });
            }
            if level[v] != usize::MAX {
                return Err(Error::NotAPartition(format!(
                    "transaction {v} appears in more than one set"
                )));
            }
            level[v] = i;
        }
        if let Some((u, v)) = g.first_conflict_in(set) {
            return Err(Error::IllegalPartition(u, v));
        }
    }
    if let Some(v) = level.iter().position(|&l| l == usize::MAX) {
        return Err(Error::NotAPartition(format!("transaction {v} is not covered")));
    }
    Ok(level)
}

/// Builds the level schedule of an ordered partition into conflict-free sets.
///
/// For each level `i` and each earlier level `j` (nearest first), a conflict
/// pair `u in B_j`, `v in B_i` gets an edge `u -> v` unless a path `u ~> v`
/// already exists. Ancestor sets are maintained incrementally: when level `i`
/// is processed, every lower vertex's ancestor set is final.
pub fn level_schedule(partition: &[Vec<usize>], g: &ConflictGraph) -> Result<GraphSchedule> {
    let n = g.n();
    let level = check_partition(partition, g)?;
    let mut ancestors = vec![FixedBitSet::with_capacity(n); n];
    let mut edges = Vec::new();
    let mut lower: Vec<usize> = Vec::new();
    for set in partition {
        for &v in set {
            lower.clear();
            lower.extend(g.neighbors(v).iter().copied().filter(|&u| level[u] < level[v]));
            lower.sort_by_key(|&u| (Reverse(level[u]), u));
            for &u in &lower {
                if ancestors[v].contains(u) {
                    continue;
                }
                edges.push((u, v));
                let (left, right) = ancestors.split_at_mut(u.max(v));
                let (anc_v, anc_u) = if v < u {
                    (&mut left[v], &right[0])
                } else {
                    (&mut right[0], &left[u])
                };
                anc_v.union_with(anc_u);
                anc_v.insert(u);
            }
        }
    }
    GraphSchedule::new(n, edges)
}

/// Directs every conflict edge from the earlier to the later transaction in
/// block list order. No transitive pruning.
pub fn total_order_schedule(block: &Block, g: &ConflictGraph) -> Result<GraphSchedule> {
    if block.len() != g.n() {
        return Err(Error::VertexMismatch {
            schedule: block.len(),
            graph: g.n(),
        });
    }
    let mut pos = vec![0usize; g.n()];
    for (i, tx) in block.txs.iter().enumerate() {
        if tx.id >= g.n() {
            return Err(Error::TxIdOutOfRange { id: tx.id, n: g.n() });
        }
        pos[tx.id] = i;
    }
    GraphSchedule::new(
        g.n(),
        g.edges().map(|(u, v)| if pos[u] < pos[v] { (u, v) } else { (v, u) }),
    )
}

/// An ordered sequence of conflict-free batches covering the block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchSchedule {
    batches: Vec<Vec<usize>>,
}

impl BatchSchedule {
    pub fn new(batches: Vec<Vec<usize>>, g: &ConflictGraph) -> Result<Self> {
        if let Some(i) = batches.iter().position(Vec::is_empty) {
            return Err(Error::EmptyBatch(i));
        }
        check_partition(&batches, g)?;
        Ok(BatchSchedule { batches })
    }

    pub fn batches(&self) -> &[Vec<usize>] {
        &self.batches
    }

    pub fn n(&self) -> usize {
        self.batches.iter().map(Vec::len).sum()
    }
}

/// Full bipartite edges between consecutive batches.
pub fn batch_to_graph(b: &BatchSchedule) -> GraphSchedule {
    let mut edges = Vec::new();
    for pair in b.batches.windows(2) {
        for &u in &pair[0] {
            for &v in &pair[1] {
                edges.push((u, v));
            }
        }
    }
    GraphSchedule::new(b.n(), edges).expect("consecutive-batch edges are acyclic")
}

/// Either kind of schedule a runner may produce.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Schedule {
    Graph(GraphSchedule),
    Batch(BatchSchedule),
}

impl Schedule {
    pub fn n(&self) -> usize {
        match self {
            Schedule::Graph(s) => s.n(),
            Schedule::Batch(b) => b.n(),
        }
    }

    /// The graph form; batches become full bipartite edges between neighbors.
    pub fn to_graph(&self) -> GraphSchedule {
        match self {
            Schedule::Graph(s) => s.clone(),
            Schedule::Batch(b) => batch_to_graph(b),
        }
    }

    pub fn latency(&self, lengths: &[u64]) -> Result<u64> {
        match self {
            Schedule::Graph(s) => latency(s, lengths),
            Schedule::Batch(b) => batch_latency(b, lengths),
        }
    }

    /// A serial order consistent with the schedule.
    pub fn serial_order(&self) -> Vec<usize> {
        match self {
            Schedule::Graph(s) => s.topo_order().to_vec(),
            Schedule::Batch(b) => b.batches().concat(),
        }
    }

    /// Valid for `g`: every conflict is ordered (graph) or split across
    /// batches (batch).
    pub fn is_valid_for(&self, g: &ConflictGraph) -> Result<bool> {
        match self {
            Schedule::Graph(s) => is_valid_schedule(s, g),
            Schedule::Batch(b) => {
                if b.n() != g.n() {
                    return Err(Error::VertexMismatch {
                        schedule: b.n(),
                        graph: g.n(),
                    });
                }
                Ok(check_partition(b.batches(), g).is_ok())
            }
        }
    }
}

/// Sum over batches of the longest member.
pub fn batch_latency(b: &BatchSchedule, lengths: &[u64]) -> Result<u64> {
    check_lengths(b.n(), lengths)?;
    let mut total = 0;
    for (i, batch) in b.batches.iter().enumerate() {
        total += batch.iter().map(|&v| lengths[v]).max().ok_or(Error::EmptyBatch(i))?;
    }
    Ok(total)
}

/// Reorders sets: position `i` of the result holds `partition[perm[i] - 1]`.
/// `perm` is a permutation of `1..=k`.
pub fn reorder_partition(partition: &[Vec<usize>], perm: &[usize]) -> Result<Vec<Vec<usize>>> {
    let k = partition.len();
    if perm.len() != k {
        return Err(Error::BadPermutation(format!(
            "expected {k} entries, got {}",
            perm.len()
        )));
    }
    let mut seen = vec![false; k + 1];
    for &p in perm {
        if p == 0 || p > k || std::mem::replace(&mut seen[p], true) {
            return Err(Error::BadPermutation(format!(
                "{perm:?} is not a permutation of 1..={k}"
            )));
        }
    }
    Ok(perm.iter().map(|&p| partition[p - 1].clone()).collect())
}

/// How a coloring's classes are ordered before level scheduling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ColorOrder {
    /// Color 1 first.
    Ascending,
    /// Larger classes first, so most transactions finish early.
    #[default]
    SizeDescending,
}

/// Color classes by descending size; equal sizes keep ascending color order.
pub fn size_descending_color_order(c: &Coloring) -> Vec<Vec<usize>> {
    let mut classes = c.classes();
    classes.sort_by_key(|set| Reverse(set.len()));
    classes
}

pub fn ordered_partition(c: &Coloring, order: ColorOrder) -> Vec<Vec<usize>> {
    match order {
        ColorOrder::Ascending => c.classes(),
        ColorOrder::SizeDescending => size_descending_color_order(c),
    }
}

/// One line per level, ids separated by spaces.
pub fn dump_levels(partition: &[Vec<usize>]) -> String {
    let mut out = String::new();
    for set in partition {
        let line: Vec<String> = set.iter().map(ToString::to_string).collect();
        writeln!(out, "{}", line.join(" ")).unwrap();
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatencyReport {
    pub block_latency: u64,
    /// Indexed by transaction id.
    pub per_tx_finish: Vec<u64>,
    pub mean_latency: Ratio<u64>,
    /// Nearest-rank 95th percentile of the finish times.
    pub p95_latency: u64,
}

impl LatencyReport {
    pub fn mean_f64(&self) -> f64 {
        *self.mean_latency.numer() as f64 / *self.mean_latency.denom() as f64
    }
}

pub fn latency_stats(s: &GraphSchedule, lengths: &[u64]) -> Result<LatencyReport> {
    let finish = finish_times(s, lengths)?;
    let n = finish.len() as u64;
    let block_latency = finish.iter().copied().max().unwrap_or(0);
    let mean_latency = if n == 0 {
        Ratio::from_integer(0)
    } else {
        Ratio::new(finish.iter().sum(), n)
    };
    let mut sorted = finish.clone();
    sorted.sort_unstable();
    let p95_latency = if n == 0 {
        0
    } else {
        let rank = (95 * n).div_ceil(100).max(1);
        sorted[rank as usize - 1]
    };
    Ok(LatencyReport {
        block_latency,
        per_tx_finish: finish,
        mean_latency,
        p95_latency,
    })
}
