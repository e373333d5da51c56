//! Legal colorings (partitions into conflict-free sets) of a conflict graph.
//!
//! Colors are 1-based. Every tie in this module is broken by descending
//! degree, then ascending vertex id, so equal inputs always produce equal
//! color vectors.

use std::cmp::Reverse;
use std::fmt::Write as _;

use crate::conflict::ConflictGraph;
use crate::error::{Error, Result};
use crate::schedule::GraphSchedule;

pub const DEFAULT_EXACT_CAP: usize = 64;
pub const DEFAULT_WEIGHTED_CAP: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Coloring {
    colors: Vec<u32>,
    k: u32,
}

impl Coloring {
    /// Wraps a color vector indexed by vertex. Colors must be `>= 1` and every
    /// color up to the maximum must be used.
    pub fn new(colors: Vec<u32>) -> Result<Self> {
        let k = colors.iter().copied().max().unwrap_or(0);
        let mut used = vec![false; k as usize + 1];
        for &c in &colors {
            used[c as usize] = true;
        }
        if used[0] {
            return Err(Error::UnusedColor(0));
        }
        if let Some(c) = (1..=k).find(|&c| !used[c as usize]) {
            return Err(Error::UnusedColor(c));
        }
        Ok(Coloring { colors, k })
    }

    /// Coloring that gives `classes[i]` color `i + 1`.
    pub fn from_classes(n: usize, classes: &[Vec<usize>]) -> Result<Self> {
        let mut colors = vec![0u32; n];
        for (i, class) in classes.iter().enumerate() {
            for &v in class {
                if v >= n {
                    return Err(Error::VertexOutOfRange { v, n });
                }
                if colors[v] != 0 {
                    return Err(Error::NotAPartition(format!("vertex {v} appears twice")));
                }
                colors[v] = i as u32 + 1;
            }
        }
        if let Some(v) = colors.iter().position(|&c| c == 0) {
            return Err(Error::NotAPartition(format!("vertex {v} is not covered")));
        }
        Coloring::new(colors)
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn n(&self) -> usize {
        self.colors.len()
    }

    pub fn color(&self, v: usize) -> u32 {
        self.colors[v]
    }

    pub fn colors(&self) -> &[u32] {
        &self.colors
    }

    pub fn is_legal(&self, g: &ConflictGraph) -> bool {
        self.check_legal(g).is_ok()
    }

    pub fn check_legal(&self, g: &ConflictGraph) -> Result<()> {
        if g.n() != self.n() {
            return Err(Error::VertexMismatch {
                schedule: self.n(),
                graph: g.n(),
            });
        }
        match g.edges().find(|&(u, v)| self.colors[u] == self.colors[v]) {
            Some((u, v)) => Err(Error::IllegalColoring(u, v, self.colors[u])),
            None => Ok(()),
        }
    }

    /// Color classes in color order; `classes()[c - 1]` holds color `c`, sorted.
    pub fn classes(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k as usize];
        for (v, &c) in self.colors.iter().enumerate() {
            out[c as usize - 1].push(v);
        }
        out
    }

    /// Sum over colors of the longest member length.
    pub fn weight(&self, lengths: &[u64]) -> u64 {
        let mut w = vec![0u64; self.k as usize];
        for (v, &c) in self.colors.iter().enumerate() {
            let slot = &mut w[c as usize - 1];
            *slot = (*slot).max(lengths[v]);
        }
        w.iter().sum()
    }

    /// `id color` per line, sorted by id.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (v, c) in self.colors.iter().enumerate() {
            writeln!(out, "{v} {c}").unwrap();
        }
        out
    }
}

/// Vertex ids by degree descending, ties by ascending id.
pub fn descending_degree_order(g: &ConflictGraph) -> Vec<usize> {
    let mut order: Vec<usize> = (0..g.n()).collect();
    order.sort_by_key(|&v| (Reverse(g.degree(v)), v));
    order
}

pub(crate) fn check_permutation(order: &[usize], n: usize) -> Result<()> {
    if order.len() != n {
        return Err(Error::NotPermutation(n));
    }
    let mut seen = vec![false; n];
    for &v in order {
        if v >= n || std::mem::replace(&mut seen[v], true) {
            return Err(Error::NotPermutation(n));
        }
    }
    Ok(())
}

/// First-fit greedy coloring in the given vertex order.
pub fn greedy_coloring(g: &ConflictGraph, order: &[usize]) -> Result<Coloring> {
    check_permutation(order, g.n())?;
    let mut colors = vec![0u32; g.n()];
    let mut taken: Vec<bool> = Vec::new();
    for &v in order {
        taken.clear();
        taken.resize(g.degree(v) + 2, false);
        for &u in g.neighbors(v) {
            let c = colors[u] as usize;
            if c != 0 && c < taken.len() {
                taken[c] = true;
            }
        }
        colors[v] = (1..taken.len())
            .find(|&c| !taken[c])
            .expect("degree + 1 colors always suffice") as u32;
    }
    Coloring::new(colors)
}

/// Greedy coloring in descending-degree order.
pub fn greedy_by_degree(g: &ConflictGraph) -> Coloring {
    greedy_coloring(g, &descending_degree_order(g)).expect("degree order is a permutation")
}

/// Size of a large clique found greedily from every start vertex. A lower
/// bound on the chromatic number.
fn clique_lower_bound(masks: &[u64], order: &[usize]) -> u32 {
    let mut best = if masks.is_empty() { 0 } else { 1 };
    for (i, &start) in order.iter().enumerate() {
        let mut candidates = masks[start];
        let mut size = 1;
        for &v in order[i + 1..].iter().chain(&order[..i]) {
            if candidates & (1 << v) != 0 {
                size += 1;
                candidates &= masks[v];
            }
        }
        best = best.max(size);
    }
    best
}

/// A minimum coloring by branch and bound.
///
/// Vertices are assigned in descending-degree order, colors tried ascending,
/// and a new color is opened only after all used ones. The first optimum found
/// is returned, so the result is deterministic.
pub fn exact_min_coloring(g: &ConflictGraph, cap: usize) -> Result<Coloring> {
    let n = g.n();
    if n > cap.min(64) {
        return Err(Error::Capacity {
            what: "exact coloring",
            n,
            cap: cap.min(64),
            hint: "; use greedy coloring instead",
        });
    }
    let order = descending_degree_order(g);
    let upper = greedy_coloring(g, &order)?;
    let masks = g.masks();
    let lower = clique_lower_bound(&masks, &order);
    if upper.k() <= lower {
        return Ok(upper);
    }

    struct Search<'a> {
        order: &'a [usize],
        masks: &'a [u64],
        lower: u32,
        best_k: u32,
        best: Option<Vec<u32>>,
        colors: Vec<u32>,
        class_masks: Vec<u64>,
    }

    impl Search<'_> {
        fn run(&mut self, i: usize, used: u32) {
            if used >= self.best_k {
                return;
            }
            if i == self.order.len() {
                self.best_k = used;
                self.best = Some(self.colors.clone());
                return;
            }
            let v = self.order[i];
            let open_new = used + 1 < self.best_k;
            let limit = if open_new { used + 1 } else { used };
            for c in 0..limit {
                if self.class_masks[c as usize] & self.masks[v] != 0 {
                    continue;
                }
                self.class_masks[c as usize] |= 1 << v;
                self.colors[v] = c + 1;
                self.run(i + 1, used.max(c + 1));
                self.class_masks[c as usize] &= !(1 << v);
                if self.best_k <= self.lower {
                    return;
                }
                // Colors may have become too expensive after an improvement.
                if c + 1 >= self.best_k {
                    break;
                }
            }
        }
    }

    let mut search = Search {
        order: &order,
        masks: &masks,
        lower,
        best_k: upper.k(),
        best: None,
        colors: vec![0; n],
        class_masks: vec![0; n + 1],
    };
    search.run(0, 0);
    match search.best {
        Some(colors) => Coloring::new(colors),
        None => Ok(upper),
    }
}

/// A coloring minimizing the sum over colors of the longest member.
///
/// Exhaustive over canonical colorings (colors numbered by first appearance in
/// descending-degree order), pruned by the running weight. Among optima the
/// lexicographically smallest color vector, read in that vertex order, wins.
pub fn exact_min_weighted_coloring(g: &ConflictGraph, lengths: &[u64], cap: usize) -> Result<Coloring> {
    let n = g.n();
    if lengths.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: lengths.len(),
        });
    }
    if n > cap.min(64) {
        return Err(Error::Capacity {
            what: "exact weighted coloring",
            n,
            cap: cap.min(64),
            hint: "; use greedy coloring instead",
        });
    }
    let order = descending_degree_order(g);
    let masks = g.masks();

    struct Search<'a> {
        order: &'a [usize],
        masks: &'a [u64],
        lengths: &'a [u64],
        best_cost: u64,
        best: Option<Vec<u32>>,
        colors: Vec<u32>,
        class_masks: Vec<u64>,
        class_weight: Vec<u64>,
    }

    impl Search<'_> {
        /// Every unassigned vertex adjacent to all open classes needs a fresh class.
        fn forced_new_class(&self, i: usize, used: usize) -> u64 {
            let mut forced = 0;
            for &v in &self.order[i..] {
                if (0..used).all(|c| self.class_masks[c] & self.masks[v] != 0) {
                    forced = forced.max(self.lengths[v]);
                }
            }
            forced
        }

        fn run(&mut self, i: usize, used: usize, cost: u64) {
            if cost >= self.best_cost {
                return;
            }
            if i == self.order.len() {
                self.best_cost = cost;
                self.best = Some(self.colors.clone());
                return;
            }
            if cost + self.forced_new_class(i, used) >= self.best_cost {
                return;
            }
            let v = self.order[i];
            let len = self.lengths[v];
            for c in 0..=used {
                if c < used && self.class_masks[c] & self.masks[v] != 0 {
                    continue;
                }
                let old_w = self.class_weight[c];
                let new_w = old_w.max(len);
                self.class_masks[c] |= 1 << v;
                self.class_weight[c] = new_w;
                self.colors[v] = c as u32 + 1;
                self.run(i + 1, used.max(c + 1), cost - old_w + new_w);
                self.class_masks[c] &= !(1 << v);
                self.class_weight[c] = old_w;
            }
        }
    }

    let upper = greedy_coloring(g, &order)?;
    let mut search = Search {
        order: &order,
        masks: &masks,
        lengths,
        // Strictly greater than the greedy weight so the search itself finds
        // the canonical optimum even when greedy is already optimal.
        best_cost: upper.weight(lengths) + 1,
        best: None,
        colors: vec![0; n],
        class_masks: vec![0; n + 1],
        class_weight: vec![0; n + 1],
    };
    search.run(0, 0, 0);
    Coloring::new(
        search
            .best
            .expect("greedy weight bounds the optimum, so a coloring is found"),
    )
}

/// Colors each vertex by its depth in the scheduling DAG, counted in vertices
/// (sources get 1). For a valid schedule this is a legal coloring with as many
/// colors as the DAG has levels.
pub fn convert_to_coloring(s: &GraphSchedule) -> Coloring {
    let mut depth = vec![1u32; s.n()];
    for &v in s.topo_order() {
        for &w in s.successors(v) {
            depth[w] = depth[w].max(depth[v] + 1);
        }
    }
    Coloring::new(depth).expect("depths are contiguous from 1")
}

/// [`convert_to_coloring`], failing when `s` is not valid for `g` (the
/// result would not be guaranteed legal).
pub fn convert_to_coloring_checked(s: &GraphSchedule, g: &ConflictGraph) -> Result<Coloring> {
    if !crate::schedule::is_valid_schedule(s, g)? {
        return Err(Error::InvalidSchedule);
    }
    let c = convert_to_coloring(s);
    c.check_legal(g)
        .map_err(|e| Error::Invariant(format!("depth coloring of a valid schedule: {e}")))?;
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edgeless_needs_one_color() {
        let g = ConflictGraph::new(5);
        assert_eq!(greedy_coloring(&g, &[4, 2, 0, 1, 3]).unwrap().k(), 1);
        assert_eq!(exact_min_coloring(&g, 64).unwrap().k(), 1);
    }

    #[test]
    fn triangle_needs_three() {
        let g = ConflictGraph::complete(3);
        for order in [[0, 1, 2], [2, 0, 1], [1, 2, 0]] {
            assert_eq!(greedy_coloring(&g, &order).unwrap().k(), 3);
        }
    }

    #[test]
    fn path_by_degree_uses_two() {
        let g = ConflictGraph::path(6);
        let c = greedy_by_degree(&g);
        assert_eq!(c.k(), 2);
        assert!(c.is_legal(&g));
    }

    #[test]
    fn greedy_rejects_non_permutations() {
        let g = ConflictGraph::path(3);
        assert!(matches!(greedy_coloring(&g, &[0, 1]), Err(Error::NotPermutation(3))));
        assert!(matches!(greedy_coloring(&g, &[0, 1, 1]), Err(Error::NotPermutation(3))));
    }

    #[test]
    fn degree_order_examples() {
        let star = ConflictGraph::from_edges(5, [(0, 1), (0, 2), (0, 3), (0, 4)]).unwrap();
        assert_eq!(descending_degree_order(&star), vec![0, 1, 2, 3, 4]);
        assert_eq!(descending_degree_order(&ConflictGraph::new(3)), vec![0, 1, 2]);
        assert_eq!(descending_degree_order(&ConflictGraph::path(4)), vec![1, 2, 0, 3]);
    }

    #[test]
    fn exact_small_graphs() {
        assert_eq!(exact_min_coloring(&ConflictGraph::cycle(5), 64).unwrap().k(), 3);
        assert_eq!(exact_min_coloring(&ConflictGraph::cycle(6), 64).unwrap().k(), 2);
        assert_eq!(exact_min_coloring(&ConflictGraph::path(2), 64).unwrap().k(), 2);
        assert_eq!(exact_min_coloring(&ConflictGraph::path(9), 64).unwrap().k(), 2);
        assert_eq!(exact_min_coloring(&ConflictGraph::complete(4), 64).unwrap().k(), 4);
    }

    #[test]
    fn exact_beats_greedy_on_crown() {
        // Crown graph: greedy in id order alternates badly, exact finds 2.
        let n = 4;
        let mut edges = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    edges.push((2 * i, 2 * j + 1));
                }
            }
        }
        let g = ConflictGraph::from_edges(2 * n, edges).unwrap();
        let id_order: Vec<usize> = (0..2 * n).collect();
        assert_eq!(greedy_coloring(&g, &id_order).unwrap().k(), 4);
        let exact = exact_min_coloring(&g, 64).unwrap();
        assert_eq!(exact.k(), 2);
        assert!(exact.is_legal(&g));
    }

    #[test]
    fn exact_cap_is_enforced() {
        let g = ConflictGraph::new(10);
        assert!(matches!(
            exact_min_coloring(&g, 8),
            Err(Error::Capacity { n: 10, cap: 8, .. })
        ));
        assert!(matches!(
            exact_min_weighted_coloring(&g, &[1; 10], 8),
            Err(Error::Capacity { n: 10, cap: 8, .. })
        ));
    }

    #[test]
    fn weighted_examples() {
        let c = exact_min_weighted_coloring(&ConflictGraph::new(3), &[5, 1, 2], 20).unwrap();
        assert_eq!((c.k(), c.weight(&[5, 1, 2])), (1, 5));
        let c = exact_min_weighted_coloring(&ConflictGraph::path(2), &[5, 1], 20).unwrap();
        assert_eq!((c.k(), c.weight(&[5, 1])), (2, 6));
    }

    #[test]
    fn weighted_prefers_more_colors_when_cheaper() {
        // a-b, b-c, c-d with a, d heavy: two colors cost 5 + 5, three cost 5 + 1 + 2.
        let g = ConflictGraph::from_edges(4, [(0, 1), (1, 2), (2, 3)]).unwrap();
        let lengths = [5, 1, 2, 5];
        let c = exact_min_weighted_coloring(&g, &lengths, 20).unwrap();
        assert_eq!(c.weight(&lengths), 8);
        assert_eq!(c.k(), 3);
        assert!(c.is_legal(&g));
    }

    #[test]
    fn classes_and_dump() {
        let c = Coloring::new(vec![2, 1, 2]).unwrap();
        assert_eq!(c.classes(), vec![vec![1], vec![0, 2]]);
        assert_eq!(c.dump(), "0 2\n1 1\n2 2\n");
        assert!(matches!(Coloring::new(vec![1, 3]), Err(Error::UnusedColor(2))));
    }

    #[test]
    fn convert_examples() {
        let path = GraphSchedule::new(3, [(0, 1), (1, 2)]).unwrap();
        assert_eq!(convert_to_coloring(&path).colors(), &[1, 2, 3]);
        let empty = GraphSchedule::new(3, []).unwrap();
        assert_eq!(convert_to_coloring(&empty).colors(), &[1, 1, 1]);
        let diamond = GraphSchedule::new(4, [(0, 1), (0, 2), (1, 3), (2, 3)]).unwrap();
        assert_eq!(convert_to_coloring(&diamond).colors(), &[1, 2, 2, 3]);
    }

    #[test]
    fn convert_checked_rejects_invalid_schedules() {
        let g = ConflictGraph::path(2);
        let s = GraphSchedule::new(2, []).unwrap();
        assert!(matches!(
            convert_to_coloring_checked(&s, &g),
            Err(Error::InvalidSchedule)
        ));
    }
}
