//! Optimal-latency oracles, the graph-to-block transform, the chain-versus-
//! coloring vulnerability study, and counterexample searches.

use std::fmt::Write as _;

use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coloring::{check_permutation, exact_min_coloring, exact_min_weighted_coloring, greedy_by_degree, Coloring};
use crate::conflict::{build_conflict_graph, ConflictGraph};
use crate::error::{Error, Result};
use crate::model::{Block, Transaction, TxProgram};
use crate::par::{self, mix, Parallelism};
use crate::schedule::{check_partition, latency, level_schedule, reorder_partition, GraphSchedule};

/// Largest block the oracles accept by default.
pub const DEFAULT_ORACLE_CAP: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OracleMode {
    /// Search ordered legal partitions in which every vertex past the first
    /// level has a conflict neighbor in the level right before it.
    #[default]
    Partitions,
    /// Try every total order of the vertices and orient conflicts by it.
    /// Independent of the partition search; `n!` work.
    Orientations,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleOptions {
    pub cap: usize,
    pub mode: OracleMode,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            cap: DEFAULT_ORACLE_CAP,
            mode: OracleMode::Partitions,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleResult {
    /// A level schedule achieving the optimum.
    pub schedule: GraphSchedule,
    pub optimal_latency: u64,
    /// The ordered partition `schedule` was built from.
    pub partition: Vec<Vec<usize>>,
}

/// Minimum latency over all valid schedules of `block`, with a witness.
pub fn optimal_schedule_oracle(block: &Block) -> Result<OracleResult> {
    optimal_schedule_oracle_with(block, OracleOptions::default())
}

/// Like [`optimal_schedule_oracle`] with an explicit cap and search mode.
///
/// In partition mode the witness is the first optimum in the order that
/// compares partitions level by level as vertex bitmasks, so equal inputs
/// always produce the same witness.
pub fn optimal_schedule_oracle_with(block: &Block, opts: OracleOptions) -> Result<OracleResult> {
    let g = build_conflict_graph(block)?;
    optimal_latency_of(&g, &block.lengths(), opts)
}

/// Oracle over a bare graph and per-vertex lengths.
pub fn optimal_latency_of(g: &ConflictGraph, lengths: &[u64], opts: OracleOptions) -> Result<OracleResult> {
    let n = g.n();
    if lengths.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: lengths.len(),
        });
    }
    if n > opts.cap.min(64) {
        return Err(Error::Capacity {
            what: "optimal schedule oracle",
            n,
            cap: opts.cap.min(64),
            hint: "; raise the cap only for small inputs",
        });
    }
    let (best, partition) = match opts.mode {
        OracleMode::Partitions => PartitionSearch::run(g, lengths),
        OracleMode::Orientations => orientation_search(g, lengths),
    };
    let schedule = level_schedule(&partition, g)?;
    let got = latency(&schedule, lengths)?;
    if got != best {
        return Err(Error::Invariant(format!(
            "oracle witness has latency {got}, search found {best}"
        )));
    }
    Ok(OracleResult {
        schedule,
        optimal_latency: best,
        partition,
    })
}

struct PartitionSearch<'a> {
    adj: Vec<u64>,
    len: &'a [u64],
    finish: Vec<u64>,
    placed: u64,
    levels: Vec<u64>,
    best: u64,
    best_levels: Vec<u64>,
}

impl PartitionSearch<'_> {
    fn run(g: &ConflictGraph, lengths: &[u64]) -> (u64, Vec<Vec<usize>>) {
        let n = g.n();
        if n == 0 {
            return (0, Vec::new());
        }
        let mut s = PartitionSearch {
            adj: g.masks(),
            len: lengths,
            finish: vec![0; n],
            placed: 0,
            levels: Vec::new(),
            best: u64::MAX,
            best_levels: Vec::new(),
        };
        s.dfs(0, 0);
        let partition = s.best_levels.iter().map(|&m| bits(m).collect()).collect();
        (s.best, partition)
    }

    fn full(&self) -> u64 {
        if self.adj.len() == 64 {
            u64::MAX
        } else {
            (1u64 << self.adj.len()) - 1
        }
    }

    /// Latest finish among already placed neighbors of `v`.
    fn ready(&self, v: usize) -> u64 {
        bits(self.adj[v] & self.placed)
            .map(|u| self.finish[u])
            .max()
            .unwrap_or(0)
    }

    fn lower_bound(&self, remaining: u64, cur: u64) -> u64 {
        let mut lb = cur;
        let mut order: Vec<(u64, u64, usize)> = bits(remaining).map(|v| (self.ready(v), self.len[v], v)).collect();
        for &(r, l, _) in &order {
            lb = lb.max(r + l);
        }
        // A clique among the remaining vertices runs one after another.
        order.sort_by_key(|&(_, l, v)| (std::cmp::Reverse(l), v));
        let mut clique = 0u64;
        let (mut start, mut total) = (u64::MAX, 0u64);
        for &(r, l, v) in &order {
            if self.adj[v] & clique == clique {
                clique |= 1 << v;
                start = start.min(r);
                total += l;
            }
        }
        lb.max(start.saturating_add(total))
    }

    fn dfs(&mut self, prev: u64, cur: u64) {
        let remaining = self.full() & !self.placed;
        if remaining == 0 {
            if cur < self.best {
                self.best = cur;
                self.best_levels = self.levels.clone();
            }
            return;
        }
        if self.lower_bound(remaining, cur) >= self.best {
            return;
        }
        let cand = if prev == 0 {
            remaining
        } else {
            bits(remaining)
                .filter(|&v| self.adj[v] & prev != 0)
                .fold(0, |m, v| m | (1 << v))
        };
        let mut s = 0u64;
        loop {
            s = s.wrapping_sub(cand) & cand;
            if s == 0 {
                break;
            }
            if bits(s).any(|v| self.adj[v] & s != 0) {
                continue;
            }
            let mut next = cur;
            for v in bits(s) {
                self.finish[v] = self.ready(v) + self.len[v];
                next = next.max(self.finish[v]);
            }
            if next < self.best {
                self.placed |= s;
                self.levels.push(s);
                self.dfs(s, next);
                self.levels.pop();
                self.placed &= !s;
            }
        }
    }
}

fn bits(mut m: u64) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if m == 0 {
            None
        } else {
            let v = m.trailing_zeros() as usize;
            m &= m - 1;
            Some(v)
        }
    })
}

fn orientation_search(g: &ConflictGraph, lengths: &[u64]) -> (u64, Vec<Vec<usize>>) {
    let n = g.n();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = u64::MAX;
    let mut best_perm = perm.clone();
    let mut pos = vec![0; n];
    let mut finish = vec![0u64; n];
    loop {
        for (i, &v) in perm.iter().enumerate() {
            pos[v] = i;
        }
        let mut lt = 0;
        for &v in &perm {
            let ready = g
                .neighbors(v)
                .iter()
                .filter(|&&u| pos[u] < pos[v])
                .map(|&u| finish[u])
                .max()
                .unwrap_or(0);
            finish[v] = ready + lengths[v];
            lt = lt.max(finish[v]);
        }
        if lt < best {
            best = lt;
            best_perm = perm.clone();
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    if n == 0 {
        return (0, Vec::new());
    }
    (best, depth_partition(g, &best_perm))
}

/// Levels by longest-path depth of the orientation that follows `order`.
fn depth_partition(g: &ConflictGraph, order: &[usize]) -> Vec<Vec<usize>> {
    let n = g.n();
    let mut pos = vec![0; n];
    for (i, &v) in order.iter().enumerate() {
        pos[v] = i;
    }
    let mut depth = vec![0usize; n];
    for &v in order {
        depth[v] = g
            .neighbors(v)
            .iter()
            .filter(|&&u| pos[u] < pos[v])
            .map(|&u| depth[u])
            .max()
            .unwrap_or(0)
            + 1;
    }
    let k = depth.iter().copied().max().unwrap_or(0);
    let mut levels = vec![Vec::new(); k];
    for v in 0..n {
        levels[depth[v] - 1].push(v);
    }
    levels
}

fn next_permutation(p: &mut [usize]) -> bool {
    let Some(i) = p.windows(2).rposition(|w| w[0] < w[1]) else {
        return false;
    };
    let j = p.iter().rposition(|&x| x > p[i]).expect("a larger element exists");
    p.swap(i, j);
    p[i + 1..].reverse();
    true
}

/// Latency of the level schedule of a legal ordered partition, computed
/// directly from the conflict edges oriented by level.
pub fn level_latency(g: &ConflictGraph, lengths: &[u64], partition: &[Vec<usize>]) -> Result<u64> {
    let level = check_partition(partition, g)?;
    if lengths.len() != g.n() {
        return Err(Error::LengthMismatch {
            expected: g.n(),
            got: lengths.len(),
        });
    }
    let mut finish = vec![0u64; g.n()];
    let mut lt = 0;
    for set in partition {
        for &v in set {
            let ready = g
                .neighbors(v)
                .iter()
                .filter(|&&u| level[u] < level[v])
                .map(|&u| finish[u])
                .max()
                .unwrap_or(0);
            finish[v] = ready + lengths[v];
            lt = lt.max(finish[v]);
        }
    }
    Ok(lt)
}

/// One transaction per vertex, all of length `c` and running `SLEEP_ONLY`.
/// Each edge `{u, v}` becomes a key `e{u}_{v}` in both write sets, so the
/// block's conflict graph is exactly `g`. `c` should be positive; a zero
/// length yields a block that fails validation.
pub fn transform_graph_to_block(g: &ConflictGraph, c: u64) -> Block {
    let mut writes: Vec<Vec<String>> = vec![Vec::new(); g.n()];
    for (u, v) in g.edges() {
        let key = format!("e{u}_{v}");
        writes[u].push(key.clone());
        writes[v].push(key);
    }
    let txs = writes
        .into_iter()
        .enumerate()
        .map(|(i, w)| Transaction::new(i, Vec::<String>::new(), w, c, TxProgram::sleep_only()))
        .collect();
    Block::new(0, Vec::new(), txs)
}

/// [`transform_graph_to_block`] with per-vertex lengths.
pub fn weighted_graph_to_block(g: &ConflictGraph, lengths: &[u64]) -> Result<Block> {
    if lengths.len() != g.n() {
        return Err(Error::LengthMismatch {
            expected: g.n(),
            got: lengths.len(),
        });
    }
    let mut block = transform_graph_to_block(g, 1);
    for tx in &mut block.txs {
        tx.length = lengths[tx.id];
    }
    Ok(block)
}

/// Edge count of a path found by extending, for each pair `i < j` in
/// `order`, the best path ending at `order[i]` to `order[j]` when they
/// conflict. A lower bound on the longest simple path.
pub fn est_longest_path(g: &ConflictGraph, order: &[usize]) -> Result<usize> {
    check_permutation(order, g.n())?;
    let mut ell = vec![0usize; g.n()];
    for (j, &vj) in order.iter().enumerate() {
        for &vi in &order[..j] {
            if g.has_edge(vi, vj) {
                ell[vj] = ell[vj].max(ell[vi] + 1);
            }
        }
    }
    Ok(ell.into_iter().max().unwrap_or(0))
}

/// Greedy color count in descending-degree order; an upper bound on the
/// chromatic number.
pub fn est_chromatic(g: &ConflictGraph) -> u32 {
    greedy_by_degree(g).k()
}

/// Erdős–Rényi `G(n, p)`: each pair `u < v` in lexicographic order is an
/// edge with probability `p`, drawn from a ChaCha8 stream seeded by `seed`.
pub fn gnp_graph(n: usize, p: f64, seed: u64) -> Result<ConflictGraph> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("edge probability {p} outside [0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(gnp_with(n, p, &mut rng))
}

fn gnp_with(n: usize, p: f64, rng: &mut impl Rng) -> ConflictGraph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(p) {
                edges.push((u, v));
            }
        }
    }
    ConflictGraph::from_edges(n, edges).expect("generated edges are in range")
}

/// Vertex order fed to [`est_longest_path`] in the study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PathOrder {
    #[default]
    Ascending,
    /// A fresh uniform shuffle per sample.
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioSample {
    pub n: usize,
    pub p: f64,
    /// Vertices on the estimated longest path (`edges + 1`).
    pub est_longest_path_vertices: usize,
    pub est_chromatic: u32,
    pub ratio: Ratio<u64>,
}

/// Seed of sample `sample` in cell `(n, p)`. Independent of evaluation order.
pub fn sample_seed(seed: u64, n: usize, p: f64, sample: usize) -> u64 {
    mix(seed, mix(n as u64, mix(p.to_bits(), sample as u64)))
}

/// One study sample: a `G(n, p)` graph and its path/coloring estimates.
pub fn ratio_sample(n: usize, p: f64, seed: u64, order: PathOrder) -> Result<RatioSample> {
    if n == 0 {
        return Err(Error::Domain("ratio samples need n >= 1".into()));
    }
    let g = gnp_graph(n, p, seed)?;
    let mut vertex_order: Vec<usize> = (0..n).collect();
    if order == PathOrder::Random {
        vertex_order.shuffle(&mut ChaCha8Rng::seed_from_u64(mix(seed, 1)));
    }
    let ell = est_longest_path(&g, &vertex_order)? + 1;
    let chi = est_chromatic(&g);
    Ok(RatioSample {
        n,
        p,
        est_longest_path_vertices: ell,
        est_chromatic: chi,
        ratio: Ratio::new(ell as u64, chi as u64),
    })
}

#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub ns: Vec<usize>,
    pub ps: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    pub order: PathOrder,
    pub parallelism: Parallelism,
}

impl StudyConfig {
    pub fn new(ns: Vec<usize>, ps: Vec<f64>, samples: usize, seed: u64) -> Self {
        StudyConfig {
            ns,
            ps,
            samples,
            seed,
            order: PathOrder::Ascending,
            parallelism: Parallelism::default(),
        }
    }
}

/// Aggregate of one `(n, p)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioRow {
    pub n: usize,
    pub p: f64,
    pub samples: usize,
    pub mean_ratio: f64,
    pub min_ratio: Ratio<u64>,
    pub max_ratio: Ratio<u64>,
    pub seed: u64,
}

/// Mean, min and max of `(ℓ + 1) / χ̂` over `samples` graphs per cell, one row
/// per `(n, p)` in `ns`-major order. Serial and parallel runs return
/// identical rows.
pub fn vulnerability_study(cfg: &StudyConfig) -> Result<Vec<RatioRow>> {
    if cfg.samples == 0 {
        return Err(Error::Domain("samples must be at least 1".into()));
    }
    for &p in &cfg.ps {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!("edge probability {p} outside [0, 1]")));
        }
    }
    if cfg.ns.contains(&0) {
        return Err(Error::Domain("block sizes must be at least 1".into()));
    }
    let cells: Vec<(usize, f64)> = cfg
        .ns
        .iter()
        .flat_map(|&n| cfg.ps.iter().map(move |&p| (n, p)))
        .collect();
    let k = cfg.samples;
    let samples = par::map_range(cfg.parallelism, cells.len() * k, |job| {
        let (n, p) = cells[job / k];
        ratio_sample(n, p, sample_seed(cfg.seed, n, p, job % k), cfg.order)
    });
    let samples: Vec<RatioSample> = samples.into_iter().collect::<Result<_>>()?;
    Ok(cells
        .iter()
        .zip(samples.chunks(k))
        .map(|(&(n, p), chunk)| {
            let sum: f64 = chunk.iter().map(|s| ratio_f64(s.ratio)).sum();
            RatioRow {
                n,
                p,
                samples: k,
                mean_ratio: sum / k as f64,
                min_ratio: chunk.iter().map(|s| s.ratio).min().expect("k >= 1"),
                max_ratio: chunk.iter().map(|s| s.ratio).max().expect("k >= 1"),
                seed: cfg.seed,
            }
        })
        .collect())
}

fn ratio_f64(r: Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

pub const CSV_HEADER: &str = "n,p,samples,mean_ratio,min_ratio,max_ratio,seed";

pub fn rows_to_csv(rows: &[RatioRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{:.6},{:.6},{:.6},{}",
            r.n,
            r.p,
            r.samples,
            r.mean_ratio,
            ratio_f64(r.min_ratio),
            ratio_f64(r.max_ratio),
            r.seed
        )
        .unwrap();
    }
    out
}

/// Lower bound on the number of distinct concurrency levels a chain of `ch`
/// conflicting transactions forces on `m` machines:
/// `ceil((ch - (m - 1)) / (m - 1))`.
pub fn alpha_bound(ch: u64, m: u64) -> Result<u64> {
    if m < 2 {
        return Err(Error::Domain(format!("alpha bound needs M >= 2, got {m}")));
    }
    if ch < m {
        return Err(Error::Domain(format!(
            "alpha bound needs ch >= M, got ch = {ch}, M = {m}"
        )));
    }
    Ok((ch - (m - 1)).div_ceil(m - 1))
}

/// Every legal coloring of `g` with exactly `k` colors, as unordered
/// partitions with classes listed by smallest member.
pub fn colorings_with_k(g: &ConflictGraph, k: usize) -> Vec<Vec<Vec<usize>>> {
    fn go(g: &ConflictGraph, k: usize, v: usize, used: usize, colors: &mut Vec<usize>, out: &mut Vec<Vec<Vec<usize>>>) {
        let n = g.n();
        if n - v < k - used {
            return;
        }
        if v == n {
            let mut classes = vec![Vec::new(); k];
            for (u, &c) in colors.iter().enumerate() {
                classes[c].push(u);
            }
            out.push(classes);
            return;
        }
        for c in 0..(used + 1).min(k) {
            if g.neighbors(v).iter().any(|&u| u < v && colors[u] == c) {
                continue;
            }
            colors.push(c);
            go(g, k, v + 1, used.max(c + 1), colors, out);
            colors.pop();
        }
    }
    let mut out = Vec::new();
    if k == 0 {
        if g.n() == 0 {
            out.push(Vec::new());
        }
        return out;
    }
    go(g, k, 0, 0, &mut Vec::with_capacity(g.n()), &mut out);
    out
}

/// All permutations of `0..k` as 1-based color permutations.
fn permutations(k: usize) -> Vec<Vec<usize>> {
    let mut p: Vec<usize> = (1..=k).collect();
    let mut out = vec![p.clone()];
    while next_permutation(&mut p) {
        out.push(p.clone());
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub trial: usize,
    pub block: Block,
    pub min_lt: u64,
    /// Ordered partitions involved, with the latency of each level schedule.
    pub schedules: Vec<(Vec<Vec<usize>>, u64)>,
    pub note: String,
}

impl Witness {
    pub fn render(&self) -> String {
        let mut s = format!("trial {}: {}\n  MinLt {}\n", self.trial, self.note, self.min_lt);
        for (p, lt) in &self.schedules {
            writeln!(s, "  {} -> latency {lt}", format_partition(p)).unwrap();
        }
        write!(s, "  block {}", self.block.to_json_line()).unwrap();
        s
    }
}

pub fn format_partition(p: &[Vec<usize>]) -> String {
    p.iter()
        .map(|set| set.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","))
        .collect::<Vec<_>>()
        .join(" | ")
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOptions {
    pub n_max: usize,
    pub trials: usize,
    pub seed: u64,
    /// Lengths are drawn uniformly from these choices. `[c]` gives the
    /// homogeneous control.
    pub lengths: Vec<u64>,
    pub parallelism: Parallelism,
}

impl SearchOptions {
    pub fn heterogeneous(n_max: usize, trials: usize, seed: u64) -> Self {
        SearchOptions {
            n_max,
            trials,
            seed,
            lengths: vec![1, 10, 100, 1000],
            parallelism: Parallelism::default(),
        }
    }

    pub fn homogeneous(n_max: usize, trials: usize, seed: u64) -> Self {
        SearchOptions {
            lengths: vec![1],
            ..SearchOptions::heterogeneous(n_max, trials, seed)
        }
    }
}

/// Outcome of [`counterexample_search`]. Counts are per trial; the stored
/// witness is the one from the lowest trial index.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CounterexampleReport {
    pub trials: usize,
    /// Two ordered minimal colorings whose level schedules differ in latency.
    pub a: Option<Witness>,
    pub a_count: usize,
    /// A minimal coloring that never reaches MinLt under any color order, or
    /// whose latency depends on the color order.
    pub b: Option<Witness>,
    pub b_count: usize,
    /// The exact minimum weighted coloring, in its own color order, misses
    /// MinLt while some ordered minimal coloring reaches it.
    pub c: Option<Witness>,
    pub c_count: usize,
}

impl CounterexampleReport {
    pub fn render(&self) -> String {
        let mut s = format!("trials {}\n", self.trials);
        for (name, w, count) in [
            ("a", &self.a, self.a_count),
            ("b", &self.b, self.b_count),
            ("c", &self.c, self.c_count),
        ] {
            match w {
                Some(w) => writeln!(s, "({name}) {count} found; first:\n{}", w.render()).unwrap(),
                None => writeln!(s, "({name}) none found").unwrap(),
            }
        }
        s
    }
}

/// [`counterexample_search`] with lengths from `{1, 10, 100, 1000}`.
pub fn hetero_counterexample_search(n_max: usize, trials: usize, seed: u64) -> Result<CounterexampleReport> {
    counterexample_search(&SearchOptions::heterogeneous(n_max, trials, seed))
}

/// Searches random blocks (`3 <= n <= n_max`, edge probability in
/// `[0.25, 0.65]`) for blocks where minimal or weighted colorings fail to
/// give optimal level schedules.
pub fn counterexample_search(opts: &SearchOptions) -> Result<CounterexampleReport> {
    if opts.n_max > DEFAULT_ORACLE_CAP {
        return Err(Error::capacity("counterexample search", opts.n_max, DEFAULT_ORACLE_CAP));
    }
    if opts.n_max < 3 {
        return Err(Error::Domain(format!("n_max must be at least 3, got {}", opts.n_max)));
    }
    if opts.lengths.is_empty() || opts.lengths.contains(&0) {
        return Err(Error::Domain("length choices must be non-empty and positive".into()));
    }
    let per_trial = par::map_range(opts.parallelism, opts.trials, |t| search_trial(opts, t));
    let mut report = CounterexampleReport {
        trials: opts.trials,
        ..Default::default()
    };
    for found in per_trial {
        let [a, b, c] = found?;
        for (slot, count, w) in [
            (&mut report.a, &mut report.a_count, a),
            (&mut report.b, &mut report.b_count, b),
            (&mut report.c, &mut report.c_count, c),
        ] {
            if let Some(w) = w {
                *count += 1;
                slot.get_or_insert(w);
            }
        }
    }
    Ok(report)
}

fn random_block(opts: &SearchOptions, trial: usize) -> (ConflictGraph, Block) {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(opts.seed, trial as u64));
    let n = rng.gen_range(3..=opts.n_max);
    let p = rng.gen_range(0.25..=0.65);
    let g = gnp_with(n, p, &mut rng);
    let lengths: Vec<u64> = (0..n)
        .map(|_| *opts.lengths.choose(&mut rng).expect("non-empty"))
        .collect();
    let block = weighted_graph_to_block(&g, &lengths).expect("lengths match");
    (g, block)
}

fn search_trial(opts: &SearchOptions, trial: usize) -> Result<[Option<Witness>; 3]> {
    let (g, block) = random_block(opts, trial);
    let lengths = block.lengths();
    let min_lt = optimal_latency_of(&g, &lengths, OracleOptions::default())?.optimal_latency;
    let chi = exact_min_coloring(&g, DEFAULT_ORACLE_CAP)?.k() as usize;
    let perms = permutations(chi);
    let witness = |schedules, note: &str| Witness {
        trial,
        block: block.clone(),
        min_lt,
        schedules,
        note: note.into(),
    };

    let mut lowest: Option<(Vec<Vec<usize>>, u64)> = None;
    let mut highest: Option<(Vec<Vec<usize>>, u64)> = None;
    let mut b = None;
    for classes in colorings_with_k(&g, chi) {
        let mut best: Option<(Vec<Vec<usize>>, u64)> = None;
        let mut worst: Option<(Vec<Vec<usize>>, u64)> = None;
        for perm in &perms {
            let ordered = reorder_partition(&classes, perm)?;
            let lt = level_latency(&g, &lengths, &ordered)?;
            if !best.as_ref().is_some_and(|(_, b)| lt >= *b) {
                best = Some((ordered.clone(), lt));
            }
            if !worst.as_ref().is_some_and(|(_, w)| lt <= *w) {
                worst = Some((ordered, lt));
            }
        }
        let (best, worst) = (best.expect("k! >= 1"), worst.expect("k! >= 1"));
        if b.is_none() {
            if best.1 > min_lt {
                b = Some(witness(
                    vec![best.clone()],
                    "no color order of this minimal coloring reaches MinLt",
                ));
            } else if best.1 != worst.1 {
                b = Some(witness(
                    vec![best.clone(), worst.clone()],
                    "reordering a minimal coloring changes latency",
                ));
            }
        }
        if !lowest.as_ref().is_some_and(|(_, l)| best.1 >= *l) {
            lowest = Some(best);
        }
        if !highest.as_ref().is_some_and(|(_, h)| worst.1 <= *h) {
            highest = Some(worst);
        }
    }
    let (lowest, highest) = (
        lowest.expect("a minimal coloring exists"),
        highest.expect("a minimal coloring exists"),
    );
    let a = (lowest.1 != highest.1).then(|| {
        witness(
            vec![lowest.clone(), highest],
            "two minimal colorings with different latencies",
        )
    });

    let weighted: Coloring = exact_min_weighted_coloring(&g, &lengths, DEFAULT_ORACLE_CAP)?;
    let weighted_order = weighted.classes();
    let weighted_lt = level_latency(&g, &lengths, &weighted_order)?;
    let c = (weighted_lt > min_lt && lowest.1 == min_lt).then(|| {
        witness(
            vec![(weighted_order, weighted_lt), lowest],
            "minimum weighted coloring is suboptimal; a minimal coloring is optimal",
        )
    });
    Ok([a, b, c])
}

/// Result of [`homogeneous_reorder_search`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReorderReport {
    pub blocks: usize,
    /// Minimal colorings for which some color permutation changed latency.
    pub minimal_changes: usize,
    /// First non-minimal legal partition whose latency depends on color order.
    pub non_minimal_witness: Option<Witness>,
    pub non_minimal_witnesses: usize,
}

/// On `blocks` random homogeneous blocks (`n <= n_max`, all lengths 1),
/// checks every color order of one exact minimal coloring and of one
/// non-minimal greedy coloring from a random vertex order.
pub fn homogeneous_reorder_search(blocks: usize, n_max: usize, seed: u64) -> Result<ReorderReport> {
    if n_max > DEFAULT_ORACLE_CAP {
        return Err(Error::capacity("reorder search", n_max, DEFAULT_ORACLE_CAP));
    }
    if n_max < 3 {
        return Err(Error::Domain(format!("n_max must be at least 3, got {n_max}")));
    }
    let mut report = ReorderReport {
        blocks,
        ..Default::default()
    };
    for trial in 0..blocks {
        let opts = SearchOptions::homogeneous(n_max, blocks, seed);
        let (g, block) = random_block(&opts, trial);
        let lengths = block.lengths();
        let minimal = exact_min_coloring(&g, DEFAULT_ORACLE_CAP)?.classes();
        let lts: Vec<u64> = permutations(minimal.len())
            .iter()
            .map(|perm| level_latency(&g, &lengths, &reorder_partition(&minimal, perm)?))
            .collect::<Result<_>>()?;
        if lts.iter().any(|&lt| lt != lts[0]) {
            report.minimal_changes += 1;
        }

        let mut rng = ChaCha8Rng::seed_from_u64(mix(seed ^ 0x5eed, trial as u64));
        let mut order: Vec<usize> = (0..g.n()).collect();
        order.shuffle(&mut rng);
        let classes = split_largest(crate::coloring::greedy_coloring(&g, &order)?.classes());
        if classes.len() <= minimal.len() {
            continue;
        }
        let mut seen: Option<(Vec<Vec<usize>>, u64)> = None;
        for perm in permutations(classes.len()) {
            let ordered = reorder_partition(&classes, &perm)?;
            let lt = level_latency(&g, &lengths, &ordered)?;
            match &seen {
                None => seen = Some((ordered, lt)),
                Some((first, first_lt)) if *first_lt != lt => {
                    report.non_minimal_witnesses += 1;
                    if report.non_minimal_witness.is_none() {
                        let min_lt = minimal.len() as u64;
                        report.non_minimal_witness = Some(Witness {
                            trial,
                            block: block.clone(),
                            min_lt,
                            schedules: vec![(first.clone(), *first_lt), (ordered, lt)],
                            note: "reordering a non-minimal coloring changes latency".into(),
                        });
                    }
                    break;
                }
                Some(_) => {}
            }
        }
    }
    Ok(report)
}

/// Splits the largest class in two, giving a legal partition with one more
/// class.
fn split_largest(mut classes: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    if let Some(i) = (0..classes.len())
        .filter(|&i| classes[i].len() >= 2)
        .max_by_key(|&i| classes[i].len())
    {
        let half = classes[i].len() / 2;
        let tail = classes[i].split_off(half);
        classes.push(tail);
    }
    classes
}

/// All connected graphs on `n` vertices up to isomorphism, each represented
/// by its canonical form: the relabeling whose edge bitmask is smallest.
/// Practical up to `n = 7`.
pub fn connected_graphs(n: usize) -> Vec<ConflictGraph> {
    assert!(n <= 7, "connected graph catalog is limited to n <= 7");
    if n == 0 {
        return Vec::new();
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
    let mut pair_index = vec![vec![0usize; n]; n];
    for (i, &(u, v)) in pairs.iter().enumerate() {
        pair_index[u][v] = i;
        pair_index[v][u] = i;
    }
    let perms: Vec<Vec<usize>> = {
        let mut p: Vec<usize> = (0..n).collect();
        let mut out = vec![p.clone()];
        while next_permutation(&mut p) {
            out.push(p.clone());
        }
        out
    };
    let mut canon = std::collections::BTreeSet::new();
    for mask in 0u64..(1u64 << pairs.len()) {
        if !connected(n, &pairs, mask) {
            continue;
        }
        let best = perms
            .iter()
            .map(|perm| {
                bits(mask).fold(0u64, |m, e| {
                    let (u, v) = pairs[e];
                    m | (1 << pair_index[perm[u]][perm[v]])
                })
            })
            .min()
            .expect("at least one permutation");
        canon.insert(best);
    }
    canon
        .into_iter()
        .map(|m| ConflictGraph::from_edges(n, bits(m).map(|e| pairs[e])).expect("pairs are in range"))
        .collect()
}

fn connected(n: usize, pairs: &[(usize, usize)], mask: u64) -> bool {
    let mut adj = vec![0u64; n];
    for e in bits(mask) {
        let (u, v) = pairs[e];
        adj[u] |= 1 << v;
        adj[v] |= 1 << u;
    }
    let mut seen = 1u64;
    let mut frontier = 1u64;
    while frontier != 0 {
        let next = bits(frontier).fold(0, |m, v| m | adj[v]) & !seen;
        seen |= next;
        frontier = next;
    }
    seen.count_ones() as usize == n
}
