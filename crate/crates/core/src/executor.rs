//! Executors for schedules over a [`GlobalState`].
//!
//! * [`execute_sequential`]: one transaction at a time; the reference oracle.
//! * [`execute_graph_schedule`]: one worker per transaction, one single-shot
//!   signal per schedule edge. A worker waits for all incoming signals, reads,
//!   runs, writes back, emits its result, then releases its outgoing signals.
//! * [`execute_batch_schedule`]: batches in order, each batch fully concurrent.
//! * [`simulate_execution`]: discrete-event simulation with unbounded
//!   processors, where a transaction takes exactly its length.
//!
//! The input state is never mutated; executors return the changes.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};
use std::sync::atomic::{AtomicI64, AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coloring::check_permutation;
use crate::conflict::{build_conflict_graph, ConflictGraph};
use crate::error::{Error, Result};
use crate::model::{run_program, Block, GlobalState, ObjectKey, Transaction, TxId, TxResult};
use crate::schedule::{check_partition, is_valid_schedule, latency, BatchSchedule, GraphSchedule, Schedule};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ExecutionOutcome {
    /// Results in emission order.
    pub results: Vec<TxResult>,
    pub state_changes: BTreeMap<ObjectKey, i64>,
    pub emission_order: Vec<TxId>,
    /// Per-transaction execution intervals; filled only when tracing.
    pub trace: Vec<TraceInterval>,
}

impl ExecutionOutcome {
    fn from_results(results: Vec<TxResult>, state_changes: BTreeMap<ObjectKey, i64>) -> Self {
        let emission_order = results.iter().map(|r| r.tx_id).collect();
        ExecutionOutcome {
            results,
            state_changes,
            emission_order,
            trace: Vec::new(),
        }
    }

    /// Results sorted by transaction id.
    pub fn results_by_id(&self) -> Vec<&TxResult> {
        let mut v: Vec<&TxResult> = self.results.iter().collect();
        v.sort_by_key(|r| r.tx_id);
        v
    }

    /// Differences in state changes or in per-transaction reads and writes.
    /// Emission order and timing are ignored.
    pub fn diff(&self, other: &ExecutionOutcome) -> Vec<String> {
        let mut out = Vec::new();
        if self.state_changes != other.state_changes {
            for key in self.state_changes.keys().chain(other.state_changes.keys()) {
                let (a, b) = (self.state_changes.get(key), other.state_changes.get(key));
                if a != b && !out.iter().any(|l: &String| l.starts_with(&format!("state {key}:"))) {
                    out.push(format!("state {key}: {a:?} vs {b:?}"));
                }
            }
        }
        let (mine, theirs) = (self.results_by_id(), other.results_by_id());
        if mine.len() != theirs.len() {
            out.push(format!("result count {} vs {}", mine.len(), theirs.len()));
        }
        for (a, b) in mine.iter().zip(&theirs) {
            if !a.same_content(b) {
                out.push(format!(
                    "tx {}: {:?}/{:?} vs tx {}: {:?}/{:?}",
                    a.tx_id, a.read_values, a.written_values, b.tx_id, b.read_values, b.written_values
                ));
            }
        }
        out
    }

    pub fn equivalent(&self, other: &ExecutionOutcome) -> bool {
        self.diff(other).is_empty()
    }
}

/// Wall-clock execution interval of one transaction, relative to launch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceInterval {
    pub tx_id: TxId,
    pub start_ns: u64,
    pub end_ns: u64,
}

/// Conflicting pairs whose traced intervals overlap.
pub fn overlapping_conflicts(trace: &[TraceInterval], g: &ConflictGraph) -> Vec<(TxId, TxId)> {
    let mut by_id = vec![None; g.n()];
    for t in trace {
        by_id[t.tx_id] = Some(*t);
    }
    g.edges()
        .filter(|&(u, v)| match (by_id[u], by_id[v]) {
            (Some(a), Some(b)) => a.start_ns < b.end_ns && b.start_ns < a.end_ns,
            _ => false,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Workers {
    /// One thread per transaction.
    #[default]
    PerTransaction,
    /// A fixed pool pulling transactions in topological order. No latency claims.
    Bounded(usize),
}

/// Bugs that can be injected into the graph executor for negative-control tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Release outgoing signals before writing results back.
    EarlyRelease,
}

#[derive(Debug, Clone, Default)]
pub struct ExecOptions {
    pub workers: Workers,
    /// Seed for randomized per-worker delays around reads and writes.
    pub jitter: Option<u64>,
    pub trace: bool,
    pub fault: Option<Fault>,
}

/// Receives each result as soon as its transaction finishes.
pub type ResultSink<'a> = &'a (dyn Fn(&TxResult) + Sync);

fn validated_graph(block: &Block) -> Result<ConflictGraph> {
    block.validate()?;
    build_conflict_graph(block)
}

fn read_inputs(tx: &Transaction, mut get: impl FnMut(&ObjectKey) -> i64) -> BTreeMap<ObjectKey, i64> {
    tx.effective_reads().map(|k| (k.clone(), get(k))).collect()
}

/// Runs the transactions one by one in `order` against a private copy of
/// `state`.
pub fn execute_sequential(block: &Block, order: &[TxId], state: &GlobalState) -> Result<ExecutionOutcome> {
    block.validate()?;
    check_permutation(order, block.len())?;
    let idx = block.index_of();
    let mut changes: BTreeMap<ObjectKey, i64> = BTreeMap::new();
    let mut results = Vec::with_capacity(order.len());
    for &id in order {
        let tx = &block.txs[idx[id]];
        let reads = read_inputs(tx, |k| changes.get(k).copied().unwrap_or_else(|| state.get(k)));
        let written = run_program(tx, &reads)?;
        changes.extend(written.iter().map(|(k, v)| (k.clone(), *v)));
        results.push(TxResult::ok(id, reads, written));
    }
    Ok(ExecutionOutcome::from_results(results, changes))
}

/// Latest committed value per key. Valid schedules never let two conflicting
/// transactions touch a key concurrently, so each cell only needs atomic
/// publication.
struct Store {
    cells: BTreeMap<ObjectKey, AtomicI64>,
}

impl Store {
    fn new(block: &Block, state: &GlobalState) -> Self {
        let mut cells = BTreeMap::new();
        for tx in &block.txs {
            for k in tx.read_set.iter().chain(&tx.write_set) {
                cells.entry(k.clone()).or_insert_with(|| AtomicI64::new(state.get(k)));
            }
        }
        Store { cells }
    }

    fn load(&self, key: &ObjectKey) -> i64 {
        self.cells[key].load(Ordering::Acquire)
    }

    fn publish(&self, key: &ObjectKey, value: i64) {
        self.cells[key].store(value, Ordering::Release);
    }

    fn changes(&self, results: &[TxResult]) -> BTreeMap<ObjectKey, i64> {
        let mut out = BTreeMap::new();
        for r in results {
            for k in r.written_values.keys() {
                out.insert(k.clone(), self.load(k));
            }
        }
        out
    }
}

/// Single-shot token, created locked.
struct Signal {
    open: Mutex<bool>,
    cv: Condvar,
}

impl Signal {
    fn new() -> Self {
        Signal {
            open: Mutex::new(false),
            cv: Condvar::new(),
        }
    }

    fn wait(&self) {
        let mut open = self.open.lock().unwrap();
        while !*open {
            open = self.cv.wait(open).unwrap();
        }
    }

    fn release(&self) {
        *self.open.lock().unwrap() = true;
        self.cv.notify_all();
    }
}

struct Jitter(Option<ChaCha8Rng>);

impl Jitter {
    fn new(seed: Option<u64>, tx: TxId) -> Self {
        Jitter(seed.map(|s| ChaCha8Rng::seed_from_u64(crate::par::mix(s, tx as u64))))
    }

    fn pause(&mut self) {
        let Some(rng) = self.0.as_mut() else { return };
        match rng.gen_range(0..4) {
            0 => {}
            1 => std::thread::yield_now(),
            2 => {
                for _ in 0..rng.gen_range(0..2_000) {
                    std::hint::spin_loop();
                }
            }
            _ => std::thread::sleep(Duration::from_micros(rng.gen_range(0..40))),
        }
    }
}

/// Shared per-execution bookkeeping for the concurrent executors.
struct Run<'a> {
    block: &'a Block,
    idx: Vec<usize>,
    store: Store,
    results: Mutex<Vec<TxResult>>,
    trace: Mutex<Vec<TraceInterval>>,
    failure: Mutex<Option<Error>>,
    epoch: Instant,
    opts: &'a ExecOptions,
    sink: Option<ResultSink<'a>>,
}

impl<'a> Run<'a> {
    fn new(block: &'a Block, state: &GlobalState, opts: &'a ExecOptions, sink: Option<ResultSink<'a>>) -> Self {
        Run {
            block,
            idx: block.index_of(),
            store: Store::new(block, state),
            results: Mutex::new(Vec::with_capacity(block.len())),
            trace: Mutex::new(Vec::new()),
            failure: Mutex::new(None),
            epoch: Instant::now(),
            opts,
            sink,
        }
    }

    fn elapsed_ns(&self) -> u64 {
        self.epoch.elapsed().as_nanos() as u64
    }

    /// Reads, runs, and writes back one transaction. `before_write` runs
    /// between computing the writes and publishing them.
    fn execute_one(&self, id: TxId, before_write: impl FnOnce()) {
        let tx = &self.block.txs[self.idx[id]];
        let mut jitter = Jitter::new(self.opts.jitter, id);
        jitter.pause();
        let start = self.elapsed_ns();
        let reads = read_inputs(tx, |k| self.store.load(k));
        jitter.pause();
        let written = match run_program(tx, &reads) {
            Ok(w) => w,
            Err(e) => {
                self.failure.lock().unwrap().get_or_insert(e);
                before_write();
                return;
            }
        };
        before_write();
        jitter.pause();
        for (k, v) in &written {
            self.store.publish(k, *v);
        }
        let end = self.elapsed_ns();
        if self.opts.trace {
            self.trace.lock().unwrap().push(TraceInterval {
                tx_id: id,
                start_ns: start,
                end_ns: end,
            });
        }
        let result = TxResult::ok(id, reads, written);
        if let Some(sink) = self.sink {
            sink(&result);
        }
        self.results.lock().unwrap().push(result);
    }

    fn finish(self) -> Result<ExecutionOutcome> {
        if let Some(e) = self.failure.into_inner().unwrap() {
            return Err(e);
        }
        let results = self.results.into_inner().unwrap();
        let mut outcome = ExecutionOutcome::from_results(results, BTreeMap::new());
        outcome.state_changes = self.store.changes(&outcome.results);
        outcome.trace = self.trace.into_inner().unwrap();
        outcome.trace.sort_by_key(|t| t.tx_id);
        Ok(outcome)
    }
}

/// Executes a valid graph schedule concurrently.
pub fn execute_graph_schedule(block: &Block, s: &GraphSchedule, state: &GlobalState) -> Result<ExecutionOutcome> {
    execute_graph_schedule_with(block, s, state, &ExecOptions::default(), None)
}

pub fn execute_graph_schedule_with(
    block: &Block,
    s: &GraphSchedule,
    state: &GlobalState,
    opts: &ExecOptions,
    sink: Option<ResultSink<'_>>,
) -> Result<ExecutionOutcome> {
    let g = validated_graph(block)?;
    if !is_valid_schedule(s, &g)? {
        return Err(Error::InvalidSchedule);
    }

    let mut edge_ids: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (i, e) in s.edges().enumerate() {
        edge_ids.insert(e, i);
    }
    let signals: Vec<Signal> = (0..edge_ids.len()).map(|_| Signal::new()).collect();
    let edge_ids = &edge_ids;
    let incoming = |v: usize| s.predecessors(v).iter().map(move |&u| edge_ids[&(u, v)]);
    let outgoing = |u: usize| s.successors(u).iter().map(move |&v| edge_ids[&(u, v)]);

    let run = Run::new(block, state, opts, sink);
    let next = AtomicUsize::new(0);
    let worker = |v: usize| {
        for e in incoming(v) {
            signals[e].wait();
        }
        let release = || {
            for e in outgoing(v) {
                signals[e].release();
            }
        };
        match opts.fault {
            Some(Fault::EarlyRelease) => run.execute_one(v, release),
            None => {
                run.execute_one(v, || {});
                release();
            }
        }
    };

    std::thread::scope(|scope| match opts.workers {
        Workers::PerTransaction => {
            for v in 0..s.n() {
                let worker = &worker;
                scope.spawn(move || worker(v));
            }
        }
        Workers::Bounded(k) => {
            // Workers take transactions in topological order, so a blocked
            // worker only ever waits on transactions already taken.
            for _ in 0..k.max(1) {
                let (worker, next) = (&worker, &next);
                scope.spawn(move || loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    match s.topo_order().get(i) {
                        Some(&v) => worker(v),
                        None => break,
                    }
                });
            }
        }
    });
    run.finish()
}

/// Executes batches one after another; a batch starts only after the previous
/// one has fully completed.
pub fn execute_batch_schedule(block: &Block, b: &BatchSchedule, state: &GlobalState) -> Result<ExecutionOutcome> {
    execute_batch_schedule_with(block, b, state, &ExecOptions::default(), None)
}

/// Batch execution. `opts.fault` is ignored.
pub fn execute_batch_schedule_with(
    block: &Block,
    b: &BatchSchedule,
    state: &GlobalState,
    opts: &ExecOptions,
    sink: Option<ResultSink<'_>>,
) -> Result<ExecutionOutcome> {
    let g = validated_graph(block)?;
    if b.n() != g.n() {
        return Err(Error::VertexMismatch {
            schedule: b.n(),
            graph: g.n(),
        });
    }
    check_partition(b.batches(), &g)?;
    let run = Run::new(block, state, opts, sink);
    for batch in b.batches() {
        let next = AtomicUsize::new(0);
        std::thread::scope(|scope| match opts.workers {
            Workers::PerTransaction => {
                for &v in batch {
                    let run = &run;
                    scope.spawn(move || run.execute_one(v, || {}));
                }
            }
            Workers::Bounded(k) => {
                for _ in 0..k.max(1) {
                    let (run, next) = (&run, &next);
                    scope.spawn(move || {
                        while let Some(&v) = batch.get(next.fetch_add(1, Ordering::Relaxed)) {
                            run.execute_one(v, || {});
                        }
                    });
                }
            }
        });
    }
    run.finish()
}

/// Dispatches on the schedule kind.
pub fn execute_schedule_with(
    block: &Block,
    s: &Schedule,
    state: &GlobalState,
    opts: &ExecOptions,
    sink: Option<ResultSink<'_>>,
) -> Result<ExecutionOutcome> {
    match s {
        Schedule::Graph(g) => execute_graph_schedule_with(block, g, state, opts, sink),
        Schedule::Batch(b) => execute_batch_schedule_with(block, b, state, opts, sink),
    }
}

type Values = BTreeMap<ObjectKey, i64>;

/// Discrete-event simulation with unbounded processors: a transaction starts
/// when its last predecessor finishes and runs for exactly its length.
/// Returns the outcome (results carry finish times) and the makespan, which
/// always equals [`latency`].
pub fn simulate_execution(block: &Block, s: &GraphSchedule, state: &GlobalState) -> Result<(ExecutionOutcome, u64)> {
    let g = validated_graph(block)?;
    if !is_valid_schedule(s, &g)? {
        return Err(Error::InvalidSchedule);
    }
    let idx = block.index_of();
    let mut waiting: Vec<usize> = (0..s.n()).map(|v| s.predecessors(v).len()).collect();
    let mut changes: BTreeMap<ObjectKey, i64> = BTreeMap::new();
    let mut running: BinaryHeap<Reverse<(u64, TxId)>> = BinaryHeap::new();
    let mut pending: Vec<Option<(Values, Values)>> = vec![None; s.n()];
    let mut results = Vec::with_capacity(s.n());

    let start = |v: TxId,
                 now: u64,
                 changes: &BTreeMap<ObjectKey, i64>,
                 pending: &mut Vec<_>,
                 running: &mut BinaryHeap<_>|
     -> Result<()> {
        let tx = &block.txs[idx[v]];
        let reads = read_inputs(tx, |k| changes.get(k).copied().unwrap_or_else(|| state.get(k)));
        let written = run_program(tx, &reads)?;
        pending[v] = Some((reads, written));
        running.push(Reverse((now + tx.length, v)));
        Ok(())
    };

    for (v, _) in waiting.iter().enumerate().filter(|(_, &w)| w == 0) {
        start(v, 0, &changes, &mut pending, &mut running)?;
    }
    let mut makespan = 0;
    let mut finished: Vec<(u64, TxId)> = Vec::new();
    while let Some(Reverse((now, _))) = running.peek().copied() {
        // Retire everything finishing at `now` before starting successors.
        finished.clear();
        while let Some(Reverse((t, v))) = running.peek().copied() {
            if t != now {
                break;
            }
            running.pop();
            finished.push((t, v));
        }
        for &(t, v) in &finished {
            let (reads, written) = pending[v].take().expect("started before finishing");
            changes.extend(written.iter().map(|(k, x)| (k.clone(), *x)));
            let mut r = TxResult::ok(v, reads, written);
            r.finish_time = Some(t);
            results.push(r);
            makespan = makespan.max(t);
        }
        for &(_, v) in &finished {
            for &w in s.successors(v) {
                waiting[w] -= 1;
                if waiting[w] == 0 {
                    start(w, now, &changes, &mut pending, &mut running)?;
                }
            }
        }
    }
    let expected = latency(s, &block.lengths())?;
    if makespan != expected {
        return Err(Error::Invariant(format!(
            "simulated makespan {makespan} differs from latency {expected}"
        )));
    }
    Ok((ExecutionOutcome::from_results(results, changes), makespan))
}

#[derive(Debug, Clone)]
pub struct StressOptions {
    pub trials: usize,
    pub seed: u64,
    pub workers: Workers,
    pub fault: Option<Fault>,
}

impl StressOptions {
    pub fn new(trials: usize, seed: u64) -> Self {
        StressOptions {
            trials,
            seed,
            workers: Workers::PerTransaction,
            fault: None,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct DeterminismReport {
    pub trials: usize,
    /// One line per detected difference, prefixed with the trial number.
    pub mismatches: Vec<String>,
}

impl DeterminismReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Runs a graph schedule `trials` times with randomized delays and checks that
/// every run matches the serial execution in topological order.
pub fn stress_determinism(
    block: &Block,
    s: &GraphSchedule,
    state: &GlobalState,
    trials: usize,
    seed: u64,
) -> Result<DeterminismReport> {
    stress_schedule(
        block,
        &Schedule::Graph(s.clone()),
        state,
        &StressOptions::new(trials, seed),
    )
}

/// [`stress_determinism`] for either schedule kind, with injectable faults.
///
/// Each trial must reproduce the serial reference exactly (state changes and
/// every transaction's reads and writes) and no two conflicting transactions
/// may overlap in time.
pub fn stress_schedule(
    block: &Block,
    s: &Schedule,
    state: &GlobalState,
    opts: &StressOptions,
) -> Result<DeterminismReport> {
    if opts.trials < 2 {
        return Err(Error::Domain(format!(
            "stress needs at least 2 trials, got {}",
            opts.trials
        )));
    }
    let g = validated_graph(block)?;
    let reference = execute_sequential(block, &s.serial_order(), state)?;
    let mut report = DeterminismReport {
        trials: opts.trials,
        mismatches: Vec::new(),
    };
    for trial in 0..opts.trials {
        let exec = ExecOptions {
            workers: opts.workers,
            jitter: Some(crate::par::mix(opts.seed, trial as u64)),
            trace: true,
            fault: opts.fault,
        };
        let outcome = execute_schedule_with(block, s, state, &exec, None)?;
        for line in reference.diff(&outcome) {
            report.mismatches.push(format!("trial {trial}: {line}"));
        }
        for (u, v) in overlapping_conflicts(&outcome.trace, &g) {
            report
                .mismatches
                .push(format!("trial {trial}: conflicting {u} and {v} overlapped"));
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TxProgram;
    use crate::schedule::{batch_to_graph, level_schedule};
    use crate::workload::chain_block;

    fn writer_reader() -> Block {
        Block::new(
            0,
            vec![],
            vec![
                Transaction::new(0, Vec::<&str>::new(), ["x"], 1, TxProgram::write_const(1)),
                Transaction::new(1, ["x"], ["y"], 1, TxProgram::sum_and_add(1)),
            ],
        )
    }

    fn state_of(pairs: &[(&str, i64)]) -> BTreeMap<ObjectKey, i64> {
        pairs.iter().map(|(k, v)| (ObjectKey::from(*k), *v)).collect()
    }

    #[test]
    fn sequential_in_order() {
        let out = execute_sequential(&writer_reader(), &[0, 1], &GlobalState::new()).unwrap();
        assert_eq!(out.state_changes, state_of(&[("x", 1), ("y", 2)]));
    }

    #[test]
    fn sequential_reversed() {
        let out = execute_sequential(&writer_reader(), &[1, 0], &GlobalState::new()).unwrap();
        assert_eq!(out.state_changes, state_of(&[("x", 1), ("y", 1)]));
    }

    #[test]
    fn sequential_empty_block() {
        let out = execute_sequential(&Block::new(0, vec![], vec![]), &[], &GlobalState::new()).unwrap();
        assert!(out.state_changes.is_empty() && out.results.is_empty());
    }

    #[test]
    fn sequential_rejects_bad_order() {
        assert!(matches!(
            execute_sequential(&writer_reader(), &[0, 0], &GlobalState::new()),
            Err(Error::NotPermutation(2))
        ));
    }

    #[test]
    fn graph_respects_edge() {
        let s = GraphSchedule::new(2, [(0, 1)]).unwrap();
        for _ in 0..20 {
            let out = execute_graph_schedule(&writer_reader(), &s, &GlobalState::new()).unwrap();
            assert_eq!(out.state_changes, state_of(&[("x", 1), ("y", 2)]));
        }
    }

    #[test]
    fn graph_rejects_invalid_schedule() {
        assert!(matches!(
            execute_graph_schedule(&writer_reader(), &GraphSchedule::empty(2), &GlobalState::new()),
            Err(Error::InvalidSchedule)
        ));
    }

    #[test]
    fn independent_writers_all_land() {
        let block = Block::new(
            0,
            vec![],
            (0..8)
                .map(|i| {
                    Transaction::new(
                        i,
                        Vec::<&str>::new(),
                        [format!("k{i}")],
                        1,
                        TxProgram::write_const(i as i64),
                    )
                })
                .collect(),
        );
        let out = execute_graph_schedule(&block, &GraphSchedule::empty(8), &GlobalState::new()).unwrap();
        assert_eq!(out.state_changes.len(), 8);
        assert_eq!(out.results.len(), 8);
        let batched = execute_batch_schedule(
            &block,
            &BatchSchedule::new(vec![(0..8).collect()], &ConflictGraph::new(8)).unwrap(),
            &GlobalState::new(),
        )
        .unwrap();
        assert!(batched.equivalent(&out));
    }

    #[test]
    fn chain_levels_match_sequential() {
        let block = chain_block(6);
        let g = build_conflict_graph(&block).unwrap();
        let s = level_schedule(&[vec![0, 2, 4], vec![1, 3, 5]], &g).unwrap();
        let reference = execute_sequential(&block, &[0, 2, 4, 1, 3, 5], &GlobalState::new()).unwrap();
        let out = execute_graph_schedule(&block, &s, &GlobalState::new()).unwrap();
        assert!(reference.equivalent(&out), "{:?}", reference.diff(&out));
    }

    #[test]
    fn batch_reader_sees_writer() {
        let block = writer_reader();
        let g = build_conflict_graph(&block).unwrap();
        let b = BatchSchedule::new(vec![vec![0], vec![1]], &g).unwrap();
        let out = execute_batch_schedule(&block, &b, &GlobalState::new()).unwrap();
        assert_eq!(out.state_changes, state_of(&[("x", 1), ("y", 2)]));
        let via_graph = execute_graph_schedule(&block, &batch_to_graph(&b), &GlobalState::new()).unwrap();
        assert!(out.equivalent(&via_graph));
    }

    #[test]
    fn batch_rejects_illegal_batch() {
        let block = writer_reader();
        let b = BatchSchedule::new(vec![vec![0, 1]], &ConflictGraph::new(2)).unwrap();
        assert!(matches!(
            execute_batch_schedule(&block, &b, &GlobalState::new()),
            Err(Error::IllegalPartition(0, 1))
        ));
    }

    #[test]
    fn bounded_pool_matches() {
        let block = chain_block(10);
        let g = build_conflict_graph(&block).unwrap();
        let s = level_schedule(&[vec![1, 3, 5, 7, 9], vec![0, 2, 4, 6, 8]], &g).unwrap();
        let opts = ExecOptions {
            workers: Workers::Bounded(2),
            ..Default::default()
        };
        let out = execute_graph_schedule_with(&block, &s, &GlobalState::new(), &opts, None).unwrap();
        let reference = execute_sequential(&block, s.topo_order(), &GlobalState::new()).unwrap();
        assert!(reference.equivalent(&out));
    }

    #[test]
    fn simulation_examples() {
        let g = ConflictGraph::path(2);
        let block = crate::analysis::transform_graph_to_block(&g, 1);
        let mut block = block;
        block.txs[0].length = 5;
        let (_, makespan) =
            simulate_execution(&block, &GraphSchedule::new(2, [(0, 1)]).unwrap(), &GlobalState::new()).unwrap();
        assert_eq!(makespan, 6);

        let mut block = crate::analysis::transform_graph_to_block(&ConflictGraph::new(3), 1);
        for (tx, len) in block.txs.iter_mut().zip([3, 9, 4]) {
            tx.length = len;
        }
        let (out, makespan) = simulate_execution(&block, &GraphSchedule::empty(3), &GlobalState::new()).unwrap();
        assert_eq!(makespan, 9);
        assert_eq!(out.emission_order, vec![0, 2, 1]);
        assert_eq!(out.results[2].finish_time, Some(9));
    }

    #[test]
    fn simulation_matches_sequential() {
        let block = chain_block(6);
        let g = build_conflict_graph(&block).unwrap();
        let s = level_schedule(&[vec![1, 3, 5], vec![0, 2, 4]], &g).unwrap();
        let (out, _) = simulate_execution(&block, &s, &GlobalState::new()).unwrap();
        let reference = execute_sequential(&block, s.topo_order(), &GlobalState::new()).unwrap();
        assert!(reference.equivalent(&out));
    }

    #[test]
    fn stress_chain_passes() {
        let block = chain_block(6);
        let g = build_conflict_graph(&block).unwrap();
        let s = level_schedule(&[vec![0, 2, 4], vec![1, 3, 5]], &g).unwrap();
        let r = stress_determinism(&block, &s, &GlobalState::new(), 20, 7).unwrap();
        assert!(r.passed(), "{:?}", r.mismatches);
    }

    #[test]
    fn stress_single_tx() {
        let block = chain_block(1);
        let r = stress_determinism(&block, &GraphSchedule::empty(1), &GlobalState::new(), 2, 1).unwrap();
        assert!(r.passed());
    }

    #[test]
    fn stress_needs_two_trials() {
        let block = chain_block(1);
        assert!(stress_determinism(&block, &GraphSchedule::empty(1), &GlobalState::new(), 1, 1).is_err());
    }

    #[test]
    fn early_release_is_caught() {
        let block = chain_block(8);
        let g = build_conflict_graph(&block).unwrap();
        let s = crate::schedule::total_order_schedule(&block, &g).unwrap();
        let opts = StressOptions {
            fault: Some(Fault::EarlyRelease),
            ..StressOptions::new(30, 3)
        };
        let r = stress_schedule(&block, &Schedule::Graph(s), &GlobalState::new(), &opts).unwrap();
        assert!(!r.passed());
    }

    #[test]
    fn trace_records_every_tx() {
        let block = chain_block(4);
        let g = build_conflict_graph(&block).unwrap();
        let s = crate::schedule::total_order_schedule(&block, &g).unwrap();
        let opts = ExecOptions {
            trace: true,
            ..Default::default()
        };
        let out = execute_graph_schedule_with(&block, &s, &GlobalState::new(), &opts, None).unwrap();
        assert_eq!(out.trace.iter().map(|t| t.tx_id).collect::<Vec<_>>(), vec![0, 1, 2, 3]);
        assert!(overlapping_conflicts(&out.trace, &g).is_empty());
    }
}
