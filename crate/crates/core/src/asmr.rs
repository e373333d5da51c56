//! Block runners, the main loop over an ordered block stream, and the ledger.
//!
//! A [`BlockRunner`] turns a block and its prepared constraints into a
//! schedule and then executes it. [`process_block`] drives one block through
//! a runner; [`run_main_loop`] drives a whole stream, appending one
//! [`LedgerRecord`] per block and resuming after the last persisted record.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc::{self, Receiver};
use std::thread::JoinHandle;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{optimal_latency_of, OracleOptions, DEFAULT_ORACLE_CAP};
use crate::coloring::{
    exact_min_coloring, exact_min_weighted_coloring, greedy_by_degree, DEFAULT_EXACT_CAP, DEFAULT_WEIGHTED_CAP,
};
use crate::conflict::{build_conflict_graph, ConflictGraph};
use crate::error::{Error, Result};
use crate::executor::{execute_schedule_with, ExecOptions, ExecutionOutcome, Workers};
use crate::model::{results_digest, Block, GlobalState, ObjectKey, TxResult};
use crate::schedule::{level_schedule, ordered_partition, total_order_schedule, BatchSchedule, ColorOrder, Schedule};

/// Everything a runner may use to build a schedule.
#[derive(Debug, Clone)]
pub struct Constraints {
    pub graph: ConflictGraph,
    /// Indexed by transaction id.
    pub lengths: Vec<u64>,
}

impl Constraints {
    pub fn prepare(block: &Block) -> Result<Self> {
        Ok(Constraints {
            graph: build_conflict_graph(block)?,
            lengths: block.lengths(),
        })
    }
}

/// How a schedule was produced.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ScheduleMeta {
    pub runner: String,
    /// The requested exact method was skipped because the block was too large.
    pub fallback: bool,
    pub notes: Vec<String>,
    /// The ordered partition behind level and batch schedules.
    pub partition: Option<Vec<Vec<usize>>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlannedSchedule {
    pub schedule: Schedule,
    pub meta: ScheduleMeta,
}

/// The pluggable scheduler and executor.
///
/// `make_schedule` must be a pure function of the block and constraints.
/// Execution is asynchronous: after `start_execution`, results are drained
/// with `next_execution_results` while `is_execution_running` holds, and
/// `state_changes` waits for completion.
pub trait BlockRunner: Send {
    fn name(&self) -> &str;

    fn make_schedule(&self, block: &Block, constraints: &Constraints) -> Result<PlannedSchedule>;

    fn validate_schedule(&self, schedule: &Schedule, constraints: &Constraints) -> Result<bool> {
        if schedule.n() != constraints.graph.n() {
            return Ok(false);
        }
        schedule.is_valid_for(&constraints.graph)
    }

    fn init_execution(&mut self, block: &Block, schedule: &Schedule, state: &GlobalState) -> Result<()>;

    fn start_execution(&mut self) -> Result<()>;

    fn is_execution_running(&self) -> bool;

    /// Results finished since the previous call. Never blocks.
    fn next_execution_results(&mut self) -> Vec<TxResult>;

    /// Waits for the execution to finish and returns its writes.
    fn state_changes(&mut self) -> Result<BTreeMap<ObjectKey, i64>>;
}

/// Background execution of one schedule, streaming results over a channel.
#[derive(Default)]
pub struct Execution {
    pending: Option<(Block, Schedule, GlobalState)>,
    running: Option<(Receiver<TxResult>, JoinHandle<Result<ExecutionOutcome>>)>,
    /// Results received after completion but not yet drained.
    leftover: Vec<TxResult>,
    options: ExecOptions,
}

impl Execution {
    pub fn new(options: ExecOptions) -> Self {
        Execution {
            pending: None,
            running: None,
            leftover: Vec::new(),
            options,
        }
    }

    pub fn init(&mut self, block: &Block, schedule: &Schedule, state: &GlobalState) -> Result<()> {
        if self.running.is_some() {
            return Err(Error::Domain("an execution is already in progress".into()));
        }
        self.pending = Some((block.clone(), schedule.clone(), state.clone()));
        Ok(())
    }

    pub fn start(&mut self) -> Result<()> {
        let (block, schedule, state) = self
            .pending
            .take()
            .ok_or_else(|| Error::Domain("start_execution before init_execution".into()))?;
        let (tx, rx) = mpsc::channel();
        let options = self.options.clone();
        let handle = std::thread::spawn(move || {
            let sink = move |r: &TxResult| {
                let _ = tx.send(r.clone());
            };
            execute_schedule_with(&block, &schedule, &state, &options, Some(&sink))
        });
        self.running = Some((rx, handle));
        Ok(())
    }

    pub fn is_running(&self) -> bool {
        self.running.as_ref().is_some_and(|(_, h)| !h.is_finished())
    }

    pub fn drain(&mut self) -> Vec<TxResult> {
        let mut out = std::mem::take(&mut self.leftover);
        if let Some((rx, _)) = &self.running {
            out.extend(rx.try_iter());
        }
        out
    }

    pub fn finish(&mut self) -> Result<BTreeMap<ObjectKey, i64>> {
        let (rx, handle) = self
            .running
            .take()
            .ok_or_else(|| Error::Domain("no execution was started".into()))?;
        let outcome = handle
            .join()
            .map_err(|_| Error::Invariant("execution thread panicked".into()))?;
        self.leftover.extend(rx.try_iter());
        Ok(outcome?.state_changes)
    }

    /// Drains and finishes in one step, for callers that do not stream.
    fn finish_with_results(&mut self) -> Result<(Vec<TxResult>, BTreeMap<ObjectKey, i64>)> {
        let changes = self.finish()?;
        Ok((self.drain(), changes))
    }
}

/// Where a level or batch runner gets its ordered partition from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Partitioner {
    /// Greedy coloring in descending-degree order.
    Greedy,
    /// Exact minimum coloring up to `cap` transactions, greedy above.
    MinColoring { cap: usize },
    /// Exact minimum weighted coloring up to `cap` transactions, greedy above.
    MinWeighted { cap: usize },
    /// The given ordered partition, used as is.
    Fixed(Vec<Vec<usize>>),
    /// Exact minimum coloring for homogeneous blocks, or for blocks whose
    /// length spread is at most `epsilon` when set. Otherwise the optimal
    /// partition when the block fits the oracle, else greedy.
    Auto { epsilon: Option<u64> },
}

impl Partitioner {
    fn partition(
        &self,
        block: &Block,
        c: &Constraints,
        order: ColorOrder,
        meta: &mut ScheduleMeta,
    ) -> Result<Vec<Vec<usize>>> {
        let g = &c.graph;
        let n = g.n();
        let fallback = |meta: &mut ScheduleMeta, what: &str, cap: usize| {
            meta.fallback = true;
            meta.notes.push(format!(
                "{what} skipped: {n} transactions exceed cap {cap}; used greedy coloring"
            ));
            ordered_partition(&greedy_by_degree(g), order)
        };
        Ok(match self {
            Partitioner::Greedy => ordered_partition(&greedy_by_degree(g), order),
            Partitioner::MinColoring { cap } if n <= *cap => ordered_partition(&exact_min_coloring(g, *cap)?, order),
            Partitioner::MinColoring { cap } => fallback(meta, "exact coloring", *cap),
            Partitioner::MinWeighted { cap } if n <= *cap => {
                ordered_partition(&exact_min_weighted_coloring(g, &c.lengths, *cap)?, order)
            }
            Partitioner::MinWeighted { cap } => fallback(meta, "exact weighted coloring", *cap),
            Partitioner::Fixed(p) => p.clone(),
            Partitioner::Auto { epsilon } => {
                let homogeneous = block.is_homogeneous() || epsilon.is_some_and(|e| block.is_epsilon_homogeneous(e));
                if homogeneous {
                    meta.notes.push("treated as homogeneous: minimum coloring".into());
                    return Partitioner::MinColoring { cap: DEFAULT_EXACT_CAP }.partition(block, c, order, meta);
                }
                if n <= DEFAULT_ORACLE_CAP {
                    meta.notes
                        .push("heterogeneous: optimal partition from exhaustive search".into());
                    optimal_latency_of(g, &c.lengths, OracleOptions::default())?.partition
                } else {
                    fallback(meta, "exhaustive search", DEFAULT_ORACLE_CAP)
                }
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Strategy {
    OrderFollowing,
    Level(Partitioner),
    Batch(Partitioner),
}

/// A built-in runner.
pub struct Runner {
    name: String,
    strategy: Strategy,
    color_order: ColorOrder,
    execution: Execution,
}

impl Runner {
    fn new(name: &str, strategy: Strategy) -> Self {
        Runner {
            name: name.into(),
            strategy,
            color_order: ColorOrder::default(),
            execution: Execution::default(),
        }
    }

    pub fn with_color_order(mut self, order: ColorOrder) -> Self {
        self.color_order = order;
        self
    }

    pub fn with_exec_options(mut self, options: ExecOptions) -> Self {
        self.execution = Execution::new(options);
        self
    }

    pub fn exec_options(&self) -> &ExecOptions {
        &self.execution.options
    }

    pub fn with_workers(mut self, workers: Workers) -> Self {
        self.execution.options.workers = workers;
        self
    }
}

/// Orients every conflict along block order.
pub fn runner_order_following() -> Runner {
    Runner::new("order", Strategy::OrderFollowing)
}

/// Level schedule of a greedy coloring.
pub fn runner_level_greedy() -> Runner {
    Runner::new("level-greedy", Strategy::Level(Partitioner::Greedy))
}

/// Level schedule of a minimum coloring, exact up to the default cap.
pub fn runner_min_coloring() -> Runner {
    runner_level(Partitioner::MinColoring { cap: DEFAULT_EXACT_CAP })
}

/// Level schedule over any partitioner.
pub fn runner_level(partitioner: Partitioner) -> Runner {
    let name = match &partitioner {
        Partitioner::Greedy => "level-greedy",
        Partitioner::MinColoring { .. } => "min-coloring",
        Partitioner::MinWeighted { .. } => "weighted",
        Partitioner::Fixed(_) => "level-fixed",
        Partitioner::Auto { .. } => "auto",
    };
    Runner::new(name, Strategy::Level(partitioner))
}

/// Batches run one after another, each from a partitioner.
pub fn runner_batch(partitioner: Partitioner) -> Runner {
    Runner::new("batch", Strategy::Batch(partitioner))
}

pub const RUNNER_NAMES: &[&str] = &["order", "level-greedy", "min-coloring", "weighted", "auto", "batch"];

/// Knobs shared by [`runner_by_name`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunnerOptions {
    pub exact_cap: usize,
    pub weighted_cap: usize,
    pub color_order: ColorOrder,
    /// Partitioner used by the batch runner.
    pub batch_partitioner: Partitioner,
    /// Length spread treated as homogeneous by the auto runner.
    pub treat_epsilon_homogeneous: Option<u64>,
    pub workers: Workers,
}

impl Default for RunnerOptions {
    fn default() -> Self {
        RunnerOptions {
            exact_cap: DEFAULT_EXACT_CAP,
            weighted_cap: DEFAULT_WEIGHTED_CAP,
            color_order: ColorOrder::default(),
            batch_partitioner: Partitioner::MinColoring { cap: DEFAULT_EXACT_CAP },
            treat_epsilon_homogeneous: None,
            workers: Workers::default(),
        }
    }
}

/// Looks a runner up by one of [`RUNNER_NAMES`].
pub fn runner_by_name(name: &str, opts: &RunnerOptions) -> Result<Runner> {
    let runner = match name {
        "order" => runner_order_following(),
        "level-greedy" => runner_level_greedy(),
        "min-coloring" => runner_level(Partitioner::MinColoring { cap: opts.exact_cap }),
        "weighted" => runner_level(Partitioner::MinWeighted { cap: opts.weighted_cap }),
        "auto" => runner_level(Partitioner::Auto {
            epsilon: opts.treat_epsilon_homogeneous,
        }),
        "batch" => runner_batch(opts.batch_partitioner.clone()),
        other => {
            return Err(Error::Domain(format!(
                "unknown runner {other:?}; expected one of {}",
                RUNNER_NAMES.join(", ")
            )))
        }
    };
    Ok(runner.with_color_order(opts.color_order).with_workers(opts.workers))
}

fn fixed_partition_error(runner: &str, e: Error) -> Error {
    match e {
        Error::IllegalPartition(..)
        | Error::NotAPartition(_)
        | Error::VertexOutOfRange { .. }
        | Error::EmptyBatch(_) => Error::RunnerInvalidSchedule { runner: runner.into() },
        e => e,
    }
}

impl BlockRunner for Runner {
    fn name(&self) -> &str {
        &self.name
    }

    fn make_schedule(&self, block: &Block, c: &Constraints) -> Result<PlannedSchedule> {
        let mut meta = ScheduleMeta {
            runner: self.name.clone(),
            ..Default::default()
        };
        let schedule = match &self.strategy {
            Strategy::OrderFollowing => Schedule::Graph(total_order_schedule(block, &c.graph)?),
            Strategy::Level(p) | Strategy::Batch(p) => {
                let partition = p.partition(block, c, self.color_order, &mut meta)?;
                let built = match &self.strategy {
                    Strategy::Level(_) => level_schedule(&partition, &c.graph).map(Schedule::Graph),
                    _ => BatchSchedule::new(partition.clone(), &c.graph).map(Schedule::Batch),
                };
                meta.partition = Some(partition);
                built.map_err(|e| fixed_partition_error(&self.name, e))?
            }
        };
        Ok(PlannedSchedule { schedule, meta })
    }

    fn init_execution(&mut self, block: &Block, schedule: &Schedule, state: &GlobalState) -> Result<()> {
        self.execution.init(block, schedule, state)
    }

    fn start_execution(&mut self) -> Result<()> {
        self.execution.start()
    }

    fn is_execution_running(&self) -> bool {
        self.execution.is_running()
    }

    fn next_execution_results(&mut self) -> Vec<TxResult> {
        self.execution.drain()
    }

    fn state_changes(&mut self) -> Result<BTreeMap<ObjectKey, i64>> {
        self.execution.finish()
    }
}

/// What one block produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockOutcome {
    pub state_changes: BTreeMap<ObjectKey, i64>,
    /// Results in emission order.
    pub results: Vec<TxResult>,
    /// Absent when the block was rejected.
    pub planned: Option<PlannedSchedule>,
    /// Set when the block failed validation and nothing ran.
    pub rejected: Option<String>,
}

/// Runs one block through `runner` against `state`.
///
/// An invalid block yields an error result per transaction and no state
/// change. A schedule the runner's own validation rejects is a fatal
/// [`Error::RunnerInvalidSchedule`].
pub fn process_block(runner: &mut dyn BlockRunner, block: &Block, state: &GlobalState) -> Result<BlockOutcome> {
    let constraints = match block.validate().and_then(|()| Constraints::prepare(block)) {
        Ok(c) => c,
        Err(e) => {
            let msg = e.to_string();
            return Ok(BlockOutcome {
                state_changes: BTreeMap::new(),
                results: block
                    .txs
                    .iter()
                    .map(|tx| TxResult::failed(tx.id, msg.clone()))
                    .collect(),
                planned: None,
                rejected: Some(msg),
            });
        }
    };
    let planned = runner.make_schedule(block, &constraints)?;
    if !runner.validate_schedule(&planned.schedule, &constraints)? {
        return Err(Error::RunnerInvalidSchedule {
            runner: runner.name().into(),
        });
    }
    runner.init_execution(block, &planned.schedule, state)?;
    runner.start_execution()?;
    let mut results = Vec::with_capacity(block.len());
    while runner.is_execution_running() {
        let batch = runner.next_execution_results();
        if batch.is_empty() {
            std::thread::sleep(Duration::from_micros(50));
        }
        results.extend(batch);
    }
    let state_changes = runner.state_changes()?;
    results.extend(runner.next_execution_results());
    if results.len() != block.len() {
        return Err(Error::Invariant(format!(
            "block {} emitted {} results for {} transactions",
            block.seq,
            results.len(),
            block.len()
        )));
    }
    Ok(BlockOutcome {
        state_changes,
        results,
        planned: Some(planned),
        rejected: None,
    })
}

/// Checks that `block` directly follows `prev` (or anchors the chain when
/// `prev` is `None`).
pub fn check_link(prev: Option<&Block>, block: &Block) -> Result<()> {
    if let Some(prev) = prev {
        if block.seq != prev.seq + 1 {
            return Err(Error::SeqGap {
                expected: prev.seq + 1,
                got: block.seq,
            });
        }
        if block.prev_hash != prev.hash() {
            return Err(Error::HashMismatch { seq: block.seq });
        }
    }
    Ok(())
}

/// Checks every link of a stream.
pub fn check_stream(stream: &[Block]) -> Result<()> {
    let mut prev = None;
    for b in stream {
        check_link(prev, b)?;
        prev = Some(b);
    }
    Ok(())
}

/// One persisted block. Digests are hex SHA-256; `chain` covers the previous
/// record's chain and all other fields.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LedgerRecord {
    pub seq: u64,
    pub block_hash: String,
    pub results_digest: String,
    pub state_digest: String,
    pub chain: String,
}

fn chain_digest(prev: &[u8; 32], seq: u64, block_hash: &str, results: &str, state: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(prev);
    h.update(seq.to_le_bytes());
    for part in [block_hash, results, state] {
        h.update(part.as_bytes());
        h.update(b"\n");
    }
    h.finalize().into()
}

/// Append-only file of length-prefixed JSON records (`u32` little-endian
/// length, then the record).
pub struct Ledger {
    file: File,
    path: PathBuf,
    records: Vec<LedgerRecord>,
    last_chain: [u8; 32],
}

impl Ledger {
    /// Opens or creates a ledger. A torn final record (fewer bytes than its
    /// prefix announces) is truncated away; any other damage, including a
    /// broken digest chain, is an error.
    pub fn open(path: impl AsRef<Path>) -> Result<Ledger> {
        let path = path.as_ref().to_path_buf();
        let mut file = OpenOptions::new().read(true).append(true).create(true).open(&path)?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes)?;
        let (records, valid_len) = parse_records(&bytes)?;
        if valid_len < bytes.len() {
            file.set_len(valid_len as u64)?;
            file.sync_data()?;
        }
        let last_chain = verify_chain(&records)?;
        Ok(Ledger {
            file,
            path,
            records,
            last_chain,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn records(&self) -> &[LedgerRecord] {
        &self.records
    }

    pub fn append(
        &mut self,
        seq: u64,
        block_hash: [u8; 32],
        results: [u8; 32],
        state: [u8; 32],
    ) -> Result<LedgerRecord> {
        let (block_hash, results_digest, state_digest) =
            (hex::encode(block_hash), hex::encode(results), hex::encode(state));
        let chain = chain_digest(&self.last_chain, seq, &block_hash, &results_digest, &state_digest);
        let record = LedgerRecord {
            seq,
            block_hash,
            results_digest,
            state_digest,
            chain: hex::encode(chain),
        };
        let body = serde_json::to_vec(&record).expect("record serialization is infallible");
        let mut framed = (body.len() as u32).to_le_bytes().to_vec();
        framed.extend_from_slice(&body);
        self.file.write_all(&framed)?;
        self.file.sync_data()?;
        self.last_chain = chain;
        self.records.push(record.clone());
        Ok(record)
    }
}

/// Reads and verifies a ledger file without modifying it.
pub fn read_ledger(path: impl AsRef<Path>) -> Result<Vec<LedgerRecord>> {
    let bytes = std::fs::read(path)?;
    let (records, _) = parse_records(&bytes)?;
    verify_chain(&records)?;
    Ok(records)
}

fn parse_records(bytes: &[u8]) -> Result<(Vec<LedgerRecord>, usize)> {
    let mut records = Vec::new();
    let mut pos = 0;
    while pos < bytes.len() {
        let Some(prefix) = bytes.get(pos..pos + 4) else { break };
        let len = u32::from_le_bytes(prefix.try_into().expect("4 bytes")) as usize;
        let Some(body) = bytes.get(pos + 4..pos + 4 + len) else {
            break;
        };
        let record: LedgerRecord = serde_json::from_slice(body)
            .map_err(|e| Error::Ledger(format!("record {} is corrupt: {e}", records.len())))?;
        records.push(record);
        pos += 4 + len;
    }
    Ok((records, pos))
}

fn verify_chain(records: &[LedgerRecord]) -> Result<[u8; 32]> {
    let mut chain = [0u8; 32];
    for (i, r) in records.iter().enumerate() {
        if i > 0 && r.seq != records[i - 1].seq + 1 {
            return Err(Error::Ledger(format!(
                "record {i}: seq {} does not follow {}",
                r.seq,
                records[i - 1].seq
            )));
        }
        let expected = chain_digest(&chain, r.seq, &r.block_hash, &r.results_digest, &r.state_digest);
        if hex::encode(expected) != r.chain {
            return Err(Error::Ledger(format!(
                "record {i} (seq {}): digest chain broken",
                r.seq
            )));
        }
        chain = expected;
    }
    Ok(chain)
}

#[derive(Debug, Clone, Default)]
pub struct MainLoopOptions {
    pub ledger: Option<PathBuf>,
    /// Continue after the records already in the ledger instead of refusing
    /// a non-empty ledger.
    pub resume: bool,
    /// Stop after this many newly processed blocks.
    pub max_blocks: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct MainLoopReport {
    pub state: GlobalState,
    /// Blocks re-executed to rebuild the state from ledger records.
    pub replayed: usize,
    /// Blocks processed and persisted in this run.
    pub processed: usize,
    /// Per-block outcomes of the newly processed blocks.
    pub outcomes: Vec<BlockOutcome>,
}

/// Processes `stream` in order from `initial`, applying each block's changes
/// and appending a ledger record per block.
///
/// With `resume`, blocks already recorded in the ledger are re-executed and
/// checked against their records before processing continues. A sequence gap
/// or broken `prev_hash` link halts the loop with an error; records for
/// earlier blocks stay persisted.
pub fn run_main_loop(
    runner: &mut dyn BlockRunner,
    stream: &[Block],
    initial: &GlobalState,
    opts: &MainLoopOptions,
) -> Result<MainLoopReport> {
    let mut ledger = match &opts.ledger {
        Some(path) => Some(Ledger::open(path)?),
        None => None,
    };
    let recorded: Vec<LedgerRecord> = ledger.as_ref().map(|l| l.records().to_vec()).unwrap_or_default();
    if !recorded.is_empty() && !opts.resume {
        return Err(Error::Ledger(format!(
            "ledger already holds {} records; resume to continue it",
            recorded.len()
        )));
    }
    if recorded.len() > stream.len() {
        return Err(Error::Ledger(format!(
            "ledger holds {} records but the stream has only {} blocks",
            recorded.len(),
            stream.len()
        )));
    }

    let mut state = initial.clone();
    let mut report = MainLoopReport {
        state: GlobalState::new(),
        replayed: 0,
        processed: 0,
        outcomes: Vec::new(),
    };
    for (i, block) in stream.iter().enumerate() {
        check_link(i.checked_sub(1).map(|j| &stream[j]), block)?;
        let replaying = i < recorded.len();
        if !replaying && opts.max_blocks.is_some_and(|m| report.processed >= m) {
            break;
        }
        let outcome = process_block(runner, block, &state)?;
        state.apply(&outcome.state_changes);
        let (block_hash, results, post) = (block.hash(), results_digest(&outcome.results), state.digest());
        if replaying {
            let r = &recorded[i];
            if r.seq != block.seq || r.block_hash != hex::encode(block_hash) {
                return Err(Error::Ledger(format!(
                    "record {i} does not match block seq {}",
                    block.seq
                )));
            }
            if r.results_digest != hex::encode(results) || r.state_digest != hex::encode(post) {
                return Err(Error::Ledger(format!(
                    "replay of block {} diverged from the ledger",
                    block.seq
                )));
            }
            report.replayed += 1;
        } else {
            if let Some(l) = ledger.as_mut() {
                l.append(block.seq, block_hash, results, post)?;
            }
            report.processed += 1;
            report.outcomes.push(outcome);
        }
    }
    report.state = state;
    Ok(report)
}

/// Executes one block's schedule synchronously through an [`Execution`];
/// used by callers that want the outcome without streaming.
pub fn execute_planned(
    block: &Block,
    planned: &PlannedSchedule,
    state: &GlobalState,
    options: ExecOptions,
) -> Result<(Vec<TxResult>, BTreeMap<ObjectKey, i64>)> {
    let mut exec = Execution::new(options);
    exec.init(block, &planned.schedule, state)?;
    exec.start()?;
    exec.finish_with_results()
}
