use thiserror::Error;

use crate::model::TxId;

/// Coarse classification used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Malformed input or a violated precondition.
    Validation,
    /// Input above a configured size cap for an exact algorithm.
    Capacity,
    /// An internal invariant was violated. Always a bug.
    Invariant,
    /// Filesystem or ledger I/O.
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("duplicate transaction id {0}")]
    DuplicateTxId(TxId),

    #[error("transaction id {id} out of range for a block of {n} transactions")]
    TxIdOutOfRange { id: TxId, n: usize },

    #[error("transaction {0} has zero length")]
    ZeroLength(TxId),

    #[error("transaction {0} declares an empty object key")]
    EmptyKey(TxId),

    #[error("transaction {tx}: read of {key} not supplied")]
    MissingRead { tx: TxId, key: String },

    #[error("transaction {0} compared with itself")]
    SameTransaction(TxId),

    #[error("self-loop on vertex {0}")]
    SelfLoop(usize),

    #[error("vertex {v} out of range (n = {n})")]
    VertexOutOfRange { v: usize, n: usize },

    #[error("vertex count mismatch: schedule has {schedule}, graph has {graph}")]
    VertexMismatch { schedule: usize, graph: usize },

    #[error("length vector has {got} entries, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("order is not a permutation of 0..{0}")]
    NotPermutation(usize),

    #[error("schedule contains a cycle")]
    Cycle,

    #[error("illegal partition: conflicting transactions {0} and {1} share a set")]
    IllegalPartition(TxId, TxId),

    #[error("not a partition: {0}")]
    NotAPartition(String),

    #[error("illegal coloring: adjacent vertices {0} and {1} share color {2}")]
    IllegalColoring(usize, usize, u32),

    #[error("color {0} is unused")]
    UnusedColor(u32),

    #[error("batch {0} is empty")]
    EmptyBatch(usize),

    #[error("invalid color permutation: {0}")]
    BadPermutation(String),

    #[error("schedule is not valid for the block's conflict graph")]
    InvalidSchedule,

    #[error("{what}: {n} vertices exceeds the cap of {cap}{hint}")]
    Capacity {
        what: &'static str,
        n: usize,
        cap: usize,
        hint: &'static str,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("block stream: expected seq {expected}, got {got}")]
    SeqGap { expected: u64, got: u64 },

    #[error("block {seq}: prev_hash does not match the hash of the previous block")]
    HashMismatch { seq: u64 },

    #[error("ledger: {0}")]
    Ledger(String),

    #[error("runner {runner} produced an invalid schedule")]
    RunnerInvalidSchedule { runner: String },

    #[error("infeasible workload spec: {0}")]
    Infeasible(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Capacity { .. } => ErrorClass::Capacity,
            Error::Invariant(_) | Error::RunnerInvalidSchedule { .. } => ErrorClass::Invariant,
            Error::Io(_) | Error::Ledger(_) => ErrorClass::Io,
            _ => ErrorClass::Validation,
        }
    }

    pub(crate) fn capacity(what: &'static str, n: usize, cap: usize) -> Self {
        Error::Capacity { what, n, cap, hint: "" }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
