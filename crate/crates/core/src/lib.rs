//! Deterministic, serializable concurrent execution of transaction blocks.
//!
//! A block's transactions declare read and write sets. From them we derive a
//! conflict graph, turn a coloring (a partition into conflict-free sets) into a
//! dependency DAG, and execute that DAG concurrently with one signal per edge.
//! Every valid schedule yields the same outcome as some serial execution, so all
//! replicas running any of the built-in runners agree on the resulting state.
//!
//! Module map:
//!
//! * [`model`]: transactions, blocks, global state, block file formats.
//! * [`conflict`]: the pairwise conflict relation and the conflict graph.
//! * [`coloring`]: greedy, exact, and exact weighted colorings; DAG-to-coloring.
//! * [`schedule`]: graph and batch schedules, validity, latency, level schedules.
//! * [`executor`]: sequential, signal-driven, batch, and simulated executors.
//! * [`asmr`]: the block-runner interface, built-in runners, main loop, ledger.
//! * [`analysis`]: optimal-latency oracles, chain-vs-coloring ratio study,
//!   counterexample searches.
//! * [`workload`]: seeded block and stream generators.

pub mod analysis;
pub mod asmr;
pub mod coloring;
pub mod conflict;
pub mod executor;
pub mod model;
pub mod par;
pub mod schedule;
pub mod workload;

mod error;

pub use error::{Error, ErrorClass};

pub use coloring::Coloring;
pub use conflict::ConflictGraph;
pub use model::{Block, GlobalState, ObjectKey, ProgramKind, Transaction, TxId, TxProgram, TxResult};
pub use schedule::{BatchSchedule, GraphSchedule, LatencyReport};
