//! Core domain types: transactions, blocks, global state, results.
//!
//! Blocks are stored as JSON documents; a block stream is JSON Lines with one
//! compact block per line. Serialization is canonical (sets are sorted, field
//! order fixed), so `parse -> serialize -> parse` is the identity and the
//! serialized bytes double as the input to [`Block::hash`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Transaction id. Within a block the ids are exactly `0..n`.
pub type TxId = usize;

/// Name of an object in the global state.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectKey(String);

impl ObjectKey {
    pub fn new(name: impl Into<String>) -> Self {
        ObjectKey(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ObjectKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ObjectKey {
    fn from(s: &str) -> Self {
        ObjectKey(s.to_owned())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ProgramKind {
    /// Writes `const` to every key of the write set.
    WriteConst,
    /// Writes `sum(reads) + const` to every key of the write set.
    SumAndAdd,
    /// Touches nothing.
    SleepOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TxProgram {
    pub kind: ProgramKind,
    #[serde(rename = "const", default)]
    pub const_value: i64,
}

impl TxProgram {
    pub fn write_const(v: i64) -> Self {
        TxProgram {
            kind: ProgramKind::WriteConst,
            const_value: v,
        }
    }

    pub fn sum_and_add(v: i64) -> Self {
        TxProgram {
            kind: ProgramKind::SumAndAdd,
            const_value: v,
        }
    }

    pub fn sleep_only() -> Self {
        TxProgram {
            kind: ProgramKind::SleepOnly,
            const_value: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transaction {
    pub id: TxId,
    #[serde(rename = "reads")]
    pub read_set: BTreeSet<ObjectKey>,
    #[serde(rename = "writes")]
    pub write_set: BTreeSet<ObjectKey>,
    pub length: u64,
    pub program: TxProgram,
}

impl Transaction {
    pub fn new<R, W>(id: TxId, reads: R, writes: W, length: u64, program: TxProgram) -> Self
    where
        R: IntoIterator,
        R::Item: Into<ObjectKey>,
        W: IntoIterator,
        W::Item: Into<ObjectKey>,
    {
        Transaction {
            id,
            read_set: reads.into_iter().map(Into::into).collect(),
            write_set: writes.into_iter().map(Into::into).collect(),
            length,
            program,
        }
    }

    /// Keys the program actually reads (empty for `SLEEP_ONLY` and `WRITE_CONST`).
    pub fn effective_reads(&self) -> impl Iterator<Item = &ObjectKey> {
        let reads = matches!(self.program.kind, ProgramKind::SumAndAdd);
        self.read_set.iter().filter(move |_| reads)
    }
}

impl From<String> for ObjectKey {
    fn from(s: String) -> Self {
        ObjectKey(s)
    }
}

/// Runs a transaction's program on the values it read.
///
/// `reads` must contain every key the program reads, and nothing outside the
/// read set. The result only contains keys of the write set.
pub fn run_program(tx: &Transaction, reads: &BTreeMap<ObjectKey, i64>) -> Result<BTreeMap<ObjectKey, i64>> {
    if let Some(extra) = reads.keys().find(|k| !tx.read_set.contains(*k)) {
        return Err(Error::Domain(format!(
            "transaction {} was given a value for {extra}, which is outside its read set",
            tx.id
        )));
    }
    let value = match tx.program.kind {
        ProgramKind::SleepOnly => return Ok(BTreeMap::new()),
        ProgramKind::WriteConst => tx.program.const_value,
        ProgramKind::SumAndAdd => {
            let mut sum = tx.program.const_value;
            for key in &tx.read_set {
                let v = reads.get(key).ok_or_else(|| Error::MissingRead {
                    tx: tx.id,
                    key: key.to_string(),
                })?;
                sum = sum.wrapping_add(*v);
            }
            sum
        }
    };
    Ok(tx.write_set.iter().map(|k| (k.clone(), value)).collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Block {
    pub seq: u64,
    #[serde(with = "hex_bytes")]
    pub prev_hash: Vec<u8>,
    pub txs: Vec<Transaction>,
}

impl Block {
    pub fn new(seq: u64, prev_hash: Vec<u8>, txs: Vec<Transaction>) -> Self {
        Block { seq, prev_hash, txs }
    }

    pub fn len(&self) -> usize {
        self.txs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.txs.is_empty()
    }

    /// Checks the structural invariants: ids are exactly `0..n` with no
    /// repeats, every length is positive, and no key is empty.
    pub fn validate(&self) -> Result<()> {
        let n = self.txs.len();
        let mut seen = vec![false; n];
        for tx in &self.txs {
            if tx.id >= n {
                if self.txs.iter().filter(|t| t.id == tx.id).count() > 1 {
                    return Err(Error::DuplicateTxId(tx.id));
                }
                return Err(Error::TxIdOutOfRange { id: tx.id, n });
            }
            if std::mem::replace(&mut seen[tx.id], true) {
                return Err(Error::DuplicateTxId(tx.id));
            }
            if tx.length == 0 {
                return Err(Error::ZeroLength(tx.id));
            }
            if tx.read_set.iter().chain(&tx.write_set).any(|k| k.0.is_empty()) {
                return Err(Error::EmptyKey(tx.id));
            }
        }
        Ok(())
    }

    /// Transaction with the given id. Assumes a validated block.
    pub fn tx(&self, id: TxId) -> &Transaction {
        &self.txs[self.index_of()[id]]
    }

    /// Maps id to position in `txs`. Assumes a validated block.
    pub fn index_of(&self) -> Vec<usize> {
        let mut idx = vec![0; self.txs.len()];
        for (pos, tx) in self.txs.iter().enumerate() {
            idx[tx.id] = pos;
        }
        idx
    }

    /// Transactions reordered by id. Assumes a validated block.
    pub fn txs_by_id(&self) -> Vec<&Transaction> {
        let mut v: Vec<&Transaction> = self.txs.iter().collect();
        v.sort_by_key(|t| t.id);
        v
    }

    /// Lengths indexed by transaction id. Assumes a validated block.
    pub fn lengths(&self) -> Vec<u64> {
        let mut out = vec![0; self.txs.len()];
        for tx in &self.txs {
            out[tx.id] = tx.length;
        }
        out
    }

    /// All lengths equal.
    pub fn is_homogeneous(&self) -> bool {
        self.is_epsilon_homogeneous(0)
    }

    /// Pairwise length spread is at most `epsilon`.
    pub fn is_epsilon_homogeneous(&self, epsilon: u64) -> bool {
        let min = self.txs.iter().map(|t| t.length).min();
        let max = self.txs.iter().map(|t| t.length).max();
        match (min, max) {
            (Some(lo), Some(hi)) => hi - lo <= epsilon,
            _ => true,
        }
    }

    pub fn from_json(text: &str) -> Result<Block> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            msg: e.to_string(),
        })
    }

    /// Canonical pretty JSON, newline terminated.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("block serialization is infallible");
        s.push('\n');
        s
    }

    /// Canonical single-line JSON, as used in stream files.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("block serialization is infallible")
    }

    /// SHA-256 of the canonical single-line serialization.
    pub fn hash(&self) -> [u8; 32] {
        Sha256::digest(self.to_json_line().as_bytes()).into()
    }
}

/// Parses a JSON Lines block stream. Blank lines are skipped.
pub fn read_stream(text: &str) -> Result<Vec<Block>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let block = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: i + 1,
            msg: e.to_string(),
        })?;
        out.push(block);
    }
    Ok(out)
}

pub fn write_stream(blocks: &[Block]) -> String {
    let mut s = String::new();
    for b in blocks {
        s.push_str(&b.to_json_line());
        s.push('\n');
    }
    s
}

/// Global key-value state. Absent keys read as 0.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GlobalState {
    pub entries: BTreeMap<ObjectKey, i64>,
}

impl GlobalState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, key: &ObjectKey) -> i64 {
        self.entries.get(key).copied().unwrap_or(0)
    }

    pub fn set(&mut self, key: ObjectKey, value: i64) {
        self.entries.insert(key, value);
    }

    pub fn apply(&mut self, changes: &BTreeMap<ObjectKey, i64>) {
        for (k, v) in changes {
            self.entries.insert(k.clone(), *v);
        }
    }

    pub fn from_json(text: &str) -> Result<GlobalState> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            msg: e.to_string(),
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("state serialization is infallible");
        s.push('\n');
        s
    }

    /// SHA-256 over the sorted `key=value` lines.
    pub fn digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        for (k, v) in &self.entries {
            h.update(k.0.as_bytes());
            h.update(b"=");
            h.update(v.to_string().as_bytes());
            h.update(b"\n");
        }
        h.finalize().into()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TxResult {
    pub tx_id: TxId,
    pub read_values: BTreeMap<ObjectKey, i64>,
    pub written_values: BTreeMap<ObjectKey, i64>,
    /// Simulated finish time; only the simulated executor sets it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finish_time: Option<u64>,
    /// Set when the block was rejected and the transaction did not run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl TxResult {
    pub fn ok(tx_id: TxId, read_values: BTreeMap<ObjectKey, i64>, written_values: BTreeMap<ObjectKey, i64>) -> Self {
        TxResult {
            tx_id,
            read_values,
            written_values,
            finish_time: None,
            error: None,
        }
    }

    pub fn failed(tx_id: TxId, error: impl Into<String>) -> Self {
        TxResult {
            tx_id,
            read_values: BTreeMap::new(),
            written_values: BTreeMap::new(),
            finish_time: None,
            error: Some(error.into()),
        }
    }

    /// Same reads, writes, and error, ignoring timing.
    pub fn same_content(&self, other: &TxResult) -> bool {
        self.tx_id == other.tx_id
            && self.read_values == other.read_values
            && self.written_values == other.written_values
            && self.error == other.error
    }
}

/// SHA-256 over results sorted by id; timing is excluded.
pub fn results_digest(results: &[TxResult]) -> [u8; 32] {
    let mut sorted: Vec<&TxResult> = results.iter().collect();
    sorted.sort_by_key(|r| r.tx_id);
    let mut h = Sha256::new();
    for r in sorted {
        let stripped = TxResult {
            finish_time: None,
            ..r.clone()
        };
        h.update(
            serde_json::to_string(&stripped)
                .expect("result serialization is infallible")
                .as_bytes(),
        );
        h.update(b"\n");
    }
    h.finalize().into()
}

mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        hex::decode(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn keys(v: &[(&str, i64)]) -> BTreeMap<ObjectKey, i64> {
        v.iter().map(|(k, x)| (ObjectKey::from(*k), *x)).collect()
    }

    #[test]
    fn write_const_writes_every_key() {
        let tx = Transaction::new(0, Vec::<&str>::new(), ["x"], 1, TxProgram::write_const(7));
        assert_eq!(run_program(&tx, &BTreeMap::new()).unwrap(), keys(&[("x", 7)]));
    }

    #[test]
    fn sum_and_add_single_read() {
        let tx = Transaction::new(0, ["x"], ["y"], 1, TxProgram::sum_and_add(1));
        assert_eq!(run_program(&tx, &keys(&[("x", 1)])).unwrap(), keys(&[("y", 2)]));
    }

    #[test]
    fn sum_and_add_fans_out() {
        let tx = Transaction::new(0, ["a", "b"], ["c", "d"], 1, TxProgram::sum_and_add(0));
        let out = run_program(&tx, &keys(&[("a", 3), ("b", 4)])).unwrap();
        assert_eq!(out, keys(&[("c", 7), ("d", 7)]));
    }

    #[test]
    fn sum_and_add_wraps() {
        let tx = Transaction::new(0, ["a"], ["a"], 1, TxProgram::sum_and_add(1));
        let out = run_program(&tx, &keys(&[("a", i64::MAX)])).unwrap();
        assert_eq!(out, keys(&[("a", i64::MIN)]));
    }

    #[test]
    fn sleep_only_writes_nothing() {
        let tx = Transaction::new(0, ["a"], ["b"], 3, TxProgram::sleep_only());
        assert!(run_program(&tx, &BTreeMap::new()).unwrap().is_empty());
    }

    #[test]
    fn missing_and_extra_reads_are_rejected() {
        let tx = Transaction::new(4, ["a"], ["b"], 1, TxProgram::sum_and_add(0));
        assert!(matches!(
            run_program(&tx, &BTreeMap::new()),
            Err(Error::MissingRead { tx: 4, .. })
        ));
        assert!(run_program(&tx, &keys(&[("a", 1), ("z", 1)])).is_err());
    }

    #[test]
    fn unknown_program_kind_fails_to_parse() {
        let text = r#"{"seq":0,"prev_hash":"","txs":[{"id":0,"reads":[],"writes":["x"],"length":1,"program":{"kind":"LOOP_FOREVER","const":0}}]}"#;
        assert!(matches!(Block::from_json(text), Err(Error::Parse { .. })));
    }

    #[test]
    fn parse_error_reports_line() {
        let text = "{\n  \"seq\": 0,\n  \"prev_hash\": \"zz\",\n  \"txs\": []\n}\n";
        match Block::from_json(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn validate_catches_bad_ids_and_lengths() {
        let tx = |id, len| Transaction::new(id, ["a"], ["a"], len, TxProgram::sum_and_add(0));
        assert!(Block::new(0, vec![], vec![tx(1, 1), tx(0, 1)]).validate().is_ok());
        assert!(matches!(
            Block::new(0, vec![], vec![tx(0, 1), tx(0, 1)]).validate(),
            Err(Error::DuplicateTxId(0))
        ));
        assert!(matches!(
            Block::new(0, vec![], vec![tx(0, 1), tx(5, 1)]).validate(),
            Err(Error::TxIdOutOfRange { id: 5, n: 2 })
        ));
        assert!(matches!(
            Block::new(0, vec![], vec![tx(0, 0)]).validate(),
            Err(Error::ZeroLength(0))
        ));
    }

    #[test]
    fn state_reads_default_to_zero() {
        let mut s = GlobalState::new();
        assert_eq!(s.get(&"q".into()), 0);
        s.set("q".into(), 5);
        assert_eq!(s.get(&"q".into()), 5);
    }

    #[test]
    fn block_json_is_canonical() {
        let b = Block::new(
            3,
            vec![0xab, 0x01],
            vec![Transaction::new(0, ["b", "a"], ["c"], 2, TxProgram::sum_and_add(-4))],
        );
        let text = b.to_json();
        assert!(text.contains("\"prev_hash\": \"ab01\""));
        assert!(text.contains("\"const\": -4"));
        assert!(text.contains("\"kind\": \"SUM_AND_ADD\""));
        let back = Block::from_json(&text).unwrap();
        assert_eq!(back, b);
        assert_eq!(back.to_json(), text);
    }
}
