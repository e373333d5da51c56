//! Seeded generators for synthetic blocks and block streams.
//!
//! A [`WorkloadSpec`] is plain JSON, for example:
//!
//! ```json
//! {
//!   "n_txs": 8,
//!   "keys": { "kind": "uniform", "universe": 16, "reads": [0, 2], "writes": [1, 2] },
//!   "lengths": { "kind": "heterogeneous", "choices": [1, 10, 100, 1000] },
//!   "seed": 7
//! }
//! ```

use rand::seq::{IteratorRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Block, ObjectKey, Transaction, TxProgram};

/// Inclusive `[min, max]` range, sampled uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeRange(pub usize, pub usize);

impl SizeRange {
    fn sample(&self, rng: &mut impl Rng) -> usize {
        rng.gen_range(self.0..=self.1)
    }
}

/// How read and write sets are drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KeyModel {
    /// Sets drawn uniformly without replacement from keys `k0..k{universe-1}`.
    Uniform {
        universe: usize,
        reads: SizeRange,
        writes: SizeRange,
    },
    /// Each pair of transactions conflicts independently with probability
    /// `p` through a dedicated key. One side always writes it; the other
    /// reads or writes it with equal odds.
    Gnp { p: f64 },
    /// Transaction `i` reads and writes `x{i}` and `x{i+1}`.
    Chain,
}

impl Default for KeyModel {
    fn default() -> Self {
        KeyModel::Uniform {
            universe: 16,
            reads: SizeRange(0, 2),
            writes: SizeRange(1, 2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LengthMode {
    Homogeneous {
        c: u64,
    },
    /// Lengths uniform in `[c, c + epsilon]`.
    EpsilonHomogeneous {
        c: u64,
        epsilon: u64,
    },
    /// Lengths drawn uniformly from `choices`.
    Heterogeneous {
        choices: Vec<u64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadSpec {
    pub n_txs: usize,
    #[serde(default)]
    pub keys: KeyModel,
    pub lengths: LengthMode,
    pub seed: u64,
}

impl WorkloadSpec {
    pub fn new(n_txs: usize, keys: KeyModel, lengths: LengthMode, seed: u64) -> Self {
        WorkloadSpec {
            n_txs,
            keys,
            lengths,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.keys {
            KeyModel::Uniform {
                universe,
                reads,
                writes,
            } => {
                for (name, r) in [("reads", reads), ("writes", writes)] {
                    if r.0 > r.1 {
                        return Err(Error::Infeasible(format!("{name} range [{}, {}] is empty", r.0, r.1)));
                    }
                    if r.1 > *universe {
                        return Err(Error::Infeasible(format!(
                            "{name} size up to {} exceeds key universe {universe}",
                            r.1
                        )));
                    }
                }
            }
            KeyModel::Gnp { p } => {
                if !(0.0..=1.0).contains(p) {
                    return Err(Error::Infeasible(format!("edge probability {p} outside [0, 1]")));
                }
            }
            KeyModel::Chain => {}
        }
        match &self.lengths {
            LengthMode::Homogeneous { c } | LengthMode::EpsilonHomogeneous { c, .. } if *c == 0 => {
                Err(Error::Infeasible("length c must be at least 1".into()))
            }
            LengthMode::EpsilonHomogeneous { c, epsilon } if c.checked_add(*epsilon).is_none() => {
                Err(Error::Infeasible("c + epsilon overflows".into()))
            }
            LengthMode::Heterogeneous { choices } if choices.is_empty() || choices.contains(&0) => Err(
                Error::Infeasible("length choices must be non-empty and positive".into()),
            ),
            _ => Ok(()),
        }
    }

    pub fn from_json(text: &str) -> Result<WorkloadSpec> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            msg: e.to_string(),
        })
    }

    /// Parses either a single spec object or an array of specs.
    pub fn list_from_json(text: &str) -> Result<Vec<WorkloadSpec>> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum OneOrMany {
            One(WorkloadSpec),
            Many(Vec<WorkloadSpec>),
        }
        match serde_json::from_str(text) {
            Ok(OneOrMany::One(s)) => Ok(vec![s]),
            Ok(OneOrMany::Many(v)) => Ok(v),
            Err(e) => Err(Error::Parse {
                line: e.line(),
                msg: e.to_string(),
            }),
        }
    }
}

/// Generates a reproducible block with `seq = 0` and an empty `prev_hash`.
///
/// Every transaction runs `SUM_AND_ADD` with constant `id + 1`, so outcomes
/// depend on execution order wherever transactions conflict.
pub fn gen_block(spec: &WorkloadSpec) -> Result<Block> {
    spec.validate()?;
    let n = spec.n_txs;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut reads: Vec<Vec<ObjectKey>> = vec![Vec::new(); n];
    let mut writes: Vec<Vec<ObjectKey>> = vec![Vec::new(); n];
    match &spec.keys {
        KeyModel::Uniform {
            universe,
            reads: rs,
            writes: ws,
        } => {
            for i in 0..n {
                let (r, w) = (rs.sample(&mut rng), ws.sample(&mut rng));
                reads[i] = (0..*universe)
                    .choose_multiple(&mut rng, r)
                    .into_iter()
                    .map(key)
                    .collect();
                writes[i] = (0..*universe)
                    .choose_multiple(&mut rng, w)
                    .into_iter()
                    .map(key)
                    .collect();
            }
        }
        KeyModel::Gnp { p } => {
            for u in 0..n {
                for v in u + 1..n {
                    if rng.gen_bool(*p) {
                        let k = ObjectKey::new(format!("e{u}_{v}"));
                        let (w, other) = if rng.gen_bool(0.5) { (u, v) } else { (v, u) };
                        writes[w].push(k.clone());
                        if rng.gen_bool(0.5) {
                            writes[other].push(k);
                        } else {
                            reads[other].push(k);
                        }
                    }
                }
            }
        }
        KeyModel::Chain => {
            for i in 0..n {
                reads[i] = vec![chain_key(i), chain_key(i + 1)];
                writes[i] = reads[i].clone();
            }
        }
    }
    let txs = (0..n)
        .map(|i| {
            let length = match &spec.lengths {
                LengthMode::Homogeneous { c } => *c,
                LengthMode::EpsilonHomogeneous { c, epsilon } => rng.gen_range(*c..=c + epsilon),
                LengthMode::Heterogeneous { choices } => *choices.choose(&mut rng).expect("validated non-empty"),
            };
            Transaction::new(
                i,
                std::mem::take(&mut reads[i]),
                std::mem::take(&mut writes[i]),
                length,
                TxProgram::sum_and_add(i as i64 + 1),
            )
        })
        .collect();
    Ok(Block::new(0, Vec::new(), txs))
}

fn key(i: usize) -> ObjectKey {
    ObjectKey::new(format!("k{i}"))
}

fn chain_key(i: usize) -> ObjectKey {
    ObjectKey::new(format!("x{i}"))
}

/// One block per spec, with `seq` counting from 0. The first block's
/// `prev_hash` is `initial_prev_hash`; each later one holds the hash of its
/// predecessor.
pub fn gen_stream(specs: &[WorkloadSpec], initial_prev_hash: &[u8]) -> Result<Vec<Block>> {
    let mut out: Vec<Block> = Vec::with_capacity(specs.len());
    for (seq, spec) in specs.iter().enumerate() {
        let mut block = gen_block(spec)?;
        block.seq = seq as u64;
        block.prev_hash = match out.last() {
            Some(prev) => prev.hash().to_vec(),
            None => initial_prev_hash.to_vec(),
        };
        out.push(block);
    }
    Ok(out)
}

/// The chain block: transaction `i` reads and writes `x{i}` and `x{i+1}`,
/// runs `SUM_AND_ADD` with constant 1, and has length 1. Its conflict graph is
/// the path `0 - 1 - ... - (n-1)`.
pub fn chain_block(n: usize) -> Block {
    let txs = (0..n)
        .map(|i| {
            let keys = [chain_key(i), chain_key(i + 1)];
            Transaction::new(i, keys.clone(), keys, 1, TxProgram::sum_and_add(1))
        })
        .collect();
    Block::new(0, Vec::new(), txs)
}
