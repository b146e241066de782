use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::store::TxId;

/// Identifier of a transaction output.
pub type Outpoint = u64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub id: TxId,
    pub inputs: Vec<Outpoint>,
    pub outputs: Vec<Outpoint>,
}

impl Transaction {
    /// Two distinct transactions conflict when they spend a common output.
    pub fn conflicts_with(&self, other: &Transaction) -> bool {
        self.id != other.id && self.inputs.iter().any(|i| other.inputs.contains(i))
    }
}

/// Synthetic transaction workload.
///
/// Inputs are drawn from a bounded outpoint space so that double spends
/// occur naturally; a fraction of draws rebroadcast an existing transaction
/// so ledgers also see redundant copies.
#[derive(Debug, Clone)]
pub struct TxGenerator {
    rng: ChaCha12Rng,
    per_block: usize,
    outpoint_space: u64,
    redundant_prob: f64,
    next_id: TxId,
    pub(crate) registry: BTreeMap<TxId, Transaction>,
}

impl TxGenerator {
    pub fn new(seed: u64, per_block: usize, outpoint_space: u64, redundant_prob: f64) -> Self {
        Self {
            rng: crate::seed::rng(seed),
            per_block,
            outpoint_space: outpoint_space.max(1),
            redundant_prob,
            next_id: 0,
            registry: BTreeMap::new(),
        }
    }

    /// Transactions carried by the next block.
    pub fn next_block(&mut self) -> Vec<TxId> {
        let mut txs = Vec::with_capacity(self.per_block);
        for _ in 0..self.per_block {
            if self.next_id > 0 && self.rng.random::<f64>() < self.redundant_prob {
                let old = self.rng.random_range(0..self.next_id);
                if !txs.contains(&old) {
                    txs.push(old);
                }
                continue;
            }
            let id = self.next_id;
            self.next_id += 1;
            let n_inputs = self.rng.random_range(1..=2);
            let mut inputs: Vec<Outpoint> =
                (0..n_inputs).map(|_| self.rng.random_range(0..self.outpoint_space)).collect();
            inputs.sort_unstable();
            inputs.dedup();
            let outputs = vec![self.outpoint_space + id];
            self.registry.insert(id, Transaction { id, inputs, outputs });
            txs.push(id);
        }
        txs
    }

    pub fn into_registry(self) -> BTreeMap<TxId, Transaction> {
        self.registry
    }
}
