//! The record of one simulated execution and its JSON-lines form.

use std::collections::BTreeMap;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::AttackReport;
use crate::params::ProtocolParams;
use crate::prism::tx::Transaction;
use crate::sim::ArrivalSchedule;
use crate::store::{BlockId, BlockRef, BlockStore, Kind, NewBlock, PublicIndex, StoreError, TxId, Vote};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Mined,
    Published,
}

/// One block creation or publication, in processing order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    pub block: BlockRef,
}

/// A complete execution: every block with its timestamps, plus what
/// produced it.
#[derive(Debug, Clone)]
pub struct Trace {
    pub params: ProtocolParams,
    pub seed: u64,
    pub strategy: String,
    pub store: BlockStore,
    pub schedule: ArrivalSchedule,
    pub events: Vec<Event>,
    pub transactions: BTreeMap<TxId, Transaction>,
    pub report: AttackReport,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("line {line}: {source}")]
    Store { line: usize, source: StoreError },
    #[error("line {line}: expected block {expected} on chain {chain}, found {found}")]
    OutOfOrder { line: usize, chain: usize, expected: usize, found: usize },
}

/// One JSON-lines record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub chain: usize,
    pub id: usize,
    pub kind: Kind,
    pub parent: Option<usize>,
    pub t_mined: f64,
    pub t_pub: Option<f64>,
    pub votes: Vec<(u64, usize)>,
    pub refs: Vec<(usize, usize)>,
    pub txs: Vec<TxId>,
}

impl Trace {
    /// Wraps a hand-built store. The schedule is recovered from the blocks'
    /// mining times and events are ordered by time.
    pub fn from_store(params: ProtocolParams, store: BlockStore) -> Self {
        let mut schedule = ArrivalSchedule::default();
        let mut events = Vec::new();
        for c in store.chains() {
            let (mut honest, mut adversarial) = (Vec::new(), Vec::new());
            for b in &c.blocks()[1..] {
                if b.is_honest() { &mut honest } else { &mut adversarial }.push(b.mined_time);
                events.push(Event { time: b.mined_time, kind: EventKind::Mined, block: b.block_ref() });
                if let Some(p) = b.publish_time {
                    events.push(Event { time: p, kind: EventKind::Published, block: b.block_ref() });
                }
            }
            honest.sort_by(f64::total_cmp);
            adversarial.sort_by(f64::total_cmp);
            schedule.honest.push(honest);
            schedule.adversarial.push(adversarial);
        }
        events.sort_by(|a, b| a.time.total_cmp(&b.time));
        Self {
            params,
            seed: 0,
            strategy: "manual".into(),
            store,
            schedule,
            events,
            transactions: BTreeMap::new(),
            report: AttackReport::default(),
        }
    }

    pub fn with_transactions(mut self, transactions: impl IntoIterator<Item = Transaction>) -> Self {
        self.transactions.extend(transactions.into_iter().map(|t| (t.id, t)));
        self
    }

    /// Publication-ordered index of every chain.
    pub fn public_indices(&self) -> Vec<PublicIndex> {
        self.store.chains().iter().map(PublicIndex::from_chain).collect()
    }

    pub fn rows(&self) -> impl Iterator<Item = TraceRow> + '_ {
        self.store.chains().iter().flat_map(|c| c.blocks().iter()).map(|b| TraceRow {
            chain: b.chain,
            id: b.id.0,
            kind: b.kind,
            parent: b.parent.map(|p| p.0),
            t_mined: b.mined_time,
            t_pub: b.publish_time,
            votes: b.votes.iter().map(|v| (v.height, v.proposer.0)).collect(),
            refs: b.refs.iter().map(|r| (r.chain, r.id.0)).collect(),
            txs: b.txs.clone(),
        })
    }

    /// Writes one JSON object per block, chains in order, blocks in
    /// mining order. Genesis blocks are included.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        for row in self.rows() {
            serde_json::to_writer(&mut out, &row)?;
            out.write_all(b"\n")?;
        }
        out.flush()
    }
}

/// Rebuilds a store from JSON-lines rows written by [`Trace::write_jsonl`].
pub fn read_store<R: BufRead>(input: R, chain_count: usize) -> Result<BlockStore, TraceError> {
    let mut store = BlockStore::new(chain_count);
    for (n, line) in input.lines().enumerate() {
        let line_no = n + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: TraceRow = serde_json::from_str(&line).map_err(|source| TraceError::Json { line: line_no, source })?;
        let Some(parent) = row.parent else {
            continue;
        };
        let expected = store.chain(row.chain.min(chain_count - 1)).len();
        if row.chain < chain_count && row.id != expected {
            return Err(TraceError::OutOfOrder { line: line_no, chain: row.chain, expected, found: row.id });
        }
        let mut block = match row.kind {
            Kind::Honest => NewBlock::honest(row.chain, BlockId(parent), row.t_mined),
            Kind::Adversarial => NewBlock::adversarial(row.chain, BlockId(parent), row.t_mined),
        };
        block.publish_time = row.t_pub;
        block.votes = row.votes.iter().map(|&(height, p)| Vote { height, proposer: BlockId(p) }).collect();
        block.refs = row.refs.iter().map(|&(c, id)| BlockRef::new(c, BlockId(id))).collect();
        block.txs = row.txs;
        store.append_block(block).map_err(|source| TraceError::Store { line: line_no, source })?;
    }
    Ok(store)
}
