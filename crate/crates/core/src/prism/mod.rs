//! Prism: proposer and voter chains, leader election, reference links and
//! ledger assembly.
//!
//! Chain 0 is the proposer chain and chains `1..=m` are voter chains. Every
//! function here is a pure function of a finished store; the simulator uses
//! an incremental equivalent while it runs.

pub(crate) mod builder;
mod checks;
pub mod tx;

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::store::{BlockId, BlockRef, BlockStore, Chain, PublicIndex, TxId, Vote};
pub use tx::{Transaction, TxGenerator};

pub use checks::{check_prism_theorems, PrismAnalysis, PrismReport};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PrismError {
    #[error("voter chain {0} has no credible tip")]
    NoCredibleVoterTip(usize),
    #[error("expected {expected} electors, got {got}")]
    ElectorCount { expected: usize, got: usize },
    #[error("block {0:?} is not a proposer block")]
    NotProposer(BlockRef),
}

/// Chain type selected by a uniform hash value `u` in `[0, 1)`: the unit
/// interval is split into `m + 1` equal ranges.
pub fn sortition(u: f64, m: usize) -> usize {
    ((u * (m + 1) as f64).floor() as usize).min(m)
}

/// Earliest published proposer at every height, indexed by height. Entry 0
/// is genesis. Heights whose proposers are all withheld hold `None`.
pub fn first_publications(store: &BlockStore) -> Vec<Option<(f64, BlockId)>> {
    let proposers = store.chain(0);
    let mut out: Vec<Option<(f64, BlockId)>> = Vec::new();
    for b in proposers.blocks() {
        let h = proposers.height(b.id) as usize;
        if out.len() <= h {
            out.resize(h + 1, None);
        }
        if let Some(p) = b.publish_time {
            if out[h].is_none_or(|e| (p, b.id) < e) {
                out[h] = Some((p, b.id));
            }
        }
    }
    out
}

/// `R_h`: when the first proposer block at height `h` was published.
pub fn first_publication_time(store: &BlockStore, h: u64) -> Option<f64> {
    first_publications(store).get(h as usize).copied().flatten().map(|e| e.0)
}

/// Votes the honest rule assigns to a voter block: every height whose first
/// proposer was published by `T - delta` and that no ancestor voted on,
/// each for the earliest published proposer.
pub fn honest_votes(store: &BlockStore, voter: BlockRef, delta: f64) -> Vec<Vote> {
    let chain = store.chain(voter.chain);
    let block = chain.block(voter.id);
    let mut voted = HashSet::new();
    let mut cursor = block.parent;
    while let Some(id) = cursor {
        voted.extend(chain.block(id).votes.iter().map(|v| v.height));
        cursor = chain.parent(id);
    }
    let cutoff = block.mined_time - delta;
    first_publications(store)
        .iter()
        .enumerate()
        .skip(1)
        .map_while(|(h, e)| e.filter(|e| e.0 <= cutoff).map(|e| (h as u64, e.1)))
        .filter(|(h, _)| !voted.contains(h))
        .map(|(height, proposer)| Vote { height, proposer })
        .collect()
}

/// A leader per proposer height, as elected by one tip per voter chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderSequence {
    /// `leaders[h - 1]` is the leader at height `h`.
    pub leaders: Vec<BlockId>,
    pub elected_at: f64,
    /// Elector tip on voter chain `j` at index `j - 1`.
    pub electors: Vec<BlockId>,
}

impl LeaderSequence {
    pub fn height(&self) -> u64 {
        self.leaders.len() as u64
    }
}

/// First vote per height along the lineage ending in `tip`; index is the
/// height.
pub fn lineage_votes(chain: &Chain, tip: BlockId) -> Vec<Option<BlockId>> {
    let mut out: Vec<Option<BlockId>> = Vec::new();
    for id in chain.path(tip) {
        for v in &chain.block(id).votes {
            let h = v.height as usize;
            if out.len() <= h {
                out.resize(h + 1, None);
            }
            if out[h].is_none() {
                out[h] = Some(v.proposer);
            }
        }
    }
    out
}

/// Orders candidates for a leader slot: more votes, then earlier
/// publication, then lower id.
fn leader_key(proposers: &Chain, id: BlockId, votes: usize) -> (Reverse<usize>, u64, BlockId) {
    let published = proposers.block(id).publish_time.map_or(u64::MAX, f64::to_bits);
    (Reverse(votes), published, id)
}

pub(crate) fn elect(
    proposers: &Chain,
    public0: &PublicIndex,
    t: f64,
    n: u64,
    ballots: &[&[Option<BlockId>]],
) -> Vec<BlockId> {
    let mut leaders = Vec::with_capacity(n as usize);
    let mut tally: Vec<(BlockId, usize)> = Vec::new();
    for h in 1..=n {
        tally.clear();
        for e in public0.at_height(h, t) {
            tally.push((e.1, 0));
        }
        for ballot in ballots {
            if let Some(Some(p)) = ballot.get(h as usize) {
                match tally.iter_mut().find(|e| e.0 == *p) {
                    Some(e) => e.1 += 1,
                    None => tally.push((*p, 1)),
                }
            }
        }
        let best = tally
            .iter()
            .min_by_key(|e| leader_key(proposers, e.0, e.1))
            .map(|e| e.0)
            .expect("every height up to n has a published proposer");
        leaders.push(best);
    }
    leaders
}

/// Elects the leader sequence at `t` from `electors` (one credible tip per
/// voter chain), or from each voter chain's preferred credible tip.
pub fn leader_sequence(
    store: &BlockStore,
    t: f64,
    delta: f64,
    electors: Option<&[BlockId]>,
) -> Result<LeaderSequence, PrismError> {
    let m = store.chain_count() - 1;
    let electors: Vec<BlockId> = match electors {
        Some(e) if e.len() != m => return Err(PrismError::ElectorCount { expected: m, got: e.len() }),
        Some(e) => e.to_vec(),
        None => (1..=m)
            .map(|j| {
                let index = PublicIndex::from_chain(store.chain(j));
                index
                    .credible_tips(t, delta)
                    .last()
                    .copied()
                    .ok_or(PrismError::NoCredibleVoterTip(j))
                    .map(|_| index.preferred(t))
            })
            .collect::<Result<_, _>>()?,
    };
    let public0 = PublicIndex::from_chain(store.chain(0));
    let n = public0.max_height(t - delta);
    let ballots: Vec<Vec<Option<BlockId>>> =
        electors.iter().enumerate().map(|(i, &tip)| lineage_votes(store.chain(i + 1), tip)).collect();
    let refs: Vec<&[Option<BlockId>]> = ballots.iter().map(Vec::as_slice).collect();
    Ok(LeaderSequence { leaders: elect(store.chain(0), &public0, t, n, &refs), elected_at: t, electors })
}

/// Every combination of credible voter tips at `t`, up to `cap`
/// combinations. The flag reports whether the list was cut short.
pub fn credible_elector_sets(store: &BlockStore, t: f64, delta: f64, cap: usize) -> (Vec<Vec<BlockId>>, bool) {
    let per_chain: Vec<Vec<BlockId>> =
        (1..store.chain_count()).map(|j| PublicIndex::from_chain(store.chain(j)).credible_tips(t, delta)).collect();
    combinations(&per_chain, cap)
}

pub(crate) fn combinations(per_chain: &[Vec<BlockId>], cap: usize) -> (Vec<Vec<BlockId>>, bool) {
    let mut out: Vec<Vec<BlockId>> = vec![Vec::new()];
    let mut truncated = false;
    for tips in per_chain {
        let mut next = Vec::new();
        'outer: for prefix in &out {
            for &tip in tips {
                if next.len() == cap {
                    truncated = true;
                    break 'outer;
                }
                let mut v = prefix.clone();
                v.push(tip);
                next.push(v);
            }
        }
        out = next;
    }
    (out, truncated)
}

/// Every block reachable from `from` through parent and reference edges,
/// genesis blocks excluded.
pub fn reachable(store: &BlockStore, from: BlockRef) -> HashSet<BlockRef> {
    let mut seen = HashSet::new();
    let mut stack = vec![from];
    while let Some(x) = stack.pop() {
        if x.id == BlockId::GENESIS || !seen.insert(x) {
            continue;
        }
        let b = store.block(x);
        if let Some(p) = b.parent {
            stack.push(BlockRef::new(x.chain, p));
        }
        stack.extend(b.refs.iter().copied());
    }
    seen
}

/// Reference links an honest proposer block carries: the maximal blocks,
/// under reachability, among those published by `T - delta` and not yet
/// reachable from its parent.
pub fn reference_links(store: &BlockStore, proposer: BlockId, delta: f64) -> Result<Vec<BlockRef>, PrismError> {
    let chain = store.chain(0);
    let block = chain.get(proposer).ok_or(PrismError::NotProposer(BlockRef::new(0, proposer)))?;
    let Some(parent) = block.parent else {
        return Ok(Vec::new());
    };
    let cutoff = block.mined_time - delta;
    let known = reachable(store, BlockRef::new(0, parent));
    let mut unreached: Vec<BlockRef> = store
        .chains()
        .iter()
        .flat_map(|c| c.blocks()[1..].iter())
        .filter(|b| b.publish_time.is_some_and(|p| p <= cutoff))
        .map(|b| b.block_ref())
        .filter(|r| !known.contains(r))
        .collect();
    builder::sort_newest_first(store, &mut unreached);

    let mut marked = HashSet::new();
    let mut refs = Vec::new();
    for d in unreached {
        if marked.contains(&d) {
            continue;
        }
        refs.push(d);
        let mut stack = vec![d];
        while let Some(x) = stack.pop() {
            if x.id == BlockId::GENESIS || known.contains(&x) || !marked.insert(x) {
                continue;
            }
            let b = store.block(x);
            if let Some(p) = b.parent {
                stack.push(BlockRef::new(x.chain, p));
            }
            stack.extend(b.refs.iter().copied());
        }
    }
    refs.sort();
    Ok(refs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub tx: TxId,
    /// Height of the leader whose epoch brought the transaction in.
    pub epoch: u64,
    pub block: BlockRef,
}

/// Ordered, conflict-free transaction list.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Ledger {
    pub entries: Vec<LedgerEntry>,
    /// Blocks of each epoch in ledger order; index `h - 1` for leader `h`.
    pub epochs: Vec<Vec<BlockRef>>,
}

impl Ledger {
    pub fn tx_ids(&self) -> Vec<TxId> {
        self.entries.iter().map(|e| e.tx).collect()
    }

    pub fn contains(&self, tx: TxId) -> bool {
        self.entries.iter().any(|e| e.tx == tx)
    }
}

/// Keeps the first copy of every transaction and drops any transaction that
/// spends an output an earlier kept one already spends.
pub fn sanitize<I>(txs: I, registry: &BTreeMap<TxId, Transaction>) -> Vec<LedgerEntry>
where
    I: IntoIterator<Item = LedgerEntry>,
{
    let mut seen = HashSet::new();
    let mut spent = HashSet::new();
    let mut out = Vec::new();
    for entry in txs {
        if seen.contains(&entry.tx) {
            continue;
        }
        let inputs = registry.get(&entry.tx).map(|t| t.inputs.as_slice()).unwrap_or(&[]);
        if inputs.iter().any(|i| spent.contains(i)) {
            continue;
        }
        seen.insert(entry.tx);
        spent.extend(inputs.iter().copied());
        out.push(entry);
    }
    out
}

/// Orders one epoch so every block follows its parent and everything it
/// references; ties go to the lowest `(chain, id)`.
fn topological(store: &BlockStore, epoch: &HashSet<BlockRef>) -> Vec<BlockRef> {
    let mut indegree: HashMap<BlockRef, usize> = epoch.iter().map(|&b| (b, 0)).collect();
    let mut children: HashMap<BlockRef, Vec<BlockRef>> = HashMap::new();
    for &b in epoch {
        let block = store.block(b);
        let parent = block.parent.map(|p| BlockRef::new(b.chain, p));
        for pred in parent.into_iter().chain(block.refs.iter().copied()) {
            if epoch.contains(&pred) {
                *indegree.get_mut(&b).expect("in epoch") += 1;
                children.entry(pred).or_default().push(b);
            }
        }
    }
    let mut ready: BinaryHeap<Reverse<BlockRef>> =
        indegree.iter().filter(|e| *e.1 == 0).map(|e| Reverse(*e.0)).collect();
    let mut order = Vec::with_capacity(epoch.len());
    while let Some(Reverse(b)) = ready.pop() {
        order.push(b);
        for c in children.get(&b).into_iter().flatten() {
            let d = indegree.get_mut(c).expect("in epoch");
            *d -= 1;
            if *d == 0 {
                ready.push(Reverse(*c));
            }
        }
    }
    order
}

/// Assembles the ledger of a leader sequence: each leader's epoch is every
/// block reachable from it that no earlier epoch included.
pub fn build_ledger(store: &BlockStore, sequence: &LeaderSequence, registry: &BTreeMap<TxId, Transaction>) -> Ledger {
    let mut included: HashSet<BlockRef> = HashSet::new();
    let mut epochs = Vec::with_capacity(sequence.leaders.len());
    let mut raw = Vec::new();
    for (i, &leader) in sequence.leaders.iter().enumerate() {
        let mut epoch = HashSet::new();
        let mut stack = vec![BlockRef::new(0, leader)];
        while let Some(x) = stack.pop() {
            if x.id == BlockId::GENESIS || included.contains(&x) || !epoch.insert(x) {
                continue;
            }
            let b = store.block(x);
            if let Some(p) = b.parent {
                stack.push(BlockRef::new(x.chain, p));
            }
            stack.extend(b.refs.iter().copied());
        }
        let order = topological(store, &epoch);
        for &b in &order {
            raw.extend(store.block(b).txs.iter().map(|&tx| LedgerEntry { tx, epoch: i as u64 + 1, block: b }));
        }
        included.extend(epoch);
        epochs.push(order);
    }
    Ledger { entries: sanitize(raw, registry), epochs }
}

/// First publication time of every transaction and which transactions
/// spend each output.
#[derive(Debug, Clone, Default)]
pub struct TxIndex {
    first_seen: HashMap<TxId, f64>,
    spenders: HashMap<u64, Vec<TxId>>,
}

impl TxIndex {
    pub fn new(store: &BlockStore, registry: &BTreeMap<TxId, Transaction>) -> Self {
        let mut first_seen: HashMap<TxId, f64> = HashMap::new();
        for b in store.chains().iter().flat_map(|c| c.blocks()) {
            if let Some(p) = b.publish_time {
                for &tx in &b.txs {
                    let e = first_seen.entry(tx).or_insert(p);
                    *e = e.min(p);
                }
            }
        }
        let mut spenders: HashMap<u64, Vec<TxId>> = HashMap::new();
        for t in registry.values() {
            for &i in &t.inputs {
                spenders.entry(i).or_default().push(t.id);
            }
        }
        Self { first_seen, spenders }
    }

    pub fn first_seen(&self, tx: TxId) -> Option<f64> {
        self.first_seen.get(&tx).copied()
    }

    /// Whether `tx` is in a block published by `t` and no conflicting
    /// transaction is.
    pub fn credible_until(&self, registry: &BTreeMap<TxId, Transaction>, tx: TxId, t: f64) -> bool {
        if !self.first_seen(tx).is_some_and(|p| p <= t) {
            return false;
        }
        let inputs = registry.get(&tx).map(|x| x.inputs.as_slice()).unwrap_or(&[]);
        inputs
            .iter()
            .flat_map(|i| &self.spenders[i])
            .all(|&other| other == tx || !self.first_seen(other).is_some_and(|p| p <= t))
    }
}

pub fn tx_credible_until(store: &BlockStore, registry: &BTreeMap<TxId, Transaction>, tx: TxId, t: f64) -> bool {
    TxIndex::new(store, registry).credible_until(registry, tx, t)
}

#[cfg(test)]
mod tests;
