//! Append-only block storage with heights, publication times and
//! credible-chain queries.
//!
//! A store holds one independent chain per chain index: index 0 is the
//! bitcoin chain (or the Prism proposer chain) and indices `1..=m` are Prism
//! voter chains. Every chain starts with an honest genesis block mined and
//! published at time 0.
//!
//! A blockchain is identified by its last block. A chain counts as
//! published once every block on it is published, so the store tracks a
//! *visible* time per block: the maximum of its own publication time and the
//! visible time of its parent. Publishing a block also publishes any
//! still-withheld ancestors at the same instant.

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Position of a block inside its chain, in mining order. Genesis is 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BlockId(pub usize);

impl BlockId {
    pub const GENESIS: BlockId = BlockId(0);

    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A block addressed across chains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BlockRef {
    pub chain: usize,
    pub id: BlockId,
}

impl BlockRef {
    pub fn new(chain: usize, id: BlockId) -> Self {
        Self { chain, id }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Honest,
    Adversarial,
}

/// A vote cast by a voter block for the proposer block it prefers at one
/// proposer height.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Vote {
    pub height: u64,
    pub proposer: BlockId,
}

pub type TxId = u64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub id: BlockId,
    pub kind: Kind,
    pub chain: usize,
    /// `None` only for genesis.
    pub parent: Option<BlockId>,
    pub mined_time: f64,
    /// `None` while withheld.
    pub publish_time: Option<f64>,
    pub votes: Vec<Vote>,
    pub refs: Vec<BlockRef>,
    pub txs: Vec<TxId>,
}

impl Block {
    pub fn is_honest(&self) -> bool {
        self.kind == Kind::Honest
    }

    pub fn block_ref(&self) -> BlockRef {
        BlockRef::new(self.chain, self.id)
    }
}

/// A block about to be appended; the store assigns its id.
#[derive(Debug, Clone, PartialEq)]
pub struct NewBlock {
    pub kind: Kind,
    pub chain: usize,
    pub parent: BlockRef,
    pub mined_time: f64,
    pub publish_time: Option<f64>,
    pub votes: Vec<Vote>,
    pub refs: Vec<BlockRef>,
    pub txs: Vec<TxId>,
}

impl NewBlock {
    /// An honest block, published the instant it is mined.
    pub fn honest(chain: usize, parent: BlockId, mined_time: f64) -> Self {
        Self {
            kind: Kind::Honest,
            chain,
            parent: BlockRef::new(chain, parent),
            mined_time,
            publish_time: Some(mined_time),
            votes: Vec::new(),
            refs: Vec::new(),
            txs: Vec::new(),
        }
    }

    /// An adversarial block, withheld until published explicitly.
    pub fn adversarial(chain: usize, parent: BlockId, mined_time: f64) -> Self {
        Self { kind: Kind::Adversarial, publish_time: None, ..Self::honest(chain, parent, mined_time) }
    }

    /// Points the block at a parent on an arbitrary chain; the store
    /// rejects it unless the chains match.
    pub fn with_parent(mut self, parent: BlockRef) -> Self {
        self.parent = parent;
        self
    }

    pub fn published_at(mut self, time: f64) -> Self {
        self.publish_time = Some(time);
        self
    }

    pub fn with_votes(mut self, votes: Vec<Vote>) -> Self {
        self.votes = votes;
        self
    }

    pub fn with_refs(mut self, refs: Vec<BlockRef>) -> Self {
        self.refs = refs;
        self
    }

    pub fn with_txs(mut self, txs: Vec<TxId>) -> Self {
        self.txs = txs;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StoreError {
    #[error("chain {chain} has no block {parent}")]
    UnknownParent { chain: usize, parent: BlockId },
    #[error("parent mined at {parent_time} is not strictly earlier than child mined at {child_time}")]
    NonCausalParent { parent_time: f64, child_time: f64 },
    #[error("parent lives on chain {parent_chain}, child on chain {child_chain}")]
    CrossChainParent { parent_chain: usize, child_chain: usize },
    #[error("unknown chain index {0}")]
    UnknownChain(usize),
    #[error("block {0:?} does not exist")]
    UnknownBlock(BlockRef),
    #[error("invalid publication time {publish_time} for block mined at {mined_time}")]
    InvalidPublishTime { mined_time: f64, publish_time: f64 },
    #[error("block {0:?} is already published")]
    AlreadyPublished(BlockRef),
    #[error("depth {depth} exceeds height {height}")]
    DepthExceedsHeight { depth: u64, height: u64 },
}

/// One blockchain tree (all blocks of one chain index).
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    index: usize,
    blocks: Vec<Block>,
    heights: Vec<u64>,
    visible: Vec<Option<f64>>,
    skip: Vec<usize>,
}

impl Chain {
    fn new(index: usize) -> Self {
        let genesis = Block {
            id: BlockId::GENESIS,
            kind: Kind::Honest,
            chain: index,
            parent: None,
            mined_time: 0.0,
            publish_time: Some(0.0),
            votes: Vec::new(),
            refs: Vec::new(),
            txs: Vec::new(),
        };
        Self { index, blocks: vec![genesis], heights: vec![0], visible: vec![Some(0.0)], skip: vec![0] }
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn block(&self, id: BlockId) -> &Block {
        &self.blocks[id.0]
    }

    pub fn get(&self, id: BlockId) -> Option<&Block> {
        self.blocks.get(id.0)
    }

    pub fn height(&self, id: BlockId) -> u64 {
        self.heights[id.0]
    }

    /// Time at which the whole blockchain ending in `id` is published.
    pub fn visible_time(&self, id: BlockId) -> Option<f64> {
        self.visible[id.0]
    }

    pub fn parent(&self, id: BlockId) -> Option<BlockId> {
        self.blocks[id.0].parent
    }

    /// The ancestor of `id` at height `height` (`id` itself at its own
    /// height). Uses skip pointers, so the walk is logarithmic.
    pub fn ancestor_at_height(&self, id: BlockId, height: u64) -> Option<BlockId> {
        let mut walk = id.0;
        let mut walk_height = self.heights[walk];
        if height > walk_height {
            return None;
        }
        while walk_height > height {
            let h_skip = skip_height(walk_height);
            let h_skip_prev = skip_height(walk_height - 1);
            let take_skip =
                h_skip == height || (h_skip > height && !(h_skip_prev + 2 < h_skip && h_skip_prev >= height));
            if take_skip && walk_height >= 2 {
                walk = self.skip[walk];
                walk_height = h_skip;
            } else {
                walk = self.blocks[walk].parent.expect("non-genesis block has a parent").0;
                walk_height -= 1;
            }
        }
        Some(BlockId(walk))
    }

    /// Whether `ancestor` lies on the blockchain ending in `id` (inclusive).
    pub fn is_ancestor(&self, ancestor: BlockId, id: BlockId) -> bool {
        self.ancestor_at_height(id, self.height(ancestor)) == Some(ancestor)
    }

    /// Block ids of the blockchain ending in `tip`, genesis first.
    pub fn path(&self, tip: BlockId) -> Vec<BlockId> {
        let mut path = Vec::with_capacity(self.height(tip) as usize + 1);
        let mut cursor = Some(tip);
        while let Some(id) = cursor {
            path.push(id);
            cursor = self.parent(id);
        }
        path.reverse();
        path
    }

    /// The k-deep block and the k-deep prefix tip of the chain ending in
    /// `tip`: for chain `(b_0, ..., b_n)` these are `b_{n-k+1}` and `b_{n-k}`.
    pub fn k_deep(&self, tip: BlockId, k: u64) -> Result<(BlockId, BlockId), StoreError> {
        let height = self.height(tip);
        if k == 0 || k > height {
            return Err(StoreError::DepthExceedsHeight { depth: k, height });
        }
        let block = self.ancestor_at_height(tip, height - k + 1).expect("height checked");
        let prefix = self.parent(block).expect("k-deep block is not genesis");
        Ok((block, prefix))
    }

    /// Tip of the `depth`-deep prefix, saturating at genesis. A 0-deep
    /// prefix is the chain itself.
    pub fn deep_prefix(&self, tip: BlockId, depth: u64) -> BlockId {
        let height = self.height(tip);
        self.ancestor_at_height(tip, height.saturating_sub(depth)).expect("target height not above tip")
    }

    /// Every blockchain that is credible at time `t` under delay bound
    /// `delta`: published by `t` and no shorter than any blockchain
    /// published by `t - delta`. Sorted by id.
    pub fn credible_tips(&self, t: f64, delta: f64) -> Vec<BlockId> {
        let cutoff = t - delta;
        let floor = self
            .visible
            .iter()
            .zip(&self.heights)
            .filter(|(v, _)| matches!(v, Some(p) if *p <= cutoff))
            .map(|(_, h)| *h)
            .max()
            .unwrap_or(0);
        (0..self.blocks.len())
            .filter(|&i| matches!(self.visible[i], Some(p) if p <= t) && self.heights[i] >= floor)
            .map(BlockId)
            .collect()
    }

    fn append(&mut self, new: NewBlock) -> Result<BlockId, StoreError> {
        if new.parent.chain != new.chain {
            return Err(StoreError::CrossChainParent { parent_chain: new.parent.chain, child_chain: new.chain });
        }
        let parent =
            self.get(new.parent.id).ok_or(StoreError::UnknownParent { chain: self.index, parent: new.parent.id })?;
        if !(parent.mined_time < new.mined_time) {
            return Err(StoreError::NonCausalParent { parent_time: parent.mined_time, child_time: new.mined_time });
        }
        if let Some(p) = new.publish_time {
            let honest_mismatch = new.kind == Kind::Honest && p != new.mined_time;
            if p < new.mined_time || honest_mismatch || !p.is_finite() {
                return Err(StoreError::InvalidPublishTime { mined_time: new.mined_time, publish_time: p });
            }
        } else if new.kind == Kind::Honest {
            return Err(StoreError::InvalidPublishTime { mined_time: new.mined_time, publish_time: f64::NAN });
        }

        let id = BlockId(self.blocks.len());
        let parent_id = new.parent.id;
        let height = self.heights[parent_id.0] + 1;
        self.blocks.push(Block {
            id,
            kind: new.kind,
            chain: new.chain,
            parent: Some(parent_id),
            mined_time: new.mined_time,
            publish_time: None,
            votes: new.votes,
            refs: new.refs,
            txs: new.txs,
        });
        self.heights.push(height);
        self.visible.push(None);
        let skip = self.ancestor_at_height(parent_id, skip_height(height)).expect("skip target below parent");
        self.skip.push(skip.0);
        if let Some(p) = new.publish_time {
            self.publish_chain(id, p);
        }
        Ok(id)
    }

    fn publish(&mut self, id: BlockId, time: f64) -> Result<(), StoreError> {
        let block = self.get(id).ok_or(StoreError::UnknownBlock(BlockRef::new(self.index, id)))?;
        if block.publish_time.is_some() {
            return Err(StoreError::AlreadyPublished(block.block_ref()));
        }
        if !(time >= block.mined_time) || !time.is_finite() {
            return Err(StoreError::InvalidPublishTime { mined_time: block.mined_time, publish_time: time });
        }
        self.publish_chain(id, time);
        Ok(())
    }

    /// Publishes `id` and every withheld ancestor at `time`, then fixes up
    /// visible times along the path.
    fn publish_chain(&mut self, id: BlockId, time: f64) {
        let mut pending = Vec::new();
        let mut cursor = Some(id);
        while let Some(c) = cursor {
            if self.blocks[c.0].publish_time.is_some() && c != id {
                break;
            }
            pending.push(c);
            cursor = self.blocks[c.0].parent;
        }
        for c in pending.into_iter().rev() {
            if self.blocks[c.0].publish_time.is_none() {
                self.blocks[c.0].publish_time = Some(time);
            }
            let own = self.blocks[c.0].publish_time.expect("just set");
            let parent_visible = self.blocks[c.0].parent.and_then(|p| self.visible[p.0]).unwrap_or(0.0);
            self.visible[c.0] = Some(own.max(parent_visible));
        }
    }
}

/// Height targeted by a block's skip pointer.
fn skip_height(height: u64) -> u64 {
    fn invert_lowest_one(n: u64) -> u64 {
        n & n.wrapping_sub(1)
    }
    if height < 2 {
        0
    } else if height & 1 == 1 {
        invert_lowest_one(invert_lowest_one(height - 1)) + 1
    } else {
        invert_lowest_one(height)
    }
}

/// All chains of one execution.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockStore {
    chains: Vec<Chain>,
}

impl BlockStore {
    /// A store with `chain_count` chains, each holding only its genesis.
    pub fn new(chain_count: usize) -> Self {
        assert!(chain_count > 0, "a store needs at least one chain");
        Self { chains: (0..chain_count).map(Chain::new).collect() }
    }

    pub fn chain_count(&self) -> usize {
        self.chains.len()
    }

    pub fn chain(&self, index: usize) -> &Chain {
        &self.chains[index]
    }

    pub fn chains(&self) -> &[Chain] {
        &self.chains
    }

    pub fn block(&self, r: BlockRef) -> &Block {
        self.chains[r.chain].block(r.id)
    }

    pub fn get(&self, r: BlockRef) -> Option<&Block> {
        self.chains.get(r.chain).and_then(|c| c.get(r.id))
    }

    pub fn append_block(&mut self, block: NewBlock) -> Result<BlockId, StoreError> {
        let chain = block.chain;
        self.chains.get_mut(chain).ok_or(StoreError::UnknownChain(chain))?.append(block)
    }

    /// Publishes a withheld block (and its withheld ancestors) at `time`.
    pub fn publish(&mut self, r: BlockRef, time: f64) -> Result<(), StoreError> {
        self.chains.get_mut(r.chain).ok_or(StoreError::UnknownChain(r.chain))?.publish(r.id, time)
    }

    pub fn height(&self, r: BlockRef) -> u64 {
        self.chains[r.chain].height(r.id)
    }

    pub fn k_deep(&self, chain: usize, tip: BlockId, k: u64) -> Result<(BlockId, BlockId), StoreError> {
        self.chains[chain].k_deep(tip, k)
    }

    pub fn credible_tips(&self, chain: usize, t: f64, delta: f64) -> Vec<BlockId> {
        self.chains[chain].credible_tips(t, delta)
    }

    /// Total number of blocks across chains, genesis blocks included.
    pub fn total_blocks(&self) -> usize {
        self.chains.iter().map(Chain::len).sum()
    }
}

/// Publication-ordered view of one chain for fast credibility queries.
///
/// Entries are kept sorted by visible time, so the index can be built once
/// from a finished chain or grown incrementally by an event loop that
/// observes publications in time order.
#[derive(Debug, Clone, Default)]
pub struct PublicIndex {
    times: Vec<f64>,
    prefix_max_height: Vec<u64>,
    by_height: Vec<Vec<(f64, BlockId)>>,
}

impl PublicIndex {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds the index from every published block of `chain`.
    pub fn from_chain(chain: &Chain) -> Self {
        let mut entries: Vec<(f64, BlockId)> =
            (0..chain.len()).filter_map(|i| chain.visible_time(BlockId(i)).map(|v| (v, BlockId(i)))).collect();
        entries.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut index = Self::new();
        for (v, id) in entries {
            index.push(v, id, chain.height(id));
        }
        index
    }

    /// Records that block `id` at `height` became visible at `time`.
    /// Times must arrive in non-decreasing order.
    pub fn push(&mut self, time: f64, id: BlockId, height: u64) {
        if let Some(&last) = self.times.last() {
            assert!(time >= last, "public index fed out of order: {time} after {last}");
        }
        let running = self.prefix_max_height.last().copied().unwrap_or(0).max(height);
        self.times.push(time);
        self.prefix_max_height.push(running);
        let h = height as usize;
        if self.by_height.len() <= h {
            self.by_height.resize_with(h + 1, Vec::new);
        }
        let bucket = &mut self.by_height[h];
        let pos = bucket.partition_point(|e| (e.0, e.1) <= (time, id));
        bucket.insert(pos, (time, id));
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Maximum height over blockchains published by `time`.
    pub fn max_height(&self, time: f64) -> u64 {
        let n = self.times.partition_point(|&v| v <= time);
        if n == 0 {
            0
        } else {
            self.prefix_max_height[n - 1]
        }
    }

    /// Blocks at `height` published by `time`, earliest first.
    pub fn at_height(&self, height: u64, time: f64) -> &[(f64, BlockId)] {
        match self.by_height.get(height as usize) {
            Some(bucket) => &bucket[..bucket.partition_point(|e| e.0 <= time)],
            None => &[],
        }
    }

    /// Highest blockchain published by `time`, ties broken by earliest
    /// publication then lowest id.
    pub fn preferred(&self, time: f64) -> BlockId {
        let h = self.max_height(time);
        self.at_height(h, time).first().map(|e| e.1).unwrap_or(BlockId::GENESIS)
    }

    /// Every maximum-height blockchain published by `time`.
    pub fn highest(&self, time: f64) -> Vec<BlockId> {
        let h = self.max_height(time);
        self.at_height(h, time).iter().map(|e| e.1).collect()
    }

    /// Credible blockchains at `t`; same result as [`Chain::credible_tips`]
    /// but ordered by height then publication.
    pub fn credible_tips(&self, t: f64, delta: f64) -> Vec<BlockId> {
        let floor = self.max_height(t - delta);
        let top = self.max_height(t);
        (floor..=top).flat_map(|h| self.at_height(h, t).iter().map(|e| e.1)).collect()
    }

    /// Minimum and maximum heights over the credible blockchains at `t`.
    /// The minimum is the height floor itself: a blockchain at the floor
    /// was published by `t - delta` and is therefore credible.
    pub fn credible_height_range(&self, t: f64, delta: f64) -> (u64, u64) {
        (self.max_height(t - delta), self.max_height(t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear(n: usize) -> BlockStore {
        let mut store = BlockStore::new(1);
        let mut tip = BlockId::GENESIS;
        for i in 1..=n {
            tip = store.append_block(NewBlock::honest(0, tip, i as f64)).unwrap();
        }
        store
    }

    #[test]
    fn first_extension_has_height_one() {
        let mut store = BlockStore::new(1);
        let id = store.append_block(NewBlock::honest(0, BlockId::GENESIS, 1.0)).unwrap();
        assert_eq!(id, BlockId(1));
        assert_eq!(store.chain(0).height(id), 1);
    }

    #[test]
    fn equal_mining_times_are_non_causal() {
        let mut store = BlockStore::new(1);
        let a = store.append_block(NewBlock::honest(0, BlockId::GENESIS, 1.0)).unwrap();
        let err = store.append_block(NewBlock::honest(0, a, 1.0)).unwrap_err();
        assert!(matches!(err, StoreError::NonCausalParent { .. }));
    }

    #[test]
    fn unknown_and_cross_chain_parents_rejected() {
        let mut store = BlockStore::new(2);
        let err = store.append_block(NewBlock::honest(0, BlockId(7), 1.0)).unwrap_err();
        assert!(matches!(err, StoreError::UnknownParent { .. }));
        let v1 = store.append_block(NewBlock::honest(1, BlockId::GENESIS, 1.0)).unwrap();
        let draft = NewBlock::honest(0, BlockId::GENESIS, 2.0).with_parent(BlockRef::new(1, v1));
        let err = store.append_block(draft).unwrap_err();
        assert!(matches!(err, StoreError::CrossChainParent { parent_chain: 1, child_chain: 0 }));
    }

    #[test]
    fn chain_of_five_has_heights_one_to_five() {
        let store = linear(5);
        let heights: Vec<u64> = (1..=5).map(|i| store.chain(0).height(BlockId(i))).collect();
        assert_eq!(heights, vec![1, 2, 3, 4, 5]);
    }

    #[test]
    fn k_deep_matches_definition() {
        let store = linear(3);
        assert_eq!(store.k_deep(0, BlockId(3), 1).unwrap(), (BlockId(3), BlockId(2)));
        assert_eq!(store.k_deep(0, BlockId(3), 3).unwrap(), (BlockId(1), BlockId(0)));
        assert!(matches!(store.k_deep(0, BlockId(3), 4), Err(StoreError::DepthExceedsHeight { depth: 4, height: 3 })));
        assert!(store.k_deep(0, BlockId(3), 0).is_err());
    }

    #[test]
    fn genesis_only_is_credible() {
        let store = BlockStore::new(1);
        assert_eq!(store.credible_tips(0, 0.5, 0.3), vec![BlockId::GENESIS]);
    }

    #[test]
    fn credible_tips_follow_publication_cutoff() {
        let mut store = BlockStore::new(1);
        let b1 = store.append_block(NewBlock::honest(0, BlockId::GENESIS, 1.0)).unwrap();
        let b2 = store.append_block(NewBlock::honest(0, BlockId::GENESIS, 1.2)).unwrap();
        assert_eq!(store.credible_tips(0, 1.25, 0.3), vec![BlockId::GENESIS, b1, b2]);
        assert_eq!(store.credible_tips(0, 1.5, 0.3), vec![b1, b2]);

        let index = PublicIndex::from_chain(store.chain(0));
        let mut tips = index.credible_tips(1.25, 0.3);
        tips.sort();
        assert_eq!(tips, vec![BlockId::GENESIS, b1, b2]);
        assert_eq!(index.credible_height_range(1.5, 0.3), (1, 1));
        assert_eq!(index.preferred(1.5), b1);
    }

    #[test]
    fn withheld_blocks_never_credible() {
        let mut store = linear(2);
        let a = store.append_block(NewBlock::adversarial(0, BlockId(2), 2.5)).unwrap();
        for t in [2.5, 3.0, 100.0] {
            assert!(!store.credible_tips(0, t, 0.1).contains(&a));
        }
    }

    #[test]
    fn publishing_releases_withheld_ancestors() {
        let mut store = BlockStore::new(1);
        let a1 = store.append_block(NewBlock::adversarial(0, BlockId::GENESIS, 1.0)).unwrap();
        let a2 = store.append_block(NewBlock::adversarial(0, a1, 2.0)).unwrap();
        store.publish(BlockRef::new(0, a2), 3.0).unwrap();
        assert_eq!(store.chain(0).block(a1).publish_time, Some(3.0));
        assert_eq!(store.chain(0).visible_time(a2), Some(3.0));
        assert!(matches!(store.publish(BlockRef::new(0, a1), 4.0), Err(StoreError::AlreadyPublished(_))));
    }

    #[test]
    fn late_parent_delays_child_visibility() {
        let mut store = BlockStore::new(1);
        let a1 = store.append_block(NewBlock::adversarial(0, BlockId::GENESIS, 1.0).published_at(5.0)).unwrap();
        let a2 = store.append_block(NewBlock::adversarial(0, a1, 2.0).published_at(3.0)).unwrap();
        assert_eq!(store.chain(0).visible_time(a2), Some(5.0));
        assert!(!store.credible_tips(0, 4.0, 0.0).contains(&a2));
    }

    #[test]
    fn publish_before_mining_rejected() {
        let mut store = BlockStore::new(1);
        let a = store.append_block(NewBlock::adversarial(0, BlockId::GENESIS, 1.0)).unwrap();
        assert!(matches!(store.publish(BlockRef::new(0, a), 0.5), Err(StoreError::InvalidPublishTime { .. })));
    }

    #[test]
    fn ancestor_queries_match_parent_walk() {
        let store = linear(300);
        let chain = store.chain(0);
        for h in [0u64, 1, 2, 17, 128, 255, 299, 300] {
            let mut walk = BlockId(300);
            while chain.height(walk) > h {
                walk = chain.parent(walk).unwrap();
            }
            assert_eq!(chain.ancestor_at_height(BlockId(300), h), Some(walk));
        }
        assert_eq!(chain.ancestor_at_height(BlockId(3), 4), None);
        assert!(chain.is_ancestor(BlockId(10), BlockId(200)));
        assert!(!chain.is_ancestor(BlockId(200), BlockId(10)));
    }
}
