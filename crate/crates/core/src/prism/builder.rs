//! Incremental construction of honest Prism payloads during a simulation.
//!
//! The pure functions in the parent module recompute votes and reference
//! links from a finished trace; this builder maintains enough state to do
//! the same work per block in near-constant time while the event loop runs.
//! Tests compare the two.

use std::collections::HashSet;

use crate::store::{BlockId, BlockRef, BlockStore, PublicIndex, Vote};

/// Picks a proposer at a height from the allowed candidates.
pub type VoteSteer<'a> = dyn FnMut(u64, &[BlockId]) -> Option<BlockId> + 'a;

#[derive(Debug, Clone)]
pub(crate) struct PrismBuilder {
    delta: f64,
    /// Entry `h - 1` holds `R_h` and the earliest published proposer at `h`.
    first_pub: Vec<(f64, BlockId)>,
    /// Highest proposer height voted on along each voter block's lineage.
    vote_frontier: Vec<Vec<u64>>,
    /// Proposer blocks whose newly covered set contains the block.
    covered_by: Vec<Vec<Vec<BlockId>>>,
    /// Every non-genesis block in order of becoming visible.
    visible_log: Vec<(f64, BlockRef)>,
}

impl PrismBuilder {
    pub fn new(chain_count: usize, delta: f64) -> Self {
        Self {
            delta,
            first_pub: Vec::new(),
            vote_frontier: vec![vec![0]; chain_count],
            covered_by: vec![vec![vec![BlockId::GENESIS]]; chain_count],
            visible_log: Vec::new(),
        }
    }

    pub fn on_visible(&mut self, store: &BlockStore, r: BlockRef, time: f64) {
        if r.id == BlockId::GENESIS {
            return;
        }
        self.visible_log.push((time, r));
        if r.chain == 0 {
            let h = store.height(r) as usize;
            if h > self.first_pub.len() {
                debug_assert_eq!(h, self.first_pub.len() + 1, "proposer heights become visible in order");
                self.first_pub.push((time, r.id));
            } else {
                let slot = &mut self.first_pub[h - 1];
                if (time, r.id) < *slot {
                    *slot = (time, r.id);
                }
            }
        }
    }

    /// Votes a voter block mined at `t` on top of `parent` casts under the
    /// honest rule. `steer`, when given, may replace the first-published
    /// choice at each height with another candidate. Candidates are the
    /// proposers in the ambiguity band `[R_h, R_h + delta)` published before
    /// `t`, or with `wide` set every proposer at the height published by `t`.
    pub fn votes_for(
        &self,
        proposers: &PublicIndex,
        voter_chain: usize,
        parent: BlockId,
        t: f64,
        wide: bool,
        mut steer: Option<&mut VoteSteer<'_>>,
    ) -> Result<Vec<Vote>, String> {
        let from = self.vote_frontier[voter_chain][parent.0] + 1;
        let cutoff = t - self.delta;
        let to = self.first_pub.partition_point(|e| e.0 <= cutoff) as u64;
        let mut votes = Vec::new();
        for h in from..=to {
            let (r_h, earliest) = self.first_pub[h as usize - 1];
            let mut choice = earliest;
            if let Some(steer) = steer.as_deref_mut() {
                let band: Vec<BlockId> = proposers
                    .at_height(h, t)
                    .iter()
                    .filter(|e| wide || (e.0 < t && (e.0 < r_h + self.delta || e.1 == earliest)))
                    .map(|e| e.1)
                    .collect();
                if let Some(pick) = steer(h, &band) {
                    if !band.contains(&pick) {
                        return Err(format!(
                            "steered vote at height {h} for proposer {pick} outside its candidate set"
                        ));
                    }
                    choice = pick;
                }
            }
            votes.push(Vote { height: h, proposer: choice });
        }
        Ok(votes)
    }

    /// Reference links of a proposer block mined at `t` on `parent`, and the
    /// set of blocks it newly makes reachable.
    pub fn refs_for(&self, store: &BlockStore, parent: BlockId, t: f64) -> (Vec<BlockRef>, Vec<BlockRef>) {
        let proposers = store.chain(0);
        // Everything visible by T_L - delta is already reachable from the most
        // recent honest ancestor L, which referenced all of it.
        let mut latest_honest = parent;
        while !proposers.block(latest_honest).is_honest() {
            latest_honest = proposers.parent(latest_honest).expect("genesis is honest");
        }
        let start = if latest_honest == BlockId::GENESIS {
            f64::NEG_INFINITY
        } else {
            proposers.block(latest_honest).mined_time - self.delta
        };
        let end = t - self.delta;
        let lo = self.visible_log.partition_point(|e| e.0 <= start);
        let hi = self.visible_log.partition_point(|e| e.0 <= end);

        let mut unreached: Vec<BlockRef> =
            self.visible_log[lo..hi].iter().map(|e| e.1).filter(|r| !self.in_reach(store, parent, *r)).collect();
        sort_newest_first(store, &mut unreached);

        let mut marked: HashSet<BlockRef> = HashSet::new();
        let mut covered = Vec::new();
        let mut refs = Vec::new();
        for d in unreached {
            if marked.contains(&d) {
                continue;
            }
            refs.push(d);
            let mut stack = vec![d];
            while let Some(x) = stack.pop() {
                if x.id == BlockId::GENESIS || marked.contains(&x) || self.in_reach(store, parent, x) {
                    continue;
                }
                marked.insert(x);
                covered.push(x);
                let block = store.block(x);
                if let Some(p) = block.parent {
                    stack.push(BlockRef::new(x.chain, p));
                }
                stack.extend(block.refs.iter().copied());
            }
        }
        refs.sort();
        (refs, covered)
    }

    fn in_reach(&self, store: &BlockStore, proposer: BlockId, x: BlockRef) -> bool {
        let chain = store.chain(0);
        self.covered_by[x.chain].get(x.id.0).is_some_and(|qs| qs.iter().any(|&q| chain.is_ancestor(q, proposer)))
    }

    /// Records a freshly appended block. `covered` is the set returned by
    /// [`refs_for`](Self::refs_for) for proposer blocks (empty otherwise).
    pub fn on_appended(&mut self, store: &BlockStore, r: BlockRef, covered: &[BlockRef]) {
        let block = store.block(r);
        let parent = block.parent.expect("appended blocks have parents");
        self.covered_by[r.chain].push(Vec::new());
        let inherited = self.vote_frontier[r.chain][parent.0];
        let voted = block.votes.iter().map(|v| v.height).max().unwrap_or(0);
        self.vote_frontier[r.chain].push(inherited.max(voted));
        if r.chain == 0 {
            self.covered_by[0][r.id.0].push(r.id);
            for x in covered {
                self.covered_by[x.chain][x.id.0].push(r.id);
            }
        }
    }
}

/// Orders blocks by decreasing mining time, so every block is visited before
/// anything it can reach.
pub(crate) fn sort_newest_first(store: &BlockStore, blocks: &mut [BlockRef]) {
    blocks.sort_by(|a, b| {
        let ta = store.block(*a).mined_time;
        let tb = store.block(*b).mined_time;
        tb.total_cmp(&ta).then(b.cmp(a))
    });
}
