use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use super::{ArrivalSchedule, SimError, SimOptions, TieBreak, VoteView};
use crate::adversary::{Action, Publication, Strategy, StrategyDecision, StrategyEvent, View};
use crate::params::ProtocolParams;
use crate::prism::builder::PrismBuilder;
use crate::prism::tx::TxGenerator;
use crate::seed::{self, stream};
use crate::store::{BlockId, BlockRef, BlockStore, Kind, NewBlock, PublicIndex};
use crate::trace::{Event, EventKind, Trace};

#[derive(Debug, Clone, Copy)]
struct Pending {
    time: f64,
    seq: u64,
    block: BlockRef,
}

// Reversed so that `BinaryHeap` pops the earliest publication first.
impl Ord for Pending {
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then(other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Pending {}

pub(super) struct Engine<'a> {
    params: &'a ProtocolParams,
    options: &'a SimOptions,
    seed: u64,
    store: BlockStore,
    public: Vec<PublicIndex>,
    prism: Option<PrismBuilder>,
    txs: Option<TxGenerator>,
    pending: BinaryHeap<Pending>,
    seq: u64,
    events: Vec<Event>,
}

impl<'a> Engine<'a> {
    pub fn new(params: &'a ProtocolParams, options: &'a SimOptions, seed: u64) -> Self {
        let chains = params.chain_count();
        let mut public: Vec<PublicIndex> = (0..chains).map(|_| PublicIndex::new()).collect();
        for index in &mut public {
            index.push(0.0, BlockId::GENESIS, 0);
        }
        let prism = params.is_prism().then(|| PrismBuilder::new(chains, params.delta_net));
        let txs = params.is_prism().then(|| {
            TxGenerator::new(
                seed::mix(seed, stream::TRANSACTIONS),
                options.txs_per_block,
                options.outpoint_space,
                options.redundant_prob,
            )
        });
        Self {
            params,
            options,
            seed,
            store: BlockStore::new(chains),
            public,
            prism,
            txs,
            pending: BinaryHeap::new(),
            seq: 0,
            events: Vec::new(),
        }
    }

    fn view(&self, now: f64) -> View<'_> {
        View { now, params: self.params, store: &self.store, public: &self.public }
    }

    pub fn run(mut self, schedule: ArrivalSchedule, strategy: &mut dyn Strategy) -> Result<Trace, SimError> {
        let mut arrivals: Vec<(f64, bool, usize)> = Vec::new();
        for (chain, times) in schedule.honest.iter().enumerate() {
            arrivals.extend(times.iter().map(|&t| (t, true, chain)));
        }
        for (chain, times) in schedule.adversarial.iter().enumerate() {
            arrivals.extend(times.iter().map(|&t| (t, false, chain)));
        }
        // Honest arrivals first at equal times, then by chain.
        arrivals.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)).then(a.2.cmp(&b.2)));

        for (time, honest, chain) in arrivals {
            self.drain_until(time)?;
            if honest {
                let block = self.mine_honest(chain, time, strategy)?;
                let decision = strategy.decide(&StrategyEvent::HonestBlock { block, time }, &self.view(time));
                if decision.action != Action::Skip {
                    return Err(violation(time, "mining outside a budget point"));
                }
                // A reaction lands strictly after the block it reacts to, so
                // the honest choice stays credible when delta_net is 0.
                let mut publications = decision.publications;
                for p in &mut publications {
                    if p.time == time {
                        p.time = time.next_up();
                    }
                }
                self.schedule(publications, time)?;
            } else {
                let decision = strategy.decide(&StrategyEvent::Budget { chain, time }, &self.view(time));
                self.apply_decision(chain, time, decision, strategy)?;
            }
        }
        self.drain_until(self.params.horizon)?;

        let report = strategy.report(&self.view(self.params.horizon));
        Ok(Trace {
            params: *self.params,
            seed: self.seed,
            strategy: strategy.name().to_owned(),
            store: self.store,
            schedule,
            events: self.events,
            transactions: self.txs.map(TxGenerator::into_registry).unwrap_or_default(),
            report,
        })
    }

    fn drain_until(&mut self, time: f64) -> Result<(), SimError> {
        while let Some(next) = self.pending.peek() {
            if next.time > time {
                break;
            }
            let next = self.pending.pop().expect("peeked");
            self.apply_publication(next.block, next.time)?;
        }
        Ok(())
    }

    fn schedule(&mut self, publications: Vec<Publication>, now: f64) -> Result<(), SimError> {
        for p in publications {
            let Some(block) = self.store.get(p.block) else {
                return Err(violation(now, format!("publishing unknown block {:?}", p.block)));
            };
            if block.kind == Kind::Honest {
                continue;
            }
            if !(p.time >= now) || p.time.is_nan() {
                return Err(violation(
                    now,
                    format!("publication of {:?} scheduled in the past at {}", p.block, p.time),
                ));
            }
            if p.time > self.params.horizon {
                continue;
            }
            if p.time == now {
                self.apply_publication(p.block, now)?;
            } else {
                self.seq += 1;
                self.pending.push(Pending { time: p.time, seq: self.seq, block: p.block });
            }
        }
        Ok(())
    }

    fn apply_publication(&mut self, block: BlockRef, time: f64) -> Result<(), SimError> {
        let chain = self.store.chain(block.chain);
        if chain.block(block.id).publish_time.is_some() {
            return Ok(());
        }
        let mut fresh = Vec::new();
        let mut cursor = Some(block.id);
        while let Some(id) = cursor {
            if chain.block(id).publish_time.is_some() {
                break;
            }
            fresh.push(id);
            cursor = chain.parent(id);
        }
        self.store.publish(block, time)?;
        for id in fresh.into_iter().rev() {
            self.mark_visible(BlockRef::new(block.chain, id), time);
        }
        Ok(())
    }

    fn mark_visible(&mut self, r: BlockRef, time: f64) {
        let height = self.store.height(r);
        self.public[r.chain].push(time, r.id, height);
        if let Some(prism) = &mut self.prism {
            prism.on_visible(&self.store, r, time);
        }
        self.events.push(Event { time, kind: EventKind::Published, block: r });
    }

    fn mine_honest(&mut self, chain: usize, time: f64, strategy: &mut dyn Strategy) -> Result<BlockRef, SimError> {
        let parent = match self.options.tie_break {
            TieBreak::EarliestPublication => self.public[chain].preferred(time),
            TieBreak::DelayedView => self.public[chain].preferred(time - self.params.delta_net),
            TieBreak::AdversarySteered => {
                let candidates = self.public[chain].highest(time);
                match strategy.steer_honest(chain, &candidates, &self.view(time)) {
                    Some(pick) if candidates.contains(&pick) => pick,
                    Some(pick) => {
                        return Err(violation(time, format!("steered honest block onto non-maximal tip {pick}")));
                    }
                    None => candidates[0],
                }
            }
        };
        let steer_votes = self.options.vote_view == VoteView::AdversarialBand;
        let draft = self.payload(NewBlock::honest(chain, parent, time), false, steer_votes.then_some(strategy))?;
        self.append(draft.0, &draft.1)
    }

    fn apply_decision(
        &mut self,
        chain: usize,
        time: f64,
        decision: StrategyDecision,
        strategy: &mut dyn Strategy,
    ) -> Result<(), SimError> {
        if let Action::Mine { parent, censor } = decision.action {
            let Some(p) = self.store.chain(chain).get(parent) else {
                return Err(violation(time, format!("unknown parent {parent} on chain {chain}")));
            };
            if !(p.mined_time < time) {
                return Err(violation(time, format!("non-causal parent {parent} mined at {}", p.mined_time)));
            }
            let (draft, covered) =
                self.payload(NewBlock::adversarial(chain, parent, time), censor, Some(&mut *strategy))?;
            let block = self.append(draft, &covered)?;
            self.schedule(decision.publications, time)?;
            let more = strategy.on_mined(block, &self.view(time));
            self.schedule(more, time)
        } else {
            self.schedule(decision.publications, time)
        }
    }

    /// Fills Prism votes, reference links and transactions.
    fn payload(
        &mut self,
        mut draft: NewBlock,
        censor: bool,
        strategy: Option<&mut dyn Strategy>,
    ) -> Result<(NewBlock, Vec<BlockRef>), SimError> {
        let Some(prism) = &self.prism else {
            return Ok((draft, Vec::new()));
        };
        let time = draft.mined_time;
        let mut covered = Vec::new();
        if !censor {
            if draft.chain == 0 {
                let (refs, reach) = prism.refs_for(&self.store, draft.parent.id, time);
                draft.refs = refs;
                covered = reach;
            } else {
                let view = View { now: time, params: self.params, store: &self.store, public: &self.public };
                let honest = draft.kind == Kind::Honest;
                let votes = match strategy {
                    Some(s) => {
                        let mut steer = |h: u64, candidates: &[BlockId]| {
                            if honest {
                                s.steer_vote(h, candidates, &view)
                            } else {
                                s.adversarial_vote(h, candidates, &view)
                            }
                        };
                        prism.votes_for(&self.public[0], draft.chain, draft.parent.id, time, !honest, Some(&mut steer))
                    }
                    None => prism.votes_for(&self.public[0], draft.chain, draft.parent.id, time, false, None),
                };
                draft.votes = votes.map_err(|reason| violation(time, reason))?;
            }
        }
        if draft.chain == 0 {
            if let Some(txs) = &mut self.txs {
                draft.txs = txs.next_block();
            }
        }
        Ok((draft, covered))
    }

    fn append(&mut self, draft: NewBlock, covered: &[BlockRef]) -> Result<BlockRef, SimError> {
        let chain = draft.chain;
        let time = draft.mined_time;
        let honest = draft.kind == Kind::Honest;
        let id = self.store.append_block(draft)?;
        let r = BlockRef::new(chain, id);
        if let Some(prism) = &mut self.prism {
            prism.on_appended(&self.store, r, covered);
        }
        self.events.push(Event { time, kind: EventKind::Mined, block: r });
        if honest {
            self.mark_visible(r, time);
        }
        Ok(r)
    }
}

fn violation(time: f64, reason: impl Into<String>) -> SimError {
    SimError::StrategyViolation { time, reason: reason.into() }
}

/// Checks the contracts every trace must satisfy: honest blocks match the
/// honest schedule exactly, adversarial blocks use distinct budget points,
/// and every honest block extends a blockchain credible at its mining time.
pub fn check_invariants(trace: &Trace) -> Result<(), String> {
    let delta = trace.params.delta_net;
    for chain in trace.store.chains() {
        let j = chain.index();
        let honest: Vec<f64> = chain.blocks()[1..].iter().filter(|b| b.is_honest()).map(|b| b.mined_time).collect();
        let expected = trace.schedule.honest.get(j).map(Vec::as_slice).unwrap_or(&[]);
        if honest != expected {
            return Err(format!("chain {j}: honest blocks differ from the honest schedule"));
        }

        let budget = trace.schedule.adversarial.get(j).map(Vec::as_slice).unwrap_or(&[]);
        let mut used: HashMap<u64, usize> = HashMap::new();
        for b in chain.blocks().iter().filter(|b| !b.is_honest()) {
            let slot = budget.binary_search_by(|t| t.total_cmp(&b.mined_time));
            match slot {
                Ok(i) => {
                    let n = used.entry(i as u64).or_default();
                    *n += 1;
                    if *n > 1 {
                        return Err(format!("chain {j}: budget point {} used twice", b.mined_time));
                    }
                }
                Err(_) => return Err(format!("chain {j}: adversarial block at {} off budget", b.mined_time)),
            }
        }

        let index = PublicIndex::from_chain(chain);
        // Blocks sharing a visibility instant; only those created before a
        // block count against it.
        let mut same_instant: HashMap<u64, Vec<(BlockId, u64)>> = HashMap::new();
        for id in (0..chain.len()).map(BlockId) {
            if let Some(v) = chain.visible_time(id) {
                same_instant.entry(v.to_bits()).or_default().push((id, chain.height(id)));
            }
        }
        for b in chain.blocks()[1..].iter().filter(|b| b.is_honest()) {
            let parent = b.parent.expect("non-genesis");
            let visible = chain.visible_time(parent);
            let cutoff = b.mined_time - delta;
            let tied = same_instant.get(&cutoff.to_bits()).into_iter().flatten().filter(|e| e.0 < b.id).map(|e| e.1);
            let floor = tied.fold(index.max_height(cutoff.next_down()), u64::max);
            if !matches!(visible, Some(v) if v <= b.mined_time) || chain.height(parent) < floor {
                return Err(format!("chain {j}: honest block {} extends a non-credible blockchain", b.id));
            }
        }
    }
    Ok(())
}
