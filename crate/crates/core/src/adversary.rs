//! Adversarial strategies.
//!
//! A strategy is a state machine driven by the simulator. It is consulted
//! at every point of its mining budget and after every honest block, sees
//! the public state of every chain plus its own withheld blocks, and never
//! sees future arrivals.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::params::ProtocolParams;
use crate::store::{BlockId, BlockRef, BlockStore, PublicIndex};

/// What the simulator is asking the strategy about.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StrategyEvent {
    /// A point of the adversarial budget on `chain`: the strategy may mine
    /// one block there.
    Budget { chain: usize, time: f64 },
    /// An honest block was just mined and published.
    HonestBlock { block: BlockRef, time: f64 },
}

impl StrategyEvent {
    pub fn time(&self) -> f64 {
        match *self {
            StrategyEvent::Budget { time, .. } | StrategyEvent::HonestBlock { time, .. } => time,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Skip,
    /// Mine on `parent` (same chain as the budget point). With `censor`
    /// set, the block carries no votes or reference links.
    Mine {
        parent: BlockId,
        censor: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Publication {
    pub block: BlockRef,
    pub time: f64,
}

impl Publication {
    pub fn new(block: BlockRef, time: f64) -> Self {
        Self { block, time }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyDecision {
    pub action: Action,
    pub publications: Vec<Publication>,
}

impl StrategyDecision {
    pub fn skip() -> Self {
        Self { action: Action::Skip, publications: Vec::new() }
    }

    pub fn mine(parent: BlockId) -> Self {
        Self { action: Action::Mine { parent, censor: false }, publications: Vec::new() }
    }

    pub fn publish(publications: Vec<Publication>) -> Self {
        Self { action: Action::Skip, publications }
    }
}

/// Outcome summary a strategy reports at the end of a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub success: Option<bool>,
    pub detail: BTreeMap<String, f64>,
}

/// Read-only snapshot handed to strategies.
#[derive(Clone, Copy)]
pub struct View<'a> {
    pub now: f64,
    pub params: &'a ProtocolParams,
    pub store: &'a BlockStore,
    pub public: &'a [PublicIndex],
}

impl View<'_> {
    pub fn public_height(&self, chain: usize) -> u64 {
        self.public[chain].max_height(self.now)
    }

    /// Tip an honest miner with the default tie-break would extend now.
    pub fn preferred(&self, chain: usize) -> BlockId {
        self.public[chain].preferred(self.now)
    }

    pub fn highest(&self, chain: usize) -> Vec<BlockId> {
        self.public[chain].highest(self.now)
    }

    pub fn is_published(&self, block: BlockRef) -> bool {
        self.store.block(block).publish_time.is_some()
    }

    pub fn height(&self, block: BlockRef) -> u64 {
        self.store.height(block)
    }
}

pub trait Strategy {
    fn name(&self) -> &str;

    fn decide(&mut self, event: &StrategyEvent, view: &View) -> StrategyDecision;

    /// Called right after a block requested through [`Action::Mine`] is
    /// stored; the strategy may publish immediately.
    fn on_mined(&mut self, _block: BlockRef, _view: &View) -> Vec<Publication> {
        Vec::new()
    }

    /// Picks which maximum-height public tip an honest block extends when
    /// honest tie-breaking is adversary-steered. `None` keeps the default.
    fn steer_honest(&mut self, _chain: usize, _candidates: &[BlockId], _view: &View) -> Option<BlockId> {
        None
    }

    /// Overrides an honest vote at proposer `height` with a proposer from
    /// the ambiguity band. `None` keeps the first-published proposer.
    fn steer_vote(&mut self, _height: u64, _band: &[BlockId], _view: &View) -> Option<BlockId> {
        None
    }

    /// Chooses the vote of an adversarial voter block that is not
    /// censored, among every proposer at `height` published so far. `None`
    /// follows the honest rule.
    fn adversarial_vote(&mut self, _height: u64, _candidates: &[BlockId], _view: &View) -> Option<BlockId> {
        None
    }

    fn report(&self, _view: &View) -> AttackReport {
        AttackReport::default()
    }
}

/// Never mines.
#[derive(Debug, Clone, Copy, Default)]
pub struct NullAdversary;

impl Strategy for NullAdversary {
    fn name(&self) -> &str {
        "null"
    }

    fn decide(&mut self, _event: &StrategyEvent, _view: &View) -> StrategyDecision {
        StrategyDecision::skip()
    }
}

/// Double-spend attempt against the first honest block on chain 0.
///
/// The attacker forks privately from the target's parent and releases the
/// fork once it is strictly higher than every public chain while the target
/// sits at least `k_confirm` deep publicly.
#[derive(Debug, Clone)]
pub struct PrivateChain {
    k_confirm: u64,
    target: Option<BlockId>,
    base: BlockId,
    tip: Option<BlockId>,
    released_at: Option<f64>,
}

impl PrivateChain {
    pub fn new(k_confirm: u64) -> Self {
        assert!(k_confirm >= 1, "confirmation depth must be positive");
        Self { k_confirm, target: None, base: BlockId::GENESIS, tip: None, released_at: None }
    }

    fn try_release(&mut self, view: &View) -> Vec<Publication> {
        let (Some(target), Some(tip), None) = (self.target, self.tip, self.released_at) else {
            return Vec::new();
        };
        let chain = view.store.chain(0);
        let public_height = view.public_height(0);
        if chain.height(tip) <= public_height {
            return Vec::new();
        }
        let target_height = chain.height(target);
        let confirmed = view
            .highest(0)
            .into_iter()
            .any(|t| chain.is_ancestor(target, t) && public_height + 1 - target_height >= self.k_confirm);
        if !confirmed {
            return Vec::new();
        }
        self.released_at = Some(view.now);
        vec![Publication::new(BlockRef::new(0, tip), view.now)]
    }
}

impl Strategy for PrivateChain {
    fn name(&self) -> &str {
        "private_chain"
    }

    fn decide(&mut self, event: &StrategyEvent, view: &View) -> StrategyDecision {
        match *event {
            StrategyEvent::HonestBlock { block, .. } if block.chain == 0 && self.target.is_none() => {
                self.target = Some(block.id);
                self.base = view.store.block(block).parent.expect("honest blocks are not genesis");
            }
            StrategyEvent::Budget { chain: 0, .. } if self.target.is_some() && self.released_at.is_none() => {
                return StrategyDecision::mine(self.tip.unwrap_or(self.base));
            }
            _ => {}
        }
        StrategyDecision::publish(self.try_release(view))
    }

    fn on_mined(&mut self, block: BlockRef, view: &View) -> Vec<Publication> {
        self.tip = Some(block.id);
        self.try_release(view)
    }

    fn report(&self, view: &View) -> AttackReport {
        let mut detail = BTreeMap::new();
        detail.insert("k_confirm".to_owned(), self.k_confirm as f64);
        if let Some(tip) = self.tip {
            detail.insert("private_height".to_owned(), view.store.chain(0).height(tip) as f64);
        }
        if let Some(t) = self.released_at {
            detail.insert("released_at".to_owned(), t);
        }
        AttackReport { success: Some(self.released_at.is_some()), detail }
    }
}

/// Withhold-and-release selfish mining, run independently on every chain.
///
/// When honest tie-breaking is adversary-steered, honest miners resolve
/// every race in the attacker's favour.
#[derive(Debug, Clone, Default)]
pub struct SelfishMining {
    tips: Vec<Option<BlockId>>,
}

impl SelfishMining {
    pub fn new() -> Self {
        Self::default()
    }

    fn tip(&mut self, chain: usize, view: &View) -> BlockId {
        if self.tips.len() <= chain {
            self.tips.resize(chain + 1, None);
        }
        *self.tips[chain].get_or_insert_with(|| view.preferred(chain))
    }
}

impl Strategy for SelfishMining {
    fn name(&self) -> &str {
        "selfish_mining"
    }

    fn decide(&mut self, event: &StrategyEvent, view: &View) -> StrategyDecision {
        match *event {
            StrategyEvent::Budget { chain, .. } => StrategyDecision::mine(self.tip(chain, view)),
            StrategyEvent::HonestBlock { block, time } => {
                let chain = block.chain;
                let tip = self.tip(chain, view);
                let store = view.store.chain(chain);
                let ours = store.height(tip);
                let public = view.public_height(chain);
                let tip_ref = BlockRef::new(chain, tip);
                let mut publications = Vec::new();
                if ours < public {
                    self.tips[chain] = Some(view.preferred(chain));
                } else if ours <= public + 1 {
                    if !view.is_published(tip_ref) {
                        publications.push(Publication::new(tip_ref, time));
                    }
                } else {
                    let matching = store.ancestor_at_height(tip, public).expect("lead above public height");
                    if store.block(matching).publish_time.is_none() {
                        publications.push(Publication::new(BlockRef::new(chain, matching), time));
                    }
                }
                StrategyDecision::publish(publications)
            }
        }
    }

    fn on_mined(&mut self, block: BlockRef, view: &View) -> Vec<Publication> {
        let chain = view.store.chain(block.chain);
        let parent = chain.parent(block.id).expect("mined blocks have parents");
        self.tips[block.chain] = Some(block.id);
        // Winning a published race: release at once.
        let parent_height = chain.height(parent);
        let racing = chain.block(parent).publish_time.is_some()
            && !chain.block(parent).is_honest()
            && parent_height == view.public_height(block.chain)
            && view.highest(block.chain).len() > 1;
        if racing {
            vec![Publication::new(block, view.now)]
        } else {
            Vec::new()
        }
    }

    fn steer_honest(&mut self, chain: usize, candidates: &[BlockId], view: &View) -> Option<BlockId> {
        let store = view.store.chain(chain);
        candidates.iter().copied().find(|&c| !store.block(c).is_honest())
    }

    /// Withheld voter blocks back a proposer the honest voters passed over,
    /// adversarial ones first, so that releasing them can flip elections.
    /// Candidates arrive in publication order.
    fn adversarial_vote(&mut self, _height: u64, candidates: &[BlockId], view: &View) -> Option<BlockId> {
        let proposers = view.store.chain(0);
        let passed_over = candidates.get(1..).unwrap_or(&[]);
        passed_over
            .iter()
            .copied()
            .find(|&b| !proposers.block(b).is_honest())
            .or_else(|| passed_over.last().copied())
            .or_else(|| candidates.first().copied())
    }
}

/// Prism vote censorship: adversarial voter blocks carry no votes and
/// adversarial proposer blocks no reference links. Blocks extend the
/// preferred public tip and are published at once. With `steer` set the
/// strategy also pushes honest votes toward the latest proposer in the
/// ambiguity band.
#[derive(Debug, Clone, Copy, Default)]
pub struct CensorVotes {
    pub steer: bool,
}

impl Strategy for CensorVotes {
    fn name(&self) -> &str {
        "censor_votes"
    }

    fn decide(&mut self, event: &StrategyEvent, view: &View) -> StrategyDecision {
        match *event {
            StrategyEvent::Budget { chain, .. } => StrategyDecision {
                action: Action::Mine { parent: view.preferred(chain), censor: true },
                publications: Vec::new(),
            },
            StrategyEvent::HonestBlock { .. } => StrategyDecision::skip(),
        }
    }

    fn on_mined(&mut self, block: BlockRef, view: &View) -> Vec<Publication> {
        vec![Publication::new(block, view.now)]
    }

    fn steer_vote(&mut self, _height: u64, band: &[BlockId], view: &View) -> Option<BlockId> {
        if !self.steer {
            return None;
        }
        let proposers = view.store.chain(0);
        band.iter().copied().find(|&b| !proposers.block(b).is_honest()).or_else(|| band.last().copied())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdversaryError {
    #[error("unknown strategy {0:?}")]
    UnknownStrategy(String),
    #[error("strategy {strategy}: bad parameter {param}: {reason}")]
    BadParam { strategy: String, param: String, reason: String },
}

/// Strategy named in a config file, with its parameter map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySpec {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, serde_json::Value>,
}

impl Default for StrategySpec {
    fn default() -> Self {
        Self::named("null")
    }
}

impl StrategySpec {
    pub fn named(name: &str) -> Self {
        Self { name: name.to_owned(), params: BTreeMap::new() }
    }

    pub fn with_param(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.params.insert(key.to_owned(), value.into());
        self
    }

    pub fn validate(&self) -> Result<(), AdversaryError> {
        self.build().map(|_| ())
    }

    pub fn build(&self) -> Result<Box<dyn Strategy>, AdversaryError> {
        let bad = |param: &str, reason: &str| AdversaryError::BadParam {
            strategy: self.name.clone(),
            param: param.to_owned(),
            reason: reason.to_owned(),
        };
        let allowed: &[&str] = match self.name.as_str() {
            "null" | "selfish_mining" => &[],
            "private_chain" => &["k_confirm"],
            "censor_votes" => &["steer"],
            other => return Err(AdversaryError::UnknownStrategy(other.to_owned())),
        };
        if let Some(key) = self.params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(bad(key, "not recognised"));
        }
        Ok(match self.name.as_str() {
            "null" => Box::new(NullAdversary),
            "selfish_mining" => Box::new(SelfishMining::new()),
            "private_chain" => {
                let k = match self.params.get("k_confirm") {
                    None => 1,
                    Some(v) => {
                        v.as_u64().filter(|&k| k >= 1).ok_or_else(|| bad("k_confirm", "expected a positive integer"))?
                    }
                };
                Box::new(PrivateChain::new(k))
            }
            _ => {
                let steer = match self.params.get("steer") {
                    None => false,
                    Some(v) => v.as_bool().ok_or_else(|| bad("steer", "expected a boolean"))?,
                };
                Box::new(CensorVotes { steer })
            }
        })
    }
}
