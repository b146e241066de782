use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{build_ledger, combinations, elect, lineage_votes, LeaderSequence, TxIndex};
use crate::analysis::{AnalysisError, ChainAnalysis, CheckOutcome, TraceAnalysis};
use crate::bounds::{min_depth, min_interval};
use crate::params::ProtocolParams;
use crate::store::{BlockId, TxId};
use crate::trace::Trace;

/// Per-chain analyses plus the Prism-specific indices, computed once per
/// trace.
#[derive(Debug, Clone)]
pub struct PrismAnalysis<'a> {
    pub base: TraceAnalysis<'a>,
    pub tx_index: TxIndex,
    /// Cap on elector combinations examined per time.
    pub elector_cap: usize,
}

impl<'a> PrismAnalysis<'a> {
    pub fn new(trace: &'a Trace) -> Self {
        Self {
            base: TraceAnalysis::new(trace),
            tx_index: TxIndex::new(&trace.store, &trace.transactions),
            elector_cap: 64,
        }
    }

    pub fn trace(&self) -> &'a Trace {
        self.base.trace
    }

    /// Distinct leader vectors over every combination of credible voter
    /// tips at `t`, and whether the combinations were capped.
    pub fn credible_leader_sequences(&self, t: f64) -> (Vec<LeaderSequence>, bool) {
        let store = &self.trace().store;
        let delta = self.trace().params.delta_net;
        let per_chain: Vec<Vec<BlockId>> =
            self.base.chains[1..].iter().map(|c| c.public.credible_tips(t, delta)).collect();
        let (sets, truncated) = combinations(&per_chain, self.elector_cap);

        let mut ballots: HashMap<(usize, BlockId), Vec<Option<BlockId>>> = HashMap::new();
        for (j, tips) in per_chain.iter().enumerate() {
            for &tip in tips {
                ballots.insert((j, tip), lineage_votes(store.chain(j + 1), tip));
            }
        }
        let public0 = &self.base.chains[0].public;
        let n = public0.max_height(t - delta);
        let mut out: Vec<LeaderSequence> = Vec::new();
        for electors in sets {
            let refs: Vec<&[Option<BlockId>]> =
                electors.iter().enumerate().map(|(j, tip)| ballots[&(j, *tip)].as_slice()).collect();
            let leaders = elect(store.chain(0), public0, t, n, &refs);
            if out.iter().all(|s| s.leaders != leaders) {
                out.push(LeaderSequence { leaders, elected_at: t, electors });
            }
        }
        (out, truncated)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrismReport {
    pub growth: CheckOutcome,
    pub quality: CheckOutcome,
    pub leader_prefix: CheckOutcome,
    pub transactions: CheckOutcome,
    /// Whether some elector enumeration hit the cap.
    pub truncated: bool,
}

impl PrismReport {
    pub fn outcomes(&self) -> [(&'static str, CheckOutcome); 4] {
        [
            ("prism_growth", self.growth),
            ("prism_quality", self.quality),
            ("leader_prefix", self.leader_prefix),
            ("tx_permanence", self.transactions),
        ]
    }
}

fn growth_coeff(params: &ProtocolParams) -> f64 {
    1.0 - 41.0 * params.delta_typ / 40.0
}

/// The typical-event proxy on `(t - k / 2 alpha + delta, t - delta)` for one
/// chain; `None` when the window is shorter than the proxy allows.
fn depth_proxy(c: &ChainAnalysis, t: f64, k: u64, params: &ProtocolParams) -> Option<bool> {
    let s = t - k as f64 / (2.0 * params.alpha) + params.delta_net;
    let held = crate::analysis::proxy_on(&c.counts, s.max(0.0), t - params.delta_net, params).ok()?;
    Some(held && s >= 0.0)
}

fn joint_proxy(chains: &[ChainAnalysis], t: f64, k: u64, params: &ProtocolParams) -> (bool, bool) {
    let mut pre = true;
    let mut held = true;
    for c in chains {
        match depth_proxy(c, t, k, params) {
            Some(h) => held &= h,
            None => {
                pre = false;
                held = false;
            }
        }
        if !held {
            break;
        }
    }
    (held, pre)
}

/// Evaluates the four Prism theorems at time `t` and depth `k`. Predicates
/// quantified over later times use `r_grid`, restricted to times `>= t`.
pub fn check_prism_theorems(
    analysis: &PrismAnalysis,
    t: f64,
    k: u64,
    r_grid: &[f64],
    params: &ProtocolParams,
) -> Result<PrismReport, AnalysisError> {
    if analysis.base.chains.len() < 2 {
        return Err(AnalysisError::UnknownChain(1));
    }
    let d = params.delta_net;
    let g = params.g();
    let a = params.alpha;
    let kf = k as f64;
    let gc = growth_coeff(params);
    let deep_enough = kf >= min_depth(a, d, params.delta_typ);
    let later: Vec<f64> = r_grid.iter().copied().filter(|&r| r >= t).collect();
    let chains = &analysis.base.chains;
    let public0 = &chains[0].public;
    let mut truncated = false;

    let growth = {
        let s = t - kf / (2.0 * a);
        let pre = t - s > min_interval(d, params.delta_typ) && s >= 0.0;
        let event_held = pre && analysis.base.good_event(0, s + d, t - d, params)?.holds();
        let gain = gc * g * a * (t - s);
        let predicate_held = public0.max_height(t - d) as f64 >= public0.max_height(s - d) as f64 + gain;
        CheckOutcome { event_held, predicate_held, preconditions_met: pre }
    };

    let (at_t, cut) = analysis.credible_leader_sequences(t);
    truncated |= cut;

    let quality = {
        let (event_held, pre) = joint_proxy(&chains[..1], t, k, params);
        let proposers = analysis.trace().store.chain(0);
        let predicate_held = at_t.iter().all(|s| {
            let tail = &s.leaders[s.leaders.len().saturating_sub(k as usize)..];
            tail.iter().filter(|&&b| !proposers.block(b).is_honest()).count() as f64 <= g * kf
        });
        CheckOutcome { event_held, predicate_held, preconditions_met: pre && deep_enough }
    };

    let leader_prefix = {
        let (event_held, pre) = joint_proxy(&chains[1..], t, k, params);
        let cutoff = t - kf / (gc * (1.0 - g) * g * a) - d;
        let h = (1..).take_while(|&h| !public0.at_height(h, cutoff).is_empty()).last().unwrap_or(0) as usize;
        let mut predicate_held = true;
        if let Some(reference) = at_t.first().map(|s| &s.leaders[..h.min(s.leaders.len())]) {
            let shares =
                |seqs: &[LeaderSequence]| seqs.iter().all(|s| s.leaders.len() >= h && s.leaders[..h] == *reference);
            predicate_held = reference.len() == h && shares(&at_t);
            for &r in &later {
                if !predicate_held {
                    break;
                }
                let (seqs, cut) = analysis.credible_leader_sequences(r);
                truncated |= cut;
                predicate_held = shares(&seqs);
            }
        }
        CheckOutcome { event_held, predicate_held, preconditions_met: pre && deep_enough && cutoff >= 0.0 }
    };

    let transactions = {
        let (event_held, pre) = joint_proxy(chains, t, k, params);
        let r = t - 2.0 * (kf + 1.0) / (gc * gc * g * g * (1.0 - g) * (1.0 - g) * a) - d;
        let trace = analysis.trace();
        let registry = &trace.transactions;
        let credible: Vec<TxId> = registry
            .keys()
            .copied()
            .filter(|&tx| {
                analysis.tx_index.first_seen(tx).is_some_and(|p| p <= r)
                    && analysis.tx_index.credible_until(registry, tx, t)
            })
            .collect();
        let mut predicate_held = true;
        if !credible.is_empty() {
            for &when in std::iter::once(&t).chain(later.iter().filter(|&&x| x > t)) {
                let (seqs, cut) = analysis.credible_leader_sequences(when);
                truncated |= cut;
                predicate_held = seqs.iter().all(|s| {
                    let ledger: HashSet<TxId> = build_ledger(&trace.store, s, registry).tx_ids().into_iter().collect();
                    credible.iter().all(|tx| ledger.contains(tx))
                });
                if !predicate_held {
                    break;
                }
            }
        }
        CheckOutcome { event_held, predicate_held, preconditions_met: pre && deep_enough && r >= 0.0 }
    };

    Ok(PrismReport { growth, quality, leader_prefix, transactions, truncated })
}
