use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{AnalysisError, ChainAnalysis, TraceAnalysis};
use crate::bounds::{min_depth, min_interval};
use crate::params::ProtocolParams;
use crate::store::Chain;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub event_held: bool,
    pub predicate_held: bool,
    /// Whether the theorem's own constraints on `k` and `t` were met. The
    /// check is evaluated either way.
    pub preconditions_met: bool,
}

impl CheckOutcome {
    pub fn violated(&self) -> bool {
        self.event_held && !self.predicate_held
    }
}

fn growth_coeff(params: &ProtocolParams) -> f64 {
    1.0 - 41.0 * params.delta_typ / 40.0
}

/// Growth: every blockchain credible at `t` is at least
/// `(1 - 41 delta / 40) g alpha (t - s)` higher than any credible at `s`,
/// guarded by the good event on `(s + delta, t - delta]`.
pub fn check_growth(
    analysis: &TraceAnalysis,
    chain: usize,
    s: f64,
    t: f64,
    params: &ProtocolParams,
) -> Result<CheckOutcome, AnalysisError> {
    let len = t - s;
    let min = min_interval(params.delta_net, params.delta_typ);
    if !(len > min) {
        return Err(AnalysisError::IntervalTooShort { len, min });
    }
    let c = analysis.chain(chain)?;
    let d = params.delta_net;
    let event_held = analysis.good_event(chain, s + d, t - d, params)?.holds();
    let (min_at_t, _) = c.public.credible_height_range(t, d);
    let (_, max_at_s) = c.public.credible_height_range(s, d);
    let gain = growth_coeff(params) * params.g() * params.alpha * len;
    Ok(CheckOutcome { event_held, predicate_held: min_at_t as f64 >= max_at_s as f64 + gain, preconditions_met: true })
}

/// Evaluates the typical-event proxy guarding the depth-`k` theorems at
/// `t`, along with whether their constraints on `k` and `t` hold.
fn depth_event(c: &ChainAnalysis, t: f64, k: u64, params: &ProtocolParams) -> (bool, bool) {
    let kf = k as f64;
    let s = t - kf / (2.0 * params.alpha) + params.delta_net;
    let end = t - params.delta_net;
    let mut pre = kf >= min_depth(params.alpha, params.delta_net, params.delta_typ)
        && t >= kf / (growth_coeff(params) * params.g() * params.alpha)
        && s >= 0.0;
    let event = match super::proxy_on(&c.counts, s.max(0.0), end, params) {
        Ok(held) => held,
        Err(_) => {
            pre = false;
            false
        }
    };
    (event, pre)
}

/// Quality: among the last `k` blocks of every blockchain credible at `t`,
/// at most `g k` are adversarial.
pub fn check_quality(
    analysis: &TraceAnalysis,
    chain: usize,
    t: f64,
    k: u64,
    params: &ProtocolParams,
) -> Result<CheckOutcome, AnalysisError> {
    let c = analysis.chain(chain)?;
    let store = analysis.trace.store.chain(chain);
    let (event_held, preconditions_met) = depth_event(c, t, k, params);
    let ceiling = params.g() * k as f64;
    let predicate_held = c
        .public
        .credible_tips(t, params.delta_net)
        .into_iter()
        .all(|tip| c.adversarial_in_last(store, tip, k) as f64 <= ceiling);
    Ok(CheckOutcome { event_held, predicate_held, preconditions_met })
}

/// Common prefix: the `(k-1)`-deep prefix of every blockchain credible at
/// `t` lies on every blockchain credible at each time in `r_grid`.
pub fn check_common_prefix(
    analysis: &TraceAnalysis,
    chain: usize,
    t: f64,
    k: u64,
    r_grid: &[f64],
    params: &ProtocolParams,
) -> Result<CheckOutcome, AnalysisError> {
    let c = analysis.chain(chain)?;
    let store = analysis.trace.store.chain(chain);
    let (event_held, preconditions_met) = depth_event(c, t, k, params);
    let predicate_held = common_prefix_holds(store, &c.public, t, k, r_grid, params.delta_net);
    Ok(CheckOutcome { event_held, predicate_held, preconditions_met })
}

pub(crate) fn common_prefix_holds(
    store: &Chain,
    public: &crate::store::PublicIndex,
    t: f64,
    k: u64,
    r_grid: &[f64],
    delta: f64,
) -> bool {
    let mut prefixes: Vec<_> =
        public.credible_tips(t, delta).into_iter().map(|tip| store.deep_prefix(tip, k.saturating_sub(1))).collect();
    prefixes.sort();
    prefixes.dedup();
    r_grid.iter().all(|&r| {
        public.credible_tips(r, delta).into_iter().all(|tip| prefixes.iter().all(|&p| store.is_ancestor(p, tip)))
    })
}

/// `n` evenly spaced times from `t` to `horizon`, both included.
pub fn default_r_grid(t: f64, horizon: f64, n: usize) -> Vec<f64> {
    if n < 2 || horizon <= t {
        return vec![t];
    }
    (0..n).map(|i| t + (horizon - t) * i as f64 / (n - 1) as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuralReport {
    pub distinct_lagger_heights: bool,
    pub loner_unique: bool,
    pub height_consensus: bool,
}

impl StructuralReport {
    pub fn all(&self) -> bool {
        self.distinct_lagger_heights && self.loner_unique && self.height_consensus
    }
}

/// The three deterministic structural facts every honest-compliant trace
/// satisfies: laggers occupy distinct heights, a loner is the only honest
/// block at its height, and a blockchain credible at `t` is no higher than
/// any credible at `t + delta`.
pub fn structural_lemmas(analysis: &TraceAnalysis, chain: usize) -> Result<StructuralReport, AnalysisError> {
    let c = analysis.chain(chain)?;
    let store = analysis.trace.store.chain(chain);
    let delta = analysis.trace.params.delta_net;

    let mut lagger_heights: Vec<u64> =
        c.flags.ids.iter().zip(&c.flags.lagger).filter(|(_, &u)| u).map(|(&id, _)| store.height(id)).collect();
    let laggers = lagger_heights.len();
    lagger_heights.sort_unstable();
    lagger_heights.dedup();
    let distinct_lagger_heights = lagger_heights.len() == laggers;

    let mut honest_at: HashMap<u64, usize> = HashMap::new();
    for &id in &c.flags.ids {
        *honest_at.entry(store.height(id)).or_default() += 1;
    }
    let loner_unique = c
        .flags
        .ids
        .iter()
        .zip(&c.flags.loner)
        .filter(|(_, v)| **v == Some(true))
        .all(|(&id, _)| honest_at[&store.height(id)] == 1);

    let mut grid: Vec<f64> = store.blocks().iter().filter_map(|b| b.publish_time).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let height_consensus = grid.iter().all(|&t| {
        let earlier = c.public.credible_tips(t, delta).iter().map(|&b| store.height(b)).max().unwrap_or(0);
        // The floor at t + delta is taken at t itself; (t + delta) - delta
        // can round below t and drop a block published exactly at t.
        let top = c.public.max_height(t + delta);
        let later = (c.public.max_height(t)..=top).find(|&h| !c.public.at_height(h, t + delta).is_empty()).unwrap_or(0);
        later >= earlier
    });

    Ok(StructuralReport { distinct_lagger_heights, loner_unique, height_consensus })
}
