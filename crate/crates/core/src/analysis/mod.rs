//! Block classification, interval counts, good and typical events, and the
//! theorem predicates evaluated on finished traces.
//!
//! Every check reports whether its guarding event held and whether the
//! predicate held, measured on the same unconditioned trace. A theorem is
//! contradicted only by `event_held && !predicate_held`.

mod checks;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::min_interval;
use crate::params::ProtocolParams;
use crate::store::{BlockId, Chain, PublicIndex};
use crate::trace::Trace;

pub use checks::{
    check_common_prefix, check_growth, check_quality, default_r_grid, structural_lemmas, CheckOutcome, StructuralReport,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("interval length {len} does not exceed the minimum {min}")]
    IntervalTooShort { len: f64, min: f64 },
    #[error("chain {0} is not part of the trace")]
    UnknownChain(usize),
}

/// Lagger and loner flags of the honest blocks of one chain, in mining
/// order (genesis excluded).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct HonestBlockFlags {
    pub ids: Vec<BlockId>,
    pub times: Vec<f64>,
    pub lagger: Vec<bool>,
    /// `None` when the window after the block runs past the horizon with no
    /// later honest block to settle it.
    pub loner: Vec<Option<bool>>,
}

impl HonestBlockFlags {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Fraction of laggers among all honest blocks.
    pub fn lagger_frequency(&self) -> Option<f64> {
        (!self.is_empty()).then(|| self.lagger.iter().filter(|&&u| u).count() as f64 / self.len() as f64)
    }

    /// Fraction of loners among honest blocks whose flag is known.
    pub fn loner_frequency(&self) -> Option<f64> {
        let known: Vec<bool> = self.loner.iter().flatten().copied().collect();
        (!known.is_empty()).then(|| known.iter().filter(|&&v| v).count() as f64 / known.len() as f64)
    }
}

/// Classifies sorted honest mining times. Genesis, mined at time 0,
/// counts as an earlier honest block.
pub fn classify_times(times: &[f64], delta: f64, horizon: f64) -> (Vec<bool>, Vec<Option<bool>>) {
    let n = times.len();
    let lagger: Vec<bool> = (0..n)
        .map(|i| {
            let prev = if i == 0 { 0.0 } else { times[i - 1] };
            times[i] - prev > delta
        })
        .collect();
    let loner = (0..n)
        .map(|i| {
            if !lagger[i] {
                Some(false)
            } else if let Some(&next) = times.get(i + 1) {
                Some(next > times[i] + delta)
            } else if times[i] + delta <= horizon {
                Some(true)
            } else {
                None
            }
        })
        .collect();
    (lagger, loner)
}

pub fn classify_chain(chain: &Chain, delta: f64, horizon: f64) -> HonestBlockFlags {
    let mut honest: Vec<(f64, BlockId)> =
        chain.blocks()[1..].iter().filter(|b| b.is_honest()).map(|b| (b.mined_time, b.id)).collect();
    honest.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let times: Vec<f64> = honest.iter().map(|e| e.0).collect();
    let (lagger, loner) = classify_times(&times, delta, horizon);
    HonestBlockFlags { ids: honest.into_iter().map(|e| e.1).collect(), times, lagger, loner }
}

/// Lagger and loner flags of the honest blocks on `chain`.
pub fn classify(trace: &Trace, chain: usize) -> Result<HonestBlockFlags, AnalysisError> {
    let c = trace.store.chains().get(chain).ok_or(AnalysisError::UnknownChain(chain))?;
    Ok(classify_chain(c, trace.params.delta_net, trace.params.horizon))
}

/// Honest (`n`), lagger (`x`), loner (`y`) and adversarial (`z`) blocks
/// mined in an interval `(s, t]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct IntervalCounts {
    pub n: u64,
    pub x: u64,
    pub y: u64,
    pub z: u64,
}

/// Prefix sums over one chain for constant or logarithmic-time interval
/// counts. Loners with an unknown flag count as 0.
#[derive(Debug, Clone)]
pub struct ChainCounts {
    honest_times: Vec<f64>,
    cum_lagger: Vec<u64>,
    cum_loner: Vec<u64>,
    adversarial_times: Vec<f64>,
    /// Counts of blocks mined in `(0, i]` for integer `i`.
    grid: Vec<IntervalCounts>,
}

impl ChainCounts {
    pub fn new(chain: &Chain, delta: f64, horizon: f64) -> Self {
        Self::from_flags(&classify_chain(chain, delta, horizon), chain, horizon)
    }

    pub fn from_flags(flags: &HonestBlockFlags, chain: &Chain, horizon: f64) -> Self {
        let mut cum_lagger = vec![0];
        let mut cum_loner = vec![0];
        for (u, v) in flags.lagger.iter().zip(&flags.loner) {
            cum_lagger.push(cum_lagger.last().unwrap() + *u as u64);
            cum_loner.push(cum_loner.last().unwrap() + (*v == Some(true)) as u64);
        }
        let mut adversarial_times: Vec<f64> =
            chain.blocks().iter().filter(|b| !b.is_honest()).map(|b| b.mined_time).collect();
        adversarial_times.sort_by(f64::total_cmp);
        let mut counts =
            Self { honest_times: flags.times.clone(), cum_lagger, cum_loner, adversarial_times, grid: Vec::new() };
        let last = horizon.max(0.0).floor() as usize + 1;
        counts.grid = (0..=last).map(|i| counts.interval(0.0, i as f64)).collect();
        counts
    }

    fn upto(&self, time: f64) -> IntervalCounts {
        let h = self.honest_times.partition_point(|&x| x <= time);
        IntervalCounts {
            n: h as u64,
            x: self.cum_lagger[h],
            y: self.cum_loner[h],
            z: self.adversarial_times.partition_point(|&x| x <= time) as u64,
        }
    }

    pub fn interval(&self, s: f64, t: f64) -> IntervalCounts {
        if !(s < t) {
            return IntervalCounts::default();
        }
        let (a, b) = (self.upto(s), self.upto(t));
        IntervalCounts { n: b.n - a.n, x: b.x - a.x, y: b.y - a.y, z: b.z - a.z }
    }

    /// Counts on `(k, l]` for integers `k < l`.
    fn integer_interval(&self, k: usize, l: usize) -> IntervalCounts {
        let at = |i: usize| match self.grid.get(i) {
            Some(c) => *c,
            None => self.upto(i as f64),
        };
        let (a, b) = (at(k), at(l));
        IntervalCounts { n: b.n - a.n, x: b.x - a.x, y: b.y - a.y, z: b.z - a.z }
    }
}

pub fn interval_counts(trace: &Trace, chain: usize, s: f64, t: f64) -> Result<IntervalCounts, AnalysisError> {
    let c = trace.store.chains().get(chain).ok_or(AnalysisError::UnknownChain(chain))?;
    Ok(ChainCounts::new(c, trace.params.delta_net, trace.params.horizon).interval(s, t))
}

/// The four conditions of the good event on an interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoodEvent {
    pub e1: bool,
    pub e2: bool,
    pub e3: bool,
    pub e4: bool,
}

impl GoodEvent {
    pub fn holds(&self) -> bool {
        self.e1 && self.e2 && self.e3 && self.e4
    }
}

pub fn good_event(counts: &IntervalCounts, s: f64, t: f64, params: &ProtocolParams) -> GoodEvent {
    good_event_with(counts, s, t, params, params.delta_typ)
}

/// The good event with an explicit typicality factor.
pub fn good_event_with(counts: &IntervalCounts, s: f64, t: f64, params: &ProtocolParams, delta: f64) -> GoodEvent {
    let len = t - s;
    let a = params.alpha;
    let g = params.g();
    let (n, x, y, z) = (counts.n as f64, counts.x as f64, counts.y as f64, counts.z as f64);
    GoodEvent {
        e1: (1.0 - delta) * len * a < n && n < (1.0 + delta) * len * a,
        e2: (1.0 - delta) * len * g * a < x,
        e3: (1.0 - delta) * len * g * g * a < y,
        e4: z < len * params.beta + len * g * g * a * delta,
    }
}

/// Typicality factor of the integer-grid events making up the proxy: the
/// largest value whose grid events imply the good event on every real
/// interval they sandwich.
pub fn delta_j(delta: f64) -> f64 {
    (39.0 * delta / 40.0) / (1.0 + delta / 40.0)
}

pub(crate) fn proxy_on(counts: &ChainCounts, s: f64, t: f64, params: &ProtocolParams) -> Result<bool, AnalysisError> {
    let (k_max, ls) = proxy_grid(s, t, params)?;
    let dj = delta_j(params.delta_typ);
    let (a, g) = (params.alpha, params.g());
    let at = |i: usize| counts.integer_interval(0, i);
    let left: Vec<IntervalCounts> = (0..=k_max).map(at).collect();
    let right: Vec<IntervalCounts> = ls.clone().map(at).collect();

    // Each condition reads f(l) - f(k) > c (l - k) (or <). Splitting it as
    // (f(l) - c l) vs (f(k) - c k) turns the grid into a min against a max.
    type Field = fn(&IntervalCounts) -> u64;
    let conditions: [(Field, f64, bool); 5] = [
        (|c| c.n, (1.0 - dj) * a, true),
        (|c| c.n, (1.0 + dj) * a, false),
        (|c| c.x, (1.0 - dj) * g * a, true),
        (|c| c.y, (1.0 - dj) * g * g * a, true),
        (|c| c.z, params.beta + g * g * a * dj, false),
    ];
    let mut near_tie = false;
    for (field, rate, above) in conditions {
        let shifted = |c: &IntervalCounts, i: usize| field(c) as f64 - rate * i as f64;
        let l_vals = right.iter().zip(ls.clone()).map(|(c, l)| shifted(c, l));
        let k_vals = left.iter().enumerate().map(|(k, c)| shifted(c, k));
        let margin = if above {
            l_vals.fold(f64::INFINITY, f64::min) - k_vals.fold(f64::NEG_INFINITY, f64::max)
        } else {
            k_vals.fold(f64::INFINITY, f64::min) - l_vals.fold(f64::NEG_INFINITY, f64::max)
        };
        let scale = 1.0 + rate * ls.end().max(&1).to_owned() as f64;
        if margin.abs() <= 1e-9 * scale {
            near_tie = true;
        } else if margin < 0.0 {
            return Ok(false);
        }
    }
    if near_tie {
        return proxy_brute_force(counts, s, t, params);
    }
    Ok(true)
}

/// `ceil(s)` and the range of right endpoints of the proxy grid.
fn proxy_grid(
    s: f64,
    t: f64,
    params: &ProtocolParams,
) -> Result<(usize, std::ops::RangeInclusive<usize>), AnalysisError> {
    let len = t - s;
    let min = min_interval(params.delta_net, params.delta_typ);
    if !(len > min) {
        return Err(AnalysisError::IntervalTooShort { len, min });
    }
    let k_max = s.max(0.0).ceil() as usize;
    let l_min = t.floor().max(0.0) as usize;
    let l_max = (params.horizon.floor() as usize).max(l_min);
    Ok((k_max, l_min..=l_max))
}

/// Direct evaluation of every grid interval; the reference for
/// [`proxy_on`].
pub(crate) fn proxy_brute_force(
    counts: &ChainCounts,
    s: f64,
    t: f64,
    params: &ProtocolParams,
) -> Result<bool, AnalysisError> {
    let (k_max, ls) = proxy_grid(s, t, params)?;
    let dj = delta_j(params.delta_typ);
    for l in ls {
        for k in 0..=k_max {
            let c = counts.integer_interval(k, l);
            if !good_event_with(&c, k as f64, l as f64, params, dj).holds() {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Countable stand-in for the typical event on `(s, t]`: the good event
/// with factor [`delta_j`] on every integer interval `(k, l]` with
/// `k <= ceil(s)` and `floor(t) <= l <= floor(horizon)`.
pub fn typical_event_proxy(
    trace: &Trace,
    chain: usize,
    s: f64,
    t: f64,
    params: &ProtocolParams,
) -> Result<bool, AnalysisError> {
    let c = trace.store.chains().get(chain).ok_or(AnalysisError::UnknownChain(chain))?;
    let counts = ChainCounts::new(c, params.delta_net, params.horizon);
    proxy_on(&counts, s, t, params)
}

/// Everything the checks need about one chain, computed once.
#[derive(Debug, Clone)]
pub struct ChainAnalysis {
    pub flags: HonestBlockFlags,
    pub counts: ChainCounts,
    pub public: PublicIndex,
    /// Adversarial blocks on the path from genesis to each block.
    adversarial_prefix: Vec<u64>,
}

impl ChainAnalysis {
    pub fn new(chain: &Chain, delta: f64, horizon: f64) -> Self {
        let flags = classify_chain(chain, delta, horizon);
        let counts = ChainCounts::from_flags(&flags, chain, horizon);
        let mut adversarial_prefix = Vec::with_capacity(chain.len());
        for b in chain.blocks() {
            let above = b.parent.map_or(0, |p| adversarial_prefix[p.0]);
            adversarial_prefix.push(above + !b.is_honest() as u64);
        }
        Self { flags, counts, public: PublicIndex::from_chain(chain), adversarial_prefix }
    }

    /// Adversarial blocks among the last `k` blocks of the chain ending in
    /// `tip` (all of its blocks if it is shorter).
    pub fn adversarial_in_last(&self, chain: &Chain, tip: BlockId, k: u64) -> u64 {
        let h = chain.height(tip);
        let below = if h > k {
            let cut = chain.ancestor_at_height(tip, h - k).expect("height checked");
            self.adversarial_prefix[cut.0]
        } else {
            0
        };
        self.adversarial_prefix[tip.0] - below
    }
}

/// Per-chain analyses of a whole trace.
#[derive(Debug, Clone)]
pub struct TraceAnalysis<'a> {
    pub trace: &'a Trace,
    pub chains: Vec<ChainAnalysis>,
}

impl<'a> TraceAnalysis<'a> {
    pub fn new(trace: &'a Trace) -> Self {
        let p = &trace.params;
        let chains = trace.store.chains().iter().map(|c| ChainAnalysis::new(c, p.delta_net, p.horizon)).collect();
        Self { trace, chains }
    }

    pub fn chain(&self, chain: usize) -> Result<&ChainAnalysis, AnalysisError> {
        self.chains.get(chain).ok_or(AnalysisError::UnknownChain(chain))
    }

    pub fn good_event(
        &self,
        chain: usize,
        s: f64,
        t: f64,
        params: &ProtocolParams,
    ) -> Result<GoodEvent, AnalysisError> {
        Ok(good_event(&self.chain(chain)?.counts.interval(s, t), s, t, params))
    }

    pub fn typical_proxy(&self, chain: usize, s: f64, t: f64, params: &ProtocolParams) -> Result<bool, AnalysisError> {
        proxy_on(&self.chain(chain)?.counts, s, t, params)
    }
}
