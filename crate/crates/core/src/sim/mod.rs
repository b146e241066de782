//! Arrival sampling and the event loop.
//!
//! Honest arrivals and the adversarial budget are sampled up front, one
//! independent Poisson stream per chain and kind. The loop then walks the
//! merged arrivals in time order. Publications scheduled for an instant are
//! applied before any mining at that instant.

mod engine;

use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::Strategy;
use crate::params::{ParamError, ProtocolParams};
use crate::seed::{self, stream};
use crate::store::StoreError;
use crate::trace::Trace;

pub use engine::check_invariants;

/// How an honest miner picks among public tips.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    /// Highest public tip, earliest publication first, then lowest id.
    #[default]
    EarliestPublication,
    /// The strategy picks among the highest public tips.
    AdversarySteered,
    /// Highest tip published by `T - delta`, as if every block took the
    /// full delay bound to arrive.
    DelayedView,
}

/// Which proposer an honest voter block picks at each height.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoteView {
    /// Earliest published proposer, ties by lowest id.
    #[default]
    FirstPublished,
    /// The strategy may substitute any proposer published within delta of
    /// the first one and before the voter block.
    AdversarialBand,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimOptions {
    pub tie_break: TieBreak,
    pub vote_view: VoteView,
    /// Transactions per proposer block in Prism mode.
    pub txs_per_block: usize,
    pub outpoint_space: u64,
    pub redundant_prob: f64,
    /// Verify domination and honest compliance after the run.
    pub check_invariants: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            tie_break: TieBreak::EarliestPublication,
            vote_view: VoteView::FirstPublished,
            txs_per_block: 2,
            outpoint_space: 64,
            redundant_prob: 0.05,
            check_invariants: true,
        }
    }
}

/// Pre-sampled arrival times, one list per chain.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ArrivalSchedule {
    pub honest: Vec<Vec<f64>>,
    /// Points at which the adversary may mine.
    pub adversarial: Vec<Vec<f64>>,
}

impl ArrivalSchedule {
    pub fn sample(params: &ProtocolParams, seed: u64) -> Self {
        let chains = params.chain_count();
        Self {
            honest: (0..chains)
                .map(|j| sample_poisson_arrivals(params.alpha, params.horizon, seed::mix(seed, stream::honest(j))))
                .collect(),
            adversarial: (0..chains)
                .map(|j| sample_poisson_arrivals(params.beta, params.horizon, seed::mix(seed, stream::adversarial(j))))
                .collect(),
        }
    }
}

/// Arrival times of a rate-`rate` Poisson process on `(0, horizon]`.
pub fn sample_poisson_arrivals(rate: f64, horizon: f64, seed: u64) -> Vec<f64> {
    if !(rate > 0.0) {
        return Vec::new();
    }
    let exp = Exp::new(rate).expect("positive rate");
    let mut rng = seed::rng(seed);
    let mut out = Vec::with_capacity((rate * horizon * 1.1) as usize + 8);
    let mut t = 0.0;
    loop {
        let gap: f64 = exp.sample(&mut rng);
        if gap <= 0.0 {
            continue;
        }
        t += gap;
        if t > horizon {
            return out;
        }
        out.push(t);
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error("strategy violation at t={time}: {reason}")]
    StrategyViolation { time: f64, reason: String },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("trace invariant broken: {0}")]
    Invariant(String),
}

/// Samples a schedule from `seed` and runs one execution.
pub fn run_simulation(
    params: &ProtocolParams,
    options: &SimOptions,
    strategy: &mut dyn Strategy,
    seed: u64,
) -> Result<Trace, SimError> {
    params.validate()?;
    let schedule = ArrivalSchedule::sample(params, seed);
    run_with_schedule(params, options, schedule, strategy, seed)
}

/// Runs one execution on a given schedule. `seed` only drives the
/// transaction workload.
pub fn run_with_schedule(
    params: &ProtocolParams,
    options: &SimOptions,
    schedule: ArrivalSchedule,
    strategy: &mut dyn Strategy,
    seed: u64,
) -> Result<Trace, SimError> {
    params.validate()?;
    let trace = engine::Engine::new(params, options, seed).run(schedule, strategy)?;
    if options.check_invariants {
        check_invariants(&trace).map_err(SimError::Invariant)?;
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rate_gives_no_arrivals() {
        assert!(sample_poisson_arrivals(0.0, 100.0, 1).is_empty());
    }

    #[test]
    fn arrival_count_within_four_sigma() {
        let n = sample_poisson_arrivals(100.0, 1000.0, 3).len() as f64;
        assert!((n - 100_000.0).abs() <= 2000.0, "{n}");
    }

    #[test]
    fn arrivals_are_deterministic_sorted_and_bounded() {
        let a = sample_poisson_arrivals(2.0, 50.0, 11);
        assert_eq!(a, sample_poisson_arrivals(2.0, 50.0, 11));
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert!(a.iter().all(|&t| t > 0.0 && t <= 50.0));
    }

    #[test]
    fn zero_delay_reactions_keep_honest_parents_credible() {
        use crate::adversary::PrivateChain;

        let params =
            ProtocolParams { alpha: 1.0, beta: 0.35, delta_net: 0.0, horizon: 300.0, ..ProtocolParams::default() };
        let mut released = 0;
        for seed in 0..40 {
            let mut strategy = PrivateChain::new(1);
            let trace = run_simulation(&params, &SimOptions::default(), &mut strategy, seed).unwrap();
            released += (trace.report.success == Some(true)) as u32;
        }
        assert!(released > 0);
    }
}
