//! Simulation and security-bound laboratory for the continuous-time bitcoin
//! and Prism backbone protocols.
//!
//! The crate is organised around a few layers:
//!
//! * [`store`] holds blocks, heights, publication times and answers
//!   credible-chain queries.
//! * [`sim`] samples Poisson arrival schedules and runs the event loop in
//!   which honest miners and an [`adversary::Strategy`] build a [`Trace`].
//! * [`analysis`] classifies blocks, counts intervals and checks the good
//!   and typical events and the growth, quality and common-prefix
//!   predicates on finished traces.
//! * [`bounds`] evaluates the closed-form probability bounds.
//! * [`prism`] implements voting, leader election, reference links and
//!   ledger assembly for the Prism protocol.
//! * [`harness`] drives Monte Carlo experiments from a config file.
//!
//! ```
//! use backbone::{adversary::NullAdversary, sim, ProtocolParams};
//!
//! let params = ProtocolParams { horizon: 50.0, ..ProtocolParams::default() };
//! let trace = sim::run_simulation(&params, &sim::SimOptions::default(), &mut NullAdversary, 7).unwrap();
//! assert_eq!(trace.store.chain(0).len(), trace.schedule.honest[0].len() + 1);
//! ```

// `!(x > y)` is used on purpose so NaN falls on the rejecting side.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adversary;
pub mod analysis;
pub mod bounds;
pub mod harness;
pub mod params;
pub mod prism;
pub mod seed;
pub mod sim;
pub mod store;
pub mod trace;

pub use params::{ParamError, ProtocolParams};
pub use store::{Block, BlockId, BlockRef, BlockStore, Kind, NewBlock, StoreError};
pub use trace::Trace;

#[cfg(doctest)]
pub mod guide {
    #[doc = include_str!("../../../book/src/model.md")]
    pub mod model {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    pub mod simulation {}
    #[doc = include_str!("../../../book/src/analysis.md")]
    pub mod analysis {}
    #[doc = include_str!("../../../book/src/bounds.md")]
    pub mod bounds {}
    #[doc = include_str!("../../../book/src/prism.md")]
    pub mod prism {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    pub mod experiments {}
}
