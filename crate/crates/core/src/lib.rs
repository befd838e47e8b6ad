//! Universal caching simulator.
//!
//! Online prefetching policies that learn which `C` of `N` files to cache:
//! [`sage`] (Hedge over cache sets via ESP marginals and Madow sampling),
//! [`markov`] (one SAGE instance per order-`k` context) and [`lz`] (one SAGE
//! instance per node of an LZ-78 parse tree). Offline oracles in [`fsm`],
//! [`markov`] and [`lz`] give the hindsight benchmarks, [`bounds`] evaluates
//! the regret guarantees in closed form, [`datagen`] synthesizes traces that
//! some finite-state prefetcher predicts perfectly, and [`harness`] runs
//! configured experiments.

pub mod bounds;
pub mod datagen;
pub mod error;
pub mod fsm;
pub mod harness;
pub mod io;
pub mod lz;
pub mod markov;
pub mod rng;
pub mod sage;
pub mod types;

pub use error::{Error, Result};
pub use rng::PolicyRng;
pub use types::{
    hit_rate, regret, run_policy, score_round, CachePolicy, CacheSet, FileId, RequestTrace,
    RunRecord,
};
