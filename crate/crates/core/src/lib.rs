//! Dual-station EV charging world.
//!
//! The crate owns the physical simulation: time-of-use tariffs, pile and
//! station hardware, the commuting-behaviour population sampler, the
//! probabilistic station-selection model, the competitive price/reclaim
//! ledger, and the charging MDP that ties them together over a simulated
//! day. All randomness flows through explicitly seeded generators.

pub mod env;
pub mod error;
pub mod ev;
pub mod preference;
pub mod pricing;
pub mod rng;
pub mod station;
pub mod tariff;

pub use error::{CoreError, Result};
