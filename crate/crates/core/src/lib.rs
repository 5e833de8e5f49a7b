//! Exact and simulated statistics for the repeated solicitation model.
//!
//! A solicitor contacts every prospect in a pool at epochs `1, 2, ...`,
//! dropping prospects as they respond, and gives up ("despairs") at the
//! first epoch that brings no response at all. This crate computes the law
//! of the despair time `T`, the total yield `Y` (responses before despair)
//! and the total marketing effort `M` (solicitations sent), and uses them to
//! plan campaigns.
//!
//! The crate is `no_std` with `alloc`. Parallel simulation, file formats and
//! the command-line front end live in the `solicit` crate.
//!
//! Module map:
//!
//! - [`law`]: response-time distributions with mass at infinity.
//! - [`poisson`]: exact engine under a Poisson pool-size prior.
//! - [`geometric`]: closed-form generating-function path for geometric
//!   response times.
//! - [`finite`]: fixed and binomial pool sizes, plus an exhaustive
//!   enumerator used as an oracle.
//! - [`sim`]: one replicate of the solicitation process.
//! - [`planner`]: pool sizing, response-probability selection and profit
//!   optimization.
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod binom;
mod error;
pub mod finite;
pub mod geometric;
pub mod law;
pub mod planner;
pub mod poisson;
pub mod sim;

pub use error::Error;
pub use finite::PriorSpec;
pub use geometric::GeometricPoissonCampaign;
pub use law::{Hazard, ResponseLaw};
pub use poisson::{CampaignStats, DespairLaw, Expectation, TruncationPolicy, YieldLaw};

/// Tolerance used when validating that probability masses sum to one.
pub const MASS_TOLERANCE: f64 = 1e-12;
