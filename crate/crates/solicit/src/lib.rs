//! Standard-library companion to `solicit-core`: parallel simulation, the
//! JSON configuration format, the cross-engine verification suite and the
//! `solicit` command-line front end.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod sim;
pub mod verify;

pub use config::RunConfig;
pub use sim::{simulate, Estimate, SimConfig, SimReport};
