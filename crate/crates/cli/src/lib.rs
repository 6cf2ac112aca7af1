//! Scenario-driven front end for the coincidence-rate simulator.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod output;
pub mod runner;
pub mod scenario;

pub use error::{CliError, CliResult};
pub use scenario::{Method, Scenario};
