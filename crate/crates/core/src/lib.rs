//! Agent-based simulation of virtual plagues spreading through a synthetic
//! online-game population.
//!
//! A run is driven by a [`ScenarioConfig`]: a world of zones, a heterogeneous
//! population, a staged disease, behavior parameters and an intervention
//! schedule. [`Simulation`] executes it tick by tick from a single seeded RNG
//! stream, so identical configuration and seed always give an identical event
//! log.

// `!(x >= 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod batch;
pub mod behavior;
pub mod disease;
pub mod error;
pub mod events;
pub mod intervention;
pub mod metrics;
pub mod output;
pub mod population;
pub mod rng;
pub mod scenario;
pub mod service;
pub mod sim;
pub mod sir;
pub mod transmission;
pub mod world;

#[cfg(test)]
mod testkit;

pub use error::{Error, Result, ValidationError};
pub use scenario::{load_scenario, ScenarioConfig};
pub use sim::{run, run_with, RunOptions, RunResult, Simulation};
