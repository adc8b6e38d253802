//! Scenario configuration, ensemble runner and result files for the `solnft`
//! simulator.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod output;
pub mod receiver;
pub mod runner;
pub mod scenarios;

pub use config::ScenarioConfig;
pub use error::HarnessError;
pub use runner::{run_experiment, ExperimentResult};
pub use scenarios::builtin_scenario;
