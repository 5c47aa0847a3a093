//! Config-driven experiment harness behind the `simulate` binary.

pub mod config;
pub mod output;
pub mod scenario;

pub use config::{load_config, parse_config, ExperimentConfig, OptimizerKind};
pub use output::{run_to_dir, Manifest};
pub use scenario::{run_scenario, Scenario};
