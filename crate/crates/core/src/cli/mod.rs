//! Configuration and stage runner behind the `capflow` binary.

pub mod config;
pub mod run;

pub use config::{Bound, CapConfig, Command, ExperimentConfig, TransformConfig, VitushkinConfig};
pub use run::{run, RunManifest, StageRecord};
