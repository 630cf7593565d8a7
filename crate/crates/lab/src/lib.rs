//! Experiment harness around the core laboratory: JSON experiment configs,
//! a name-keyed registry of runnable experiment strategies, result records
//! with CSV/JSON writers, and deterministic sweep execution.

pub mod config;
pub mod experiment;
pub mod experiments;
pub mod record;
pub mod sweep;

pub use experiment::{registry, Experiment, LabError, RunContext};
pub use record::ResultRecord;
