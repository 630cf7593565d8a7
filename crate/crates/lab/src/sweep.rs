//! Order-independent sweeps over independent experiment configs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::config::ExperimentConfig;
use crate::experiment::{execute, LabError, RunContext};
use crate::record::ResultRecord;

pub const SWEEP_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepConfig {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    pub master_seed: u64,
    pub configs: Vec<ExperimentConfig>,
}

fn default_schema_version() -> u32 {
    SWEEP_SCHEMA_VERSION
}

impl SweepConfig {
    pub fn load(path: &Path) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::Config(format!("reading {path:?}: {e}")))?;
        let cfg: SweepConfig =
            serde_json::from_str(&text).map_err(|e| LabError::Config(format!("sweep: {e}")))?;
        if cfg.schema_version != SWEEP_SCHEMA_VERSION {
            return Err(LabError::Config(format!(
                "unsupported sweep schema_version {}",
                cfg.schema_version
            )));
        }
        if cfg.configs.is_empty() {
            return Err(LabError::Config("empty sweep".into()));
        }
        Ok(cfg)
    }
}

/// Per-entry outcome; errors are isolated so other entries proceed.
#[derive(Debug)]
pub enum SweepOutcome {
    Done(Box<ResultRecord>),
    Failed(LabError),
}

/// Run every entry with its seed derived from (master seed, index).
/// Execution order does not affect any record.
pub fn run_sweep(sweep: &SweepConfig, ctx: &RunContext) -> Vec<SweepOutcome> {
    sweep
        .configs
        .par_iter()
        .enumerate()
        .map(|(idx, base)| {
            let mut cfg = base.clone();
            cfg.seed = anderson_core::rng::substream(sweep.master_seed, idx as u64);
            match execute(cfg.spec.kind_name(), &cfg, ctx) {
                Ok(rec) => SweepOutcome::Done(Box::new(rec)),
                Err(e) => SweepOutcome::Failed(e),
            }
        })
        .collect()
}
